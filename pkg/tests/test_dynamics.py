import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchlab.biot_savart import static_estimate_report
from patchlab.config import builtin, stream
from patchlab.dynamics import (
    WALL,
    AxisymFlow,
    ContourModel,
    DiagnosticsRow,
    MeridianGrid,
    advance,
    axisym_bound,
    cross_invariant_drift,
    desk_setup,
    diagnostics,
    gronwall_envelope_check,
    omega_dot_n,
    ring_state,
    run_desk,
    seed_particles,
)
from patchlab.dynamics.diagnostics import _Gridded, eulerian_snapshot
from patchlab.dynamics.ring import ellipse_ring, principal_angle, reparametrize, ring_area, ring_moments
from patchlab.errors import PreconditionError
from patchlab.fieldops import build_grid, domain_disk
from patchlab.oracles import kirchhoff_rate
from patchlab.patch import Profile, QuadricLevelSet, VortexPatch, circle, tangent_system_from_levelset
from patchlab.scenario import planar_setup, run_scenario
from patchlab.verify import cross_invariant_order, ellipse_disk_setup, kirchhoff_phase, rankine_steady


# -- ring utilities -----------------------------------------------------------------


@given(st.floats(0.1, 0.6), st.floats(0.1, 0.6), st.floats(-1.5, 1.5))
def test_ellipse_ring_moments(a, b, angle):
    ring = ellipse_ring((0.1, -0.2), (a, b), 2048, angle)
    area, c, _ = ring_moments(ring)
    assert area == pytest.approx(math.pi * a * b, rel=1e-5)
    assert np.allclose(c, (0.1, -0.2), atol=1e-12)
    if abs(a - b) > 0.05:
        want = angle if a > b else angle + math.pi / 2
        diff = (principal_angle(ring) - want + math.pi / 2) % math.pi - math.pi / 2
        assert abs(diff) < 1e-9


def test_reparametrize_keeps_shape():
    rng = np.random.default_rng(3)
    t = np.sort(rng.uniform(0, 2 * np.pi, 400))
    ring = np.stack([0.4 * np.cos(t), 0.25 * np.sin(t)], -1)
    new = reparametrize(ring, 400)
    assert np.allclose(new[0], ring[0])
    assert ring_area(new) == pytest.approx(ring_area(ring), rel=1e-3)
    step = np.linalg.norm(np.diff(new, axis=0), axis=1)
    assert step.max() / step.min() < 1.01


# -- frozen and steady flows -------------------------------------------------------


def test_zero_vorticity_leaves_particles_in_place():
    g = build_grid(2, 2.5, 64)
    dom = domain_disk(1.0, g)
    patch = VortexPatch(circle((0.1, 0.0), 0.4), Profile.from_spec(2, 0.0), Profile.from_spec(2, 0.0))
    st0 = seed_particles(patch, dom, g, tangent_system_from_levelset(patch, dom, g))
    st1 = advance(st0, ContourModel(0.0, 0.0, dom), 0.1, g.h, dom)
    assert np.array_equal(st1.x, st0.x)
    assert np.array_equal(st1.w, st0.w)
    assert np.array_equal(st1.ring, st0.ring)
    assert cross_invariant_drift(st1) == 0.0


def test_initial_state_has_no_drift():
    _, dom, _, _, st0 = ellipse_disk_setup(64)
    assert cross_invariant_drift(st0) == 0.0
    nv = omega_dot_n(st0, dom)
    assert nv.discrepancy == 0.0


def test_rankine_disk_is_steady():
    out = rankine_steady(n=64, t_end=0.5, markers=256)
    assert out["completed"]
    assert out["drift"] < 1e-3 and out["area"] < 5e-3


@pytest.mark.slow
def test_kirchhoff_rate_short_run():
    out = kirchhoff_phase(n=128, revolutions=0.5, markers=512)
    assert out["expected"] == pytest.approx(kirchhoff_rate(0.2, 0.1))
    assert out["error"] < 0.02


def test_cross_invariant_converges_and_2d_vorticity_constant():
    out = cross_invariant_order(dts=(0.1, 0.05), T=0.5)
    assert out["ratios"][0] >= 8
    assert out["omega_err"] <= 1e-12
    assert out["omega_n_direct"] == 0.0 and out["omega_n_formula"] == 0.0
    assert out["wall_normal"] < 1e-6


# -- diagnostics --------------------------------------------------------------------


def test_initial_row_matches_static_report():
    cfg = builtin("perturbed-ellipse", grid={"n": 64, "diagnostics_n": 64, "particles_n": 64})
    su = planar_setup(cfg)
    row = diagnostics(su.state, su.ctx)
    om, vel, fields, _, _ = eulerian_snapshot(su.state, su.ctx)
    rep = static_estimate_report(vel, om, _Gridded(fields, su.ctx.system.s), su.patch, r=su.patch.r,
                                 rng=stream(cfg.seed, "holder-pairs"))
    assert row.ratio == pytest.approx(rep.ratio, rel=1e-12)
    assert row.X == pytest.approx(rep.X, rel=1e-12)
    assert row.t == 0.0 and row.cross_drift == 0.0


def test_row_rejects_unphysical_values():
    with pytest.raises(PreconditionError):
        DiagnosticsRow(0, 1, 1, 1, 1, 1, 0, 0.5, 1.0, 0, 0, 1)
    with pytest.raises(PreconditionError):
        DiagnosticsRow(0, 1, 1, 1, 1, 1, 0, 2.0, 0.0, 0, 0, 1)


def _rows(t, lip, X):
    return [DiagnosticsRow(ti, li, 1, 1, 1, 1, 0, xi, 1.0, 0, 0, 1) for ti, li, xi in zip(t, lip, X)]


def test_envelope_holds_for_double_exponential_growth():
    t = np.linspace(0, 2, 60)
    lip = np.full_like(t, 0.7)
    X = np.exp(np.exp(0.5 + 0.5 * lip * t)) - math.e
    rep = gronwall_envelope_check(_rows(t, lip, X), global_bound=True)
    assert rep.passed()
    assert rep.slope == pytest.approx(0.5, rel=1e-6)


def test_envelope_flags_a_late_jump():
    t = np.linspace(0, 2, 60)
    lip = np.full_like(t, 0.7)
    X = 2.0 + 0.1 * t
    X[-5:] *= 10
    rep = gronwall_envelope_check(_rows(t, lip, X))
    assert not rep.passed()


def test_envelope_needs_enough_rows():
    t = np.linspace(0, 1, 10)
    with pytest.raises(PreconditionError):
        gronwall_envelope_check(_rows(t, t + 1, t + 2))


# -- axisymmetric flow -------------------------------------------------------------


def test_axisym_bound_holds_on_short_run():
    mg = MeridianGrid(2.0, 2.0, 24, 48)
    flow = AxisymFlow(mg)
    st = ring_state(mg, (1.0, -0.5), 0.3, 1.0)
    bound = axisym_bound(st, mg)
    dt = flow.cfl_dt(st, 0.9)
    xi0 = st.xi.copy()
    for _ in range(20):
        st = flow.advance(st, dt)
        assert flow.diagnostics(st, 1.0).omega_sup <= bound
    assert np.array_equal(st.xi, xi0)
    # the ring translates along the axis
    moved = st.x[xi0 > 0].mean(axis=0) - st.x0[xi0 > 0].mean(axis=0)
    assert abs(moved[1]) > 5 * abs(moved[0])


# -- longer runs -------------------------------------------------------------------


@pytest.mark.slow
def test_perturbed_ellipse_envelope(tmp_path):
    cfg = builtin("perturbed-ellipse", grid={"n": 64, "diagnostics_n": 64, "particles_n": 64},
                  integrator={"t_end": 2.6, "sample_every": 1})
    out = run_scenario(cfg, tmp_path)
    assert out.completed and len(out.rows) >= 50
    assert out.extras["envelope"] == "passed"


@pytest.mark.slow
def test_desk_short_run():
    su = desk_setup()
    run = run_desk(su, steps=3)
    assert run.max_discrepancy <= 0.05
    assert max(run.wall_normal) < 1e-6
    assert np.all(np.isfinite(run.state.x[run.state.select(WALL)]))
