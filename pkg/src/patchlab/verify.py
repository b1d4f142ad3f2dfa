"""Verification suites: each check reports a measured value against its threshold.

Suites: ``lp``, ``multiplier``, ``extension``, ``biot-savart``, ``patch``,
``dynamics``. ``fast`` shrinks corpora, grids and run lengths. Checks that
implement a numbered acceptance criterion carry its number in
``criterion``.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .biot_savart import neumann_correct, neumann_potential, static_estimate_report, velocity_from_vorticity
from .config import builtin, stream
from .dynamics.axisym import AxisymFlow, MeridianGrid, axisym_bound, ring_state
from .dynamics.desk3d import desk_setup, run_desk
from .dynamics.diagnostics import RunContext, diagnostics
from .dynamics.flow import LATTICE, TUBE, WALL, ContourModel, cfl_dt, seed_particles
from .dynamics.invariants import cross_invariant_drift, levelset_boundary_norm, omega_dot_n
from .dynamics.ring import ring_area
from .dynamics.runner import integrate
from .errors import ConfigurationError, PreconditionError
from .extension import build_atlas, extend_P, extend_Pdiv
from .fieldops import RoundDomain, build_grid, domain_disk, random_bandlimited
from .lp_core import (
    besov_norm,
    besov_norm_direct,
    block_of,
    bony_split,
    dyadic_blocks,
    filter_bank,
    indicator_multiplier_ratio,
)
from .oracles import disk_point_vortex_velocity, kirchhoff_rate, point_vortex_velocity, rankine_velocity
from .patch import Profile, QuadricLevelSet, VortexPatch, circle, tangent_system_from_levelset
from .scenario import planar_setup

SUITES = ("lp", "multiplier", "extension", "biot-savart", "patch", "dynamics")

# Largest log-estimate ratio measured over the shipped scenarios and their
# refinements is 0.297 (axisymmetric ring); the recorded bound leaves headroom.
LOG_RATIO_BOUND = 0.5


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    threshold: float
    criterion: int | None = None
    detail: str = ""
    seconds: float = 0.0
    below: bool = True  # pass when value <= threshold; False means value >= threshold

    def to_json(self) -> str:
        d = asdict(self)
        for key in ("value", "threshold"):
            if not math.isfinite(d[key]):
                d[key] = str(d[key])
        return json.dumps(d, sort_keys=True)


def _check(suite, name, value, threshold, criterion=None, detail="", below=True, seconds=0.0) -> Check:
    value = float(value)
    ok = math.isfinite(value) and (value <= threshold if below else value >= threshold)
    return Check(suite, name, bool(ok), value, float(threshold), criterion, detail, seconds, below)


class _Clock:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# -- lp ---------------------------------------------------------------------------------


def lp_corpus(rng: np.random.Generator, fast: bool = False) -> list[tuple[object, np.ndarray]]:
    """Band-limited, rough and discontinuous fields on 2-D and 3-D grids."""
    g2 = build_grid(2, 2 * np.pi, 128 if fast else 256)
    g3 = build_grid(3, 2 * np.pi, 16 if fast else 32)
    out = []
    for _ in range(4 if fast else 12):
        out.append((g2, random_bandlimited(g2, rng.uniform(2, 20), rng)))
    for _ in range(2 if fast else 4):
        out.append((g3, random_bandlimited(g3, rng.uniform(2, 6), rng)))
    out.append((g2, rng.standard_normal(g2.shape)))
    out.append((g3, rng.standard_normal(g3.shape)))
    x = np.moveaxis(g2.mesh(), 0, -1)
    out.append((g2, (QuadricLevelSet((0.3, -0.2), (1.4, 0.8))(x) < 0).astype(float)))
    out.append((g2, np.full(g2.shape, 2.5)))
    return out


def suite_lp(fast: bool = False, seed: int = 0) -> list[Check]:
    checks = []
    n = 128 if fast else 256
    pairs = 20 if fast else 100
    g = build_grid(2, 2 * np.pi, n)
    rng = stream(seed, "lp-bony")
    worst = 0.0
    with _Clock() as clk:
        for _ in range(pairs):
            a = random_bandlimited(g, rng.uniform(2, n // 3), rng)
            b = rng.standard_normal(g.shape) if rng.uniform() < 0.3 else random_bandlimited(g, rng.uniform(2, n // 3), rng)
            tab, tba, rem = bony_split(a, b, g)
            scale = max(float(np.max(np.abs(a * b))), 1e-300)
            worst = max(worst, float(np.max(np.abs(tab + tba + rem - a * b))) / scale)
    detail = f"{pairs} pairs on {n}^2"
    checks.append(_check("lp", "bony_identity", worst, 1e-10, 1, detail, seconds=clk.seconds))
    checks.append(_check("lp", "bony_runtime_seconds", clk.seconds, 60.0, 1, detail, seconds=clk.seconds))

    with _Clock() as clk:
        worst = 0.0
        corpus = lp_corpus(stream(seed, "lp-corpus"), fast)
        for grid, f in corpus:
            blocks = dyadic_blocks(f, grid).blocks
            worst = max(worst, float(np.max(np.abs(blocks.sum(axis=0) - f)) / max(np.max(np.abs(f)), 1e-300)))
    checks.append(_check("lp", "lp_reconstruction", worst, 1e-10, 2, f"{len(corpus)} fields", seconds=clk.seconds))

    with _Clock() as clk:
        g = build_grid(2, 2 * np.pi, 128)
        f = random_bandlimited(g, 60, stream(seed, "lp-orth"))
        bank = filter_bank(g)
        levels = list(bank.levels)
        worst = 0.0
        for i, a in enumerate(levels):
            fa = block_of(f, g, a, bank)
            for b in levels[i + 2:]:
                worst = max(worst, float(np.max(np.abs(block_of(fa, g, b, bank)))))
        worst /= float(np.max(np.abs(f)))
    checks.append(_check("lp", "quasi_orthogonality", worst, 1e-12, None, seconds=clk.seconds))

    with _Clock() as clk:
        rng = stream(seed, "lp-besov")
        worst = 0.0
        for p, q in ((1, 2), (2, 2), (np.inf, np.inf), (1, 1)):
            f = random_bandlimited(g, 30, rng)
            a, b = besov_norm(f, g, 0.5, p, q), besov_norm_direct(f, g, 0.5, p, q)
            worst = max(worst, abs(a - b) / b)
    checks.append(_check("lp", "besov_two_routes", worst, 1e-10, None, seconds=clk.seconds))
    return checks


# -- multiplier -------------------------------------------------------------------------


def multiplier_census(ns=(128, 256), m: int = 50, seed: int = 0, extent: float = 2.5):
    """Max ``‖χ_P f‖ / ‖f‖`` in ``B^{1/2}_{1,2}`` for a disk patch at each resolution."""
    out = {}
    for n in ns:
        g = build_grid(2, extent, n)
        chi = (circle((0.1, 0.0), 0.6)(np.moveaxis(g.mesh(), 0, -1)) < 0).astype(float)
        out[n] = indicator_multiplier_ratio(chi, g, 0.5, m, stream(seed, "multiplier-corpus"))
    return out


def suite_multiplier(fast: bool = False, seed: int = 0) -> list[Check]:
    with _Clock() as clk:
        ns = (64, 128) if fast else (128, 256)
        reps = multiplier_census(ns, 10 if fast else 50, seed)
        lo, hi = reps[ns[0]].max_ratio, reps[ns[1]].max_ratio
        change = abs(hi - lo) / lo if np.isfinite(lo) and np.isfinite(hi) else float("inf")
    detail = f"max ratio {lo:.6g} at {ns[0]}^2, {hi:.6g} at {ns[1]}^2"
    checks = [_check("multiplier", "ratio_refinement_change", change, 0.30, 3, detail, seconds=clk.seconds)]
    with _Clock() as clk:
        g = build_grid(2, 2.5, 64)
        rep = indicator_multiplier_ratio(np.ones(g.shape), g, 0.5, 5, stream(seed, "multiplier-box"))
    checks.append(_check("multiplier", "whole_box_ratio_is_one", float(np.max(np.abs(rep.ratios - 1))), 1e-12,
                         seconds=clk.seconds))
    return checks


# -- extension --------------------------------------------------------------------------


def tangent_field(domain: RoundDomain, rng: np.random.Generator, modes: int = 4) -> Callable:
    """Divergence-free field tangent to the circle: ``∇^⊥(δ p)`` with a random trigonometric ``p``."""
    K = rng.standard_normal((modes, modes)) / (1.0 + np.add.outer(np.arange(modes), np.arange(modes)))
    ph = rng.uniform(0, 2 * np.pi, size=2)
    k = np.arange(modes)

    def u(x):
        X, Y = x[:, 0:1], x[:, 1:2]
        cx, sx = np.cos(k * X + ph[0]), np.sin(k * X + ph[0])
        cy, sy = np.cos(k * Y + ph[1]), np.sin(k * Y + ph[1])
        p = np.einsum("pi,ij,pj->p", cx, K, cy)
        px = np.einsum("pi,ij,pj->p", -k * sx, K, cy)
        py = np.einsum("pi,ij,pj->p", cx, K, -k * sy)
        d, gd = domain.delta(x), domain.grad_delta(x)
        sx_ = gd[:, 0] * p + d * px
        sy_ = gd[:, 1] * p + d * py
        return np.stack([sy_, -sx_], -1)

    return u


def suite_extension(fast: bool = False, seed: int = 0) -> list[Check]:
    g = build_grid(2, 4.0, 64 if fast else 128)
    dom = domain_disk(1.0, g)
    atlas = build_atlas(dom)
    rng = stream(seed, "extension-corpus")
    inside = dom.node_mask(g)
    worst_out, worst_div, worst_restrict = 0.0, 0.0, 0.0
    count = 5 if fast else 20
    with _Clock() as clk:
        for _ in range(count):
            u = tangent_field(dom, rng)
            ui = u(g.points()[inside.ravel()])
            unorm = float(np.max(np.linalg.norm(ui, axis=1)))
            ext = extend_P(u, atlas, g, report=False)
            worst_out = max(worst_out, float(np.max(np.abs(ext.values[:, ~inside]))) / unorm)
            worst_restrict = max(worst_restrict, float(np.max(np.abs(ext.values[:, inside].T - ui))))
            div = extend_Pdiv(u, atlas, g, report=False)
            worst_div = max(worst_div, div.max_divergence / unorm)
    detail = f"{count} tangent divergence-free fields on {g.n}^2"
    checks = [
        _check("extension", "P_vanishes_outside", worst_out, 1e-10, 4, detail, seconds=clk.seconds),
        _check("extension", "Pdiv_divergence", worst_div, 1e-6, 4, detail),
        _check("extension", "restriction_exact", worst_restrict, 0.0),
    ]
    try:
        extend_Pdiv(lambda x: dom.normal(x), atlas, g, report=False)
        raised = 0.0
    except PreconditionError:
        raised = 1.0
    checks.append(_check("extension", "Pdiv_rejects_net_flux", raised, 1.0, below=False))
    return checks


# -- biot-savart ------------------------------------------------------------------------


def rankine_profile_error(n: int, a: float = 0.5, extent: float = 2.5) -> float:
    """Max node error of the disk velocity of a centred uniform patch, relative to its peak speed."""
    g = build_grid(2, extent, n)
    dom = domain_disk(1.0, g)
    patch = VortexPatch(circle((0.0, 0.0), a), Profile.from_spec(2, 1.0), Profile.from_spec(2, 0.0))
    vel = velocity_from_vorticity(patch.vorticity(g, dom), dom, g)
    mask = dom.node_mask(g)
    exact = rankine_velocity(g.points()[mask.ravel()], a)
    err = np.linalg.norm(vel.values[:, mask].T - exact, axis=1)
    return float(np.max(err) / np.max(np.linalg.norm(exact, axis=1)))


def point_vortex_image_error(x0=(0.4, 0.2), core: float = 0.1, samples: int = 4000, seed: int = 0) -> float:
    dom = domain_disk(1.0)
    x0 = np.asarray(x0)
    pot = neumann_potential(lambda y: point_vortex_velocity(y, x0), dom)
    rng = stream(seed, "image-points")
    th = rng.uniform(0, 2 * np.pi, samples)
    rr = np.sqrt(rng.uniform(0, 1, samples))
    pts = np.stack([rr * np.cos(th), rr * np.sin(th)], -1)
    pts = pts[np.linalg.norm(pts - x0, axis=1) > core]
    v = point_vortex_velocity(pts, x0) - pot.grad(pts)
    exact = disk_point_vortex_velocity(pts, x0)
    return float(np.max(np.linalg.norm(v - exact, axis=1) / np.linalg.norm(exact, axis=1)))


def suite_biot_savart(fast: bool = False, seed: int = 0) -> list[Check]:
    checks = []
    n = 256 if fast else 512
    with _Clock() as clk:
        err = rankine_profile_error(n)
    checks.append(_check("biot-savart", "rankine_profile", err, 5.0 / n, 5, f"n={n}", seconds=clk.seconds))
    with _Clock() as clk:
        g = build_grid(2, 2.5, 128)
        dom = domain_disk(1.0, g)
        vel = neumann_correct(np.stack([np.ones(g.shape), np.zeros(g.shape)]), dom, g)
        err = float(np.max(np.abs(vel.values[:, dom.node_mask(g)])))
    checks.append(_check("biot-savart", "uniform_field_cancelled", err, 1e-8, 5, seconds=clk.seconds))
    with _Clock() as clk:
        err = point_vortex_image_error(seed=seed)
    checks.append(_check("biot-savart", "point_vortex_images", err, 1e-3, 5, "|x - x0| > 0.1", seconds=clk.seconds))
    with _Clock() as clk:
        g = build_grid(2, 2.5, 128)
        dom = domain_disk(1.0, g)
        patch = VortexPatch(QuadricLevelSet((0.2, -0.1), (0.4, 0.25)), Profile.from_spec(2, 1.0),
                            Profile.from_spec(2, 0.0))
        vel = velocity_from_vorticity(patch.vorticity(g, dom), dom, g)
        vn = float(np.max(np.abs(vel.boundary_normal_velocity(512))))
    checks.append(_check("biot-savart", "boundary_tangency", vn, 1e-8, seconds=clk.seconds))
    return checks


# -- patch ------------------------------------------------------------------------------


def suite_patch(fast: bool = False, seed: int = 0) -> list[Check]:
    from .patch import admissibility, cut_cell_identity_residual

    checks = []
    with _Clock() as clk:
        g = build_grid(2, 2.5, 64 if fast else 128)
        dom = domain_disk(1.0, g)
        patch = VortexPatch(QuadricLevelSet((0.1, 0.05), (0.45, 0.3)), Profile.from_spec(2, 1.0),
                            Profile.from_spec(2, 0.0))
        system = tangent_system_from_levelset(patch, dom, g)
        bp, nu = patch.levelset.boundary_samples(512)
        tp = system.max_normal_component(bp, nu)
        wp, wn = dom.boundary_samples(512)
        tw = system.max_normal_component(wp, wn)
    checks.append(_check("patch", "tangent_to_patch_boundary", tp, 1e-6, seconds=clk.seconds))
    checks.append(_check("patch", "tangent_to_domain_boundary", tw, 1e-6))
    with _Clock() as clk:
        mask = dom.node_mask(g)
        w1, s1 = admissibility(system, mask)
        w2, s2 = admissibility(system.scaled(3.0), mask)
        err = float(np.max(np.abs(w2[mask] * 3.0 - w1[mask]) / w1[mask]))
    checks.append(_check("patch", "admissibility_homogeneity", err, 1e-12, detail=f"sup {s1:.6g}",
                         seconds=clk.seconds))
    with _Clock() as clk:
        field = system.funcs[0]
        res = cut_cell_identity_residual(lambda x: field(x)[:, :2], patch.levelset, g)
        wsup = float(np.max(np.linalg.norm(system.fields[0], axis=0)))
        err = float(np.max(np.abs(res))) / wsup
    checks.append(_check("patch", "cut_cell_identity", err, 1e-4, seconds=clk.seconds))
    return checks


# -- dynamics ---------------------------------------------------------------------------


def rankine_steady(n: int = 512, t_end: float = 5.0, a: float = 0.5, markers: int = 1024,
                   dt_factor: float = 0.5, extent: float = 2.5) -> dict:
    """Centred uniform disk in the unit disk: radial marker drift and area drift."""
    g = build_grid(2, extent, n)
    dom = domain_disk(1.0, g)
    patch = VortexPatch(circle((0.0, 0.0), a), Profile.from_spec(2, 1.0), Profile.from_spec(2, 0.0))
    st = seed_particles(patch, dom, g, None, lattice=False, tube=0, wall=0, markers=markers)
    area0 = ring_area(st.ring)
    worst = [0.0]

    def sample(state):
        worst[0] = max(worst[0], float(np.max(np.abs(np.linalg.norm(state.ring, axis=1) - a))))

    res = integrate(st, ContourModel(1.0, 0.0, dom), g.h, t_end, dt_factor=dt_factor, domain=dom,
                    sample_every=1, sample=sample)
    return {"drift": worst[0] / a, "area": abs(ring_area(res.state.ring) - area0) / area0,
            "completed": res.completed, "steps": res.steps, "dt": res.dt}


def kirchhoff_phase(n: int = 512, a: float = 0.2, b: float = 0.1, revolutions: float = 1.0,
                    markers: int = 1024, dt_factor: float = 1.0, extent: float = 2.0) -> dict:
    g = build_grid(2, extent, n)
    patch = VortexPatch(QuadricLevelSet((0.0, 0.0), (a, b)), Profile.from_spec(2, 1.0), Profile.from_spec(2, 0.0))
    st = seed_particles(patch, None, g, None, lattice=False, tube=0, wall=0, markers=markers)
    expected = kirchhoff_rate(a, b)
    T = revolutions * 2 * np.pi / expected
    res = integrate(st, ContourModel(1.0), g.h, T, dt_factor=dt_factor, track_angle=True)
    rate = res.rotation_rate()
    return {"rate": rate, "expected": expected, "error": abs(rate - expected) / expected,
            "steps": res.steps, "completed": res.completed}


def ellipse_disk_setup(n: int = 64, extent: float = 2.5):
    """Off-centre uniform ellipse in the unit disk with the planar tangent system, particles on the grid."""
    g = build_grid(2, extent, n)
    dom = domain_disk(1.0, g)
    patch = VortexPatch(QuadricLevelSet((0.1, 0.05), (0.45, 0.3)), Profile.from_spec(2, 1.0),
                        Profile.from_spec(2, 0.0))
    system = tangent_system_from_levelset(patch, dom, g)
    st = seed_particles(patch, dom, g, system)
    return g, dom, patch, system, st


def cross_invariant_order(dts=(0.1, 0.05, 0.025), T: float = 1.0, n: int = 64, far: float = 0.05) -> dict:
    """Cross-invariant drift at ``T`` for each step size, over particles starting ``far`` from the patch edge."""
    g, dom, patch, system, st0 = ellipse_disk_setup(n)
    model = ContourModel(1.0, 0.0, dom)
    idx = np.flatnonzero((st0.kind == LATTICE) & (np.abs(patch.levelset.distance_proxy(st0.x0)) > far))
    drifts, last = [], None
    for dt in dts:
        res = integrate(st0, model, g.h, T, dt=dt, domain=dom)
        if not res.completed:
            raise PreconditionError(f"order run with dt={dt} stopped: {res.error}")
        drifts.append(cross_invariant_drift(res.state, idx))
        last = res.state
    ratios = [drifts[i] / drifts[i + 1] for i in range(len(drifts) - 1)]
    omega_err = float(np.max(np.abs(last.omega - last.omega0)))
    wall = last.select(WALL)
    nrm = dom.normal(last.x[wall])
    wn = float(np.max(np.abs(np.einsum("pnc,pc->pn", last.w[wall][:, :, :2], nrm))))
    nv = omega_dot_n(last, dom)
    ls = levelset_boundary_norm(last, system.s)
    return {"drifts": drifts, "ratios": ratios, "omega_err": omega_err, "wall_normal": wn,
            "omega_n_direct": float(np.max(np.abs(nv.direct))), "omega_n_formula": float(np.max(np.abs(nv.formula))),
            "levelset_gap": ls.relative_gap, "levelset_norm_gap": abs(ls.formula - ls.direct) / ls.direct}


def axisym_bound_run(t_end: float = 10.0, nr: int = 48, nz: int = 96, sample_every: int = 2,
                     dt_factor: float = 0.9) -> dict:
    mg = MeridianGrid(2.0, 2.0, nr, nz)
    flow = AxisymFlow(mg)
    st = ring_state(mg, (1.0, -0.5), 0.3, 1.0)
    bound = axisym_bound(st, mg)
    area = mg.dr * mg.dz / 4
    dt = flow.cfl_dt(st, dt_factor)
    steps = max(1, math.ceil(t_end / dt))
    dt = t_end / steps
    sups = [flow.diagnostics(st, area).omega_sup]
    for k in range(steps):
        st = flow.advance(st, dt)
        if (k + 1) % sample_every == 0:
            sups.append(flow.diagnostics(st, area).omega_sup)
    return {"bound": bound, "omega_sup": sups, "samples": len(sups), "max_over_bound": max(sups) / bound}


def _static_ratio(cfg) -> float:
    if cfg.mode == "axisym":
        mg = MeridianGrid(cfg.domain.rmax, cfg.domain.zmax, cfg.grid.nr, cfg.grid.nz)
        st = ring_state(mg, tuple(cfg.patch.center), cfg.patch.radius, cfg.patch.xi)
        return float(AxisymFlow(mg).diagnostics(st, mg.dr * mg.dz / 4).ratio)
    su = planar_setup(cfg)
    return float(diagnostics(su.state, su.ctx).ratio)


def log_ratio_census(fast: bool = False) -> dict:
    """Log-estimate ratio of every built-in scenario at its base resolution and one refinement.

    The 3-D refinement costs a few minutes on one core, so ``fast`` repeats
    the base resolution there.
    """
    diag = lambda n: {"grid": {"diagnostics_n": n, "particles_n": 64}}
    desk_hi = {} if fast else {"grid": {"n": 64, "diagnostics_n": 64, "particles_n": 32},
                               "system": {"blend_cells": 6.0}}
    plan = {
        "rankine-disk": (diag(64), diag(128)),
        "kirchhoff-free": (diag(64), diag(128)),
        "perturbed-ellipse": (diag(64), diag(128)),
        "axisym-ring": ({"grid": {"nr": 24, "nz": 48}}, {"grid": {"nr": 48, "nz": 96}}),
        "desk-3d": ({}, desk_hi),
    }
    return {name: [_static_ratio(builtin(name, **ov)) for ov in pair] for name, pair in plan.items()}


def suite_dynamics(fast: bool = False, seed: int = 0) -> list[Check]:
    checks = []
    with _Clock() as clk:
        n, t_end = (128, 1.0) if fast else (512, 5.0)
        rk = rankine_steady(n, t_end)
    detail = f"n={n}, t in [0, {t_end:g}], {rk['steps']} steps"
    checks.append(_check("dynamics", "rankine_marker_drift", rk["drift"], 1e-3, 6, detail, seconds=clk.seconds))
    checks.append(_check("dynamics", "rankine_area_drift", rk["area"], 5e-3, 6, detail))

    with _Clock() as clk:
        n = 128 if fast else 512
        kp = kirchhoff_phase(n)
    checks.append(_check("dynamics", "kirchhoff_rate", kp["error"], 0.02, 7,
                         f"n={n}, one revolution, rate {kp['rate']:.10g} vs {kp['expected']:.10g}", seconds=clk.seconds))

    with _Clock() as clk:
        dts = (0.1, 0.05) if fast else (0.1, 0.05, 0.025)
        co = cross_invariant_order(dts)
    detail = "drifts " + ", ".join(f"{d:.3e}" for d in co["drifts"])
    checks.append(_check("dynamics", "cross_invariant_dt_halving", min(co["ratios"]), 8.0, 8, detail, below=False,
                         seconds=clk.seconds))
    checks.append(_check("dynamics", "planar_vorticity_constant", co["omega_err"], 1e-12, 8))
    checks.append(_check("dynamics", "omega_n_planar_zero", max(co["omega_n_direct"], co["omega_n_formula"]), 0.0, 9))
    checks.append(_check("dynamics", "wall_tangency_planar", co["wall_normal"], 1e-4))
    checks.append(_check("dynamics", "levelset_routes_agree", co["levelset_norm_gap"], 0.10))

    with _Clock() as clk:
        desk = run_desk(desk_setup(), 4 if fast else 10)
    checks.append(_check("dynamics", "omega_n_desk_3d", desk.max_discrepancy, 0.05, 9,
                         f"{len(desk.t)} steps at 32^3", seconds=clk.seconds))

    with _Clock() as clk:
        ax = axisym_bound_run(4.0 if fast else 10.0)
    checks.append(_check("dynamics", "axisym_vorticity_bound", ax["max_over_bound"], 1.0, 11,
                         f"{ax['samples']} samples, bound {ax['bound']:.6g}", seconds=clk.seconds))

    with _Clock() as clk:
        census = log_ratio_census(fast)
        worst = max(max(v) for v in census.values())
        growth = max(v[1] / v[0] - 1.0 for v in census.values())
    detail = "; ".join(f"{k} {v[0]:.4g}->{v[1]:.4g}" for k, v in census.items())
    checks.append(_check("dynamics", "log_ratio_bounded", worst, LOG_RATIO_BOUND, 10, detail, seconds=clk.seconds))
    checks.append(_check("dynamics", "log_ratio_refinement_growth", growth, 0.5, 10, detail))
    return checks


_RUNNERS = {
    "lp": suite_lp,
    "multiplier": suite_multiplier,
    "extension": suite_extension,
    "biot-savart": suite_biot_savart,
    "patch": suite_patch,
    "dynamics": suite_dynamics,
}


def run_suite(name: str, fast: bool = False, seed: int = 0) -> list[Check]:
    if name not in _RUNNERS:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return _RUNNERS[name](fast=fast, seed=seed)


ACCEPTANCE_SECONDS = 1800.0

CRITERIA = {
    1: "Bony decomposition identity and runtime",
    2: "Littlewood-Paley reconstruction",
    3: "indicator multiplier stable under refinement",
    4: "extension operators: support and divergence",
    5: "Biot-Savart: Rankine, uniform field, images",
    6: "Rankine patch steady in the disk",
    7: "Kirchhoff ellipse rotation rate",
    8: "cross-invariant convergence, planar vorticity constant",
    9: "normal vorticity: 3-D desk run and planar zero",
    10: "log-estimate ratio bounded under refinement",
    11: "axisymmetric vorticity bound",
    12: "full battery wall time",
}


def criteria_summary(checks: list[Check], seconds: float) -> list[tuple[int, bool, str]]:
    """One ``(criterion, passed, line)`` per acceptance criterion, from full-mode checks and total time."""
    out = []
    for k, title in CRITERIA.items():
        if k == 12:
            ok = seconds < ACCEPTANCE_SECONDS
            parts = [f"{seconds:.1f}s < {ACCEPTANCE_SECONDS:g}s"]
        else:
            mine = [c for c in checks if c.criterion == k]
            ok = bool(mine) and all(c.passed for c in mine)
            parts = [f"{c.name}={c.value:.4g} ({'<=' if c.below else '>='}{c.threshold:g})"
                     for c in mine] or ["no checks ran"]
        out.append((k, ok, f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}: " + ", ".join(parts)))
    return out
