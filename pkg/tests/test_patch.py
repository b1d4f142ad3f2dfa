import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchlab.dynamics import swirling_ellipsoid
from patchlab.errors import AdmissibilityError, ConfigurationError, ConstructionError, PreconditionError
from patchlab.fieldops import build_grid, domain_ball, domain_disk
from patchlab.lp_core import holder_norm
from patchlab.patch import (
    Profile,
    QuadricLevelSet,
    VortexPatch,
    admissibility,
    box_cutoff,
    circle,
    conormal_derivative,
    conormal_report,
    conormal_spectral,
    cut_cell_identity_residual,
    inverse_admissibility,
    patch_normal_field,
    system_from_callables,
    tangent_system_from_levelset,
)


def _const(vec):
    v = np.asarray(vec, dtype=float)
    return lambda x: np.broadcast_to(v, (len(x), 3))


def _uniform_patch(levelset, inner=1.0, outer=0.0):
    dim = levelset.dim
    return VortexPatch(levelset, Profile.from_spec(dim, inner), Profile.from_spec(dim, outer))


@pytest.fixture(scope="module")
def disk128():
    g = build_grid(2, 2.5, 128)
    return g, domain_disk(1.0, g)


# -- admissibility ------------------------------------------------------------------


def test_orthonormal_pair_has_unit_inverse_admissibility():
    g = build_grid(2, 2.5, 32)
    system = system_from_callables(g, [_const([1, 0, 0]), _const([0, 1, 0])], 0.5)
    winv, sup = admissibility(system)
    assert np.allclose(winv, 1.0)
    assert sup == pytest.approx(1.0)


@given(st.floats(0.05, 20.0))
def test_inverse_admissibility_scales_inversely(lam):
    g = build_grid(2, 2.5, 16)
    rot = lambda x: np.stack([-x[:, 1], x[:, 0] + 0.3, 0 * x[:, 0]], -1)
    system = system_from_callables(g, [rot, _const([0, 0, 1])], 0.5)
    w1, _ = admissibility(system)
    w2, _ = admissibility(system.scaled(lam))
    assert np.allclose(w2 * lam, w1, rtol=1e-12)


def test_parallel_pair_is_not_admissible():
    g = build_grid(2, 2.5, 16)
    system = system_from_callables(g, [_const([1, 0, 0]), _const([2, 0, 0])], 0.5)
    with pytest.raises(AdmissibilityError):
        admissibility(system)


def test_rotation_and_vertical_pair_at_radius():
    g = build_grid(2, 2.5, 16)
    rot = lambda x: np.stack([-x[:, 1], x[:, 0], 0 * x[:, 0]], -1)
    system = system_from_callables(g, [rot, _const([0, 0, 1])], 0.5)
    for a in (0.25, 0.5, 1.0):
        th = np.linspace(0, 2 * np.pi, 17)
        pts = a * np.stack([np.cos(th), np.sin(th)], -1)
        W = np.moveaxis(system.evaluate(pts), 1, -1)
        assert np.allclose(inverse_admissibility(W), a ** -0.5, rtol=1e-12)


def test_too_few_fields_rejected():
    g = build_grid(2, 2.5, 16)
    with pytest.raises(ConfigurationError):
        system_from_callables(g, [_const([1, 0, 0])], 0.5)


# -- tangent systems from a level set ----------------------------------------------


def test_circle_system_is_tangent(disk128):
    g, D = disk128
    patch = _uniform_patch(circle((0.0, 0.0), 0.5))
    system = tangent_system_from_levelset(patch, D, g)
    pts, nrm = patch.levelset.boundary_samples(256)
    assert system.max_normal_component(pts, nrm) < 1e-12
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    wall = np.stack([np.cos(th), np.sin(th)], -1)
    assert system.max_normal_component(wall, wall) < 1e-12
    # the first field is the level-set rotation 2(x2, -x1, 0) near the patch boundary
    w = system.evaluate(pts)[0]
    assert np.allclose(w, 2 * np.stack([pts[:, 1], -pts[:, 0], 0 * pts[:, 0]], -1), atol=1e-12)
    _, sup = admissibility(system)
    assert np.isfinite(sup)


def test_sphere_system_finite_near_boundary():
    g = build_grid(3, 3.0, 32)
    D = domain_ball(1.0, g)
    patch = _uniform_patch(QuadricLevelSet((0.0, 0.0, 0.0), (0.4, 0.4, 0.4)), [0.0, 0.0, 1.0], [0.0, 0.0, 0.0])
    system = tangent_system_from_levelset(patch, D, g)
    pts, nrm = patch.levelset.boundary_samples(200)
    assert system.max_normal_component(pts, nrm) < 1e-12
    W = np.moveaxis(system.evaluate(pts * 1.01), 1, -1)
    winv = inverse_admissibility(W)
    assert np.all(np.isfinite(winv)) and winv.max() < 10


# -- patch normal field -------------------------------------------------------------


def test_normal_field_on_centred_circle():
    g = build_grid(2, 2.5, 64)
    D = domain_disk(1.0, g)
    patch = _uniform_patch(circle((0.0, 0.0), 0.5))
    nt = patch_normal_field(patch, D, 0.1)
    for rad in (0.5, 1.0):
        th = np.linspace(0, 2 * np.pi, 50)
        x = rad * np.stack([np.cos(th), np.sin(th)], -1)
        assert np.allclose(nt(x), x / rad, atol=1e-12)


def test_normal_field_on_ellipse():
    g = build_grid(2, 2.5, 64)
    D = domain_disk(1.0, g)
    ls = QuadricLevelSet((0.1, -0.05), (0.4, 0.25))
    nt = patch_normal_field(_uniform_patch(ls), D, 0.1)
    pts, nrm = ls.boundary_samples(300)
    got = nt(pts)
    assert np.max(np.abs(got - nrm)) < 1e-6
    assert np.allclose(np.linalg.norm(got, axis=1), 1.0, atol=1e-12)


# -- conormal derivative ------------------------------------------------------------


def test_conormal_of_zero_field(disk128):
    g, D = disk128
    patch = _uniform_patch(circle((0.1, 0.0), 0.4))
    out = conormal_derivative(np.zeros((1, 3) + g.shape), patch, g, D)[0]
    assert np.max(np.abs(out)) == 0.0


def test_conormal_without_jump_matches_classical(disk128):
    g, D = disk128
    x, y = g.mesh()
    r2 = x * x + y * y
    bump = np.where(r2 < 0.64, np.exp(-1 / np.maximum(0.64 - r2, 1e-30) + 1 / 0.64), 0.0)
    w = np.stack([bump * (1 + y), 0.5 * bump * x, 0 * x])[None]
    prof = [[1.0, [0, 0]], [0.5, [1, 1]]]
    patch = VortexPatch(QuadricLevelSet((0.1, 0.0), (0.4, 0.3)), Profile.from_spec(2, prof), Profile.from_spec(2, prof))
    got = conormal_derivative(w, patch, g, D)[0]
    ref = conormal_spectral(w, patch.inner.on_grid(g) * box_cutoff(g, D), g)[0]
    assert np.max(np.abs(got - ref)) <= 1e-4 * np.max(np.abs(ref))


def test_azimuthal_field_on_uniform_disk_is_small(disk128):
    g, D = disk128
    x, y = g.mesh()
    patch = _uniform_patch(circle((0.0, 0.0), 0.5))
    w = np.stack([-y, x, 0 * x])[None]
    con = conormal_derivative(w, patch, g, D)[0]
    jump = conormal_spectral(w, patch.vorticity(g, D), g)[0]
    # naive spectral differentiation of the sharp product is O(1); the paraproduct route is not
    assert holder_norm(con, g, -0.5) < 0.05 * holder_norm(jump, g, -0.5)


def test_conormal_ratio_stable_under_refinement():
    rng = np.random.default_rng(7)
    specs = []
    for _ in range(4):
        c = tuple(rng.uniform(-0.2, 0.2, 2))
        ax = tuple(rng.uniform(0.2, 0.4, 2))
        specs.append((c, ax, [[1.0, [0, 0]], [rng.normal(), [1, 0]]], 0.3 * rng.normal()))
    worst = {}
    for n in (64, 128):
        g = build_grid(2, 2.5, n)
        D = domain_disk(1.0, g)
        vals = []
        for c, ax, inner, outer in specs:
            p = VortexPatch(QuadricLevelSet(c, ax), Profile.from_spec(2, inner), Profile.from_spec(2, outer))
            rep = conormal_report(tangent_system_from_levelset(p, D, g), p, g, D)
            vals.append(rep.ratio.max())
        worst[n] = max(vals)
    assert abs(worst[128] / worst[64] - 1) <= 0.3


# -- cut-cell identity --------------------------------------------------------------


def test_cut_cell_identity_for_tangent_field():
    g = build_grid(2, 2.5, 64)
    ls = QuadricLevelSet((0.1, 0.05), (0.4, 0.3))

    def w(x):
        gr = ls.grad(x)
        return np.stack([gr[:, 1] * (1 + x[:, 0]), -gr[:, 0] * (1 + x[:, 0])], -1)

    res = cut_cell_identity_residual(w, ls, g)
    th = np.linspace(0, 2 * np.pi, 400)
    sup = np.max(np.linalg.norm(w(np.stack([np.cos(th), np.sin(th)], -1)), axis=1))
    assert np.max(np.abs(res)) <= 1e-4 * sup


def test_cut_cell_identity_is_2d_only():
    g = build_grid(3, 2.5, 8)
    ls = QuadricLevelSet((0.0, 0.0, 0.0), (0.4, 0.4, 0.4))
    with pytest.raises(ConfigurationError):
        cut_cell_identity_residual(lambda x: x, ls, g)


# -- patch construction -------------------------------------------------------------


def test_swirling_ellipsoid_normal_component_continuous():
    patch = swirling_ellipsoid()
    assert patch.normal_jump(2000) < 1e-6
    patch.check_divergence_free()


def test_nonsolenoidal_profile_rejected():
    ls = QuadricLevelSet((0.0, 0.0, 0.0), (0.4, 0.3, 0.35))
    prof = Profile.from_spec(3, [[[1.0, [1, 0, 0]]], 0.0, 0.0])
    patch = VortexPatch(ls, prof, Profile.from_spec(3, [0.0, 0.0, 0.0]))
    with pytest.raises(PreconditionError):
        patch.check_divergence_free()


def test_patch_rejects_bad_exponent_and_touching_wall():
    ls = circle((0.0, 0.0), 0.5)
    with pytest.raises(ConfigurationError):
        VortexPatch(ls, Profile.from_spec(2, 1.0), Profile.from_spec(2, 0.0), r=1.0)
    g = build_grid(2, 2.5, 64)
    near_wall = _uniform_patch(circle((0.45, 0.0), 0.5))
    with pytest.raises(ConstructionError):
        near_wall.check_interior(domain_disk(1.0, g), 0.1)


def test_indicator_area_converges():
    ls = QuadricLevelSet((0.1, 0.0), (0.4, 0.3))
    patch = _uniform_patch(ls)
    errs = []
    for n in (64, 256):
        g = build_grid(2, 2.5, n)
        errs.append(abs(patch.indicator(g).sum() * g.h**2 - ls.area()) / ls.area())
    assert errs[1] < errs[0] and errs[1] < 5e-3
