import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchlab.errors import ConfigurationError, ConstructionError, PreconditionError
from patchlab.extension import build_atlas, extend_P, extend_Pc, extend_Pdiv
from patchlab.fieldops import build_grid, domain_ball, domain_disk
from patchlab.verify import tangent_field

DISK = domain_disk(1.0)
ATLAS = build_atlas(DISK)
G = build_grid(2, 4.0, 64)
INSIDE = DISK.node_mask(G)


def test_projections_land_on_circle(rng):
    for i in range(ATLAS.nchart):
        x = ATLAS.centers[i] + 0.8 * ATLAS.radius * rng.uniform(-1, 1, (50, 2)) / np.sqrt(2)
        for j in range(2):
            y = ATLAS.project(i, j, x)
            np.testing.assert_allclose(np.linalg.norm(y, axis=1), 1.0, atol=1e-8)


def test_partition_of_unity_inside():
    psi, _ = ATLAS.partition(G.points()[INSIDE.ravel()])
    np.testing.assert_allclose(psi.sum(axis=0), 1.0, atol=1e-12)


def test_oversized_charts_rejected():
    with pytest.raises(ConstructionError):
        build_atlas(DISK, charts=4, radius=1.5)
    with pytest.raises(ConfigurationError):
        build_atlas(DISK, charts=2)


def test_ball_atlas_projects_to_sphere(rng):
    atlas = build_atlas(domain_ball(1.0))
    i = 17
    x = atlas.centers[i] + 0.5 * atlas.radius * rng.standard_normal((40, 3)) / 3
    for j in range(3):
        np.testing.assert_allclose(np.linalg.norm(atlas.project(i, j, x), axis=1), 1.0, atol=1e-8)


@given(st.integers(0, 2**31 - 1))
def test_tangent_field_vanishes_outside(seed):
    u = tangent_field(DISK, np.random.default_rng(seed))
    ext = extend_P(u, ATLAS, G, report=False)
    unorm = np.max(np.abs(ext.values[:, INSIDE]))
    assert np.max(np.abs(ext.values[:, ~INSIDE])) <= 1e-10 * unorm


@pytest.mark.parametrize("op", [extend_P, extend_Pc, extend_Pdiv])
def test_restriction_and_support(op, rng):
    u = tangent_field(DISK, rng)
    ext = op(u, ATLAS, G, report=False)
    np.testing.assert_array_equal(ext.values[:, INSIDE].T, u(G.points()[INSIDE.ravel()]))
    far = np.linalg.norm(G.points(), axis=1).reshape(G.shape) >= ATLAS.outer_radius
    assert np.all(ext.values[:, far] == 0.0)


def test_normal_field_exterior_bounded():
    ext = extend_P(lambda x: x.copy(), ATLAS, G)
    assert np.max(np.linalg.norm(ext.values[:, ~INSIDE], axis=0)) <= 1.0 + 1e-12
    assert ext.report.sup_ratio <= 1.0 + 1e-12


def test_constant_field_kept_inside():
    c = np.array([0.3, -1.2])
    ext = extend_Pc(lambda x: np.tile(c, (len(x), 1)), ATLAS, G, report=False)
    np.testing.assert_array_equal(ext.values[:, INSIDE].T, np.tile(c, (INSIDE.sum(), 1)))


def test_rotation_lipschitz_ratio_finite():
    rep = extend_Pc(lambda x: np.stack([-x[:, 1], x[:, 0]], -1), ATLAS, G).report
    assert np.isfinite(rep.holder_ratio) and rep.holder_ratio < 5


def test_zero_mean_flux_removed():
    # u = e1 has u.n = cos(theta): zero net flux, nonzero exterior correction
    const = lambda x: np.tile([1.0, 0.0], (len(x), 1))
    p = extend_P(const, ATLAS, G, report=False)
    d = extend_Pdiv(const, ATLAS, G, report=False)
    assert d.max_divergence <= 1e-8
    assert np.max(np.abs(d.values - p.values)) > 1e-3


def test_net_flux_rejected():
    with pytest.raises(PreconditionError):
        extend_Pdiv(lambda x: x.copy(), ATLAS, G, report=False)


def test_non_finite_input_rejected():
    with pytest.raises(PreconditionError):
        with np.errstate(invalid="ignore"):
            extend_Pdiv(lambda x: x / np.linalg.norm(x, axis=1, keepdims=True), ATLAS, G, report=False)


def test_divergence_census_stable_under_refinement():
    census = []
    for n in (64, 128):
        g = build_grid(2, 4.0, n)
        rng = np.random.default_rng(3)
        worst = np.zeros(2)
        for _ in range(5):
            A = rng.standard_normal((2, 2))
            u = lambda x, A=A: x @ A.T + np.stack([np.sin(2 * x[:, 1]), np.cos(3 * x[:, 0])], -1)
            rep = extend_P(u, ATLAS, g).report
            worst = np.maximum(worst, [rep.div_sup_ratio, rep.holder_ratio])
        census.append(worst)
    assert np.all(np.abs(census[1] - census[0]) <= 0.3 * census[0])


def test_box_too_small():
    with pytest.raises(ConfigurationError):
        extend_P(lambda x: x, ATLAS, build_grid(2, 2.2, 64))
