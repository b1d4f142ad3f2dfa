import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchlab.errors import ConfigurationError
from patchlab.fieldops import (
    build_grid,
    curl,
    differentiate,
    divergence,
    domain_ball,
    domain_disk,
    fd_derivative,
    gradient,
    random_bandlimited,
    read_snapshot,
    spectral_eval,
    write_snapshot,
)


def test_grid_sizes():
    g = build_grid(2, 2 * np.pi, 256)
    assert g.shape == (256, 256)
    assert g.h == 2 * np.pi / 256
    assert build_grid(3, 2 * np.pi, 32).shape == (32, 32, 32)


@pytest.mark.parametrize("n", [100, 4, 0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ConfigurationError):
        build_grid(2, 2 * np.pi, n)


def test_origin_is_a_node():
    g = build_grid(2, 3.0, 64)
    assert np.any(np.all(g.points() == 0.0, axis=1))


def test_disk_defining_function():
    d = domain_disk(1.0)
    assert d.delta(np.zeros(2)) == pytest.approx(0.5)
    x = np.array([[0.6, 0.8]])
    assert abs(d.delta(x)[0]) < 1e-15
    np.testing.assert_allclose(d.normal(x), x)


@pytest.mark.parametrize("dom", [domain_disk(1.3), domain_ball(0.7)])
def test_unit_gradient_on_boundary(dom):
    pts, nrm = dom.boundary_samples(512)
    np.testing.assert_allclose(np.linalg.norm(dom.grad_delta(pts), axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(dom.normal(pts), nrm, atol=1e-12)


def test_domain_must_fit_box():
    with pytest.raises(ConfigurationError):
        domain_disk(1.0, build_grid(2, 2.0, 64))


def test_sine_derivative():
    g = build_grid(2, 2 * np.pi, 64)
    x, y = g.mesh()
    np.testing.assert_allclose(differentiate(np.sin(x), g, 0), np.cos(x), atol=1e-12)
    assert np.max(np.abs(differentiate(np.full(g.shape, 3.0), g, 1))) < 1e-12


@given(st.integers(0, 2**31 - 1))
def test_vector_identities(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(3, 2 * np.pi, 16)
    A = random_bandlimited(g, 4, rng, ncomp=3)
    f = random_bandlimited(g, 4, rng)
    assert np.max(np.abs(divergence(curl(A, g), g))) < 1e-10
    assert np.max(np.abs(curl(gradient(f, g), g))) < 1e-10


@given(st.integers(0, 2**31 - 1))
def test_spectral_eval_matches_nodes_and_band_limit(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(2, 2.0, 32)
    f = random_bandlimited(g, 6, rng)
    idx = rng.integers(0, g.points().shape[0], 20)
    np.testing.assert_allclose(spectral_eval(f, g, g.points()[idx]), f.ravel()[idx], atol=1e-12)
    # the same continuous field sampled on a finer grid
    fine = build_grid(2, 2.0, 64)
    ff = random_bandlimited(fine, 6, np.random.default_rng(seed))
    pts = rng.uniform(-1, 1, (10, 2))
    np.testing.assert_allclose(spectral_eval(f, g, pts), spectral_eval(ff, fine, pts), atol=1e-10)


def test_fourth_order_differences():
    errs = []
    for n in (64, 128):
        g = build_grid(2, 2.0, n)
        x, y = g.mesh()
        mask = x * x + y * y < 0.64
        d = fd_derivative(np.exp(x) * np.cos(y), g, 0, mask)
        errs.append(np.nanmax(np.abs(d - np.exp(x) * np.cos(y))[mask]))
    assert errs[0] / errs[1] > 12


def test_snapshot_roundtrip(tmp_path, rng):
    g = build_grid(3, 2.5, 16)
    v = rng.standard_normal((3,) + g.shape)
    write_snapshot(tmp_path / "v.bin", v, g, 0.25)
    f = read_snapshot(tmp_path / "v.bin")
    assert f.grid == g and f.time == 0.25 and f.ncomp == 3
    np.testing.assert_array_equal(f.values, v)


def test_snapshot_rejects_garbage(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"not a field")
    with pytest.raises(ConfigurationError):
        read_snapshot(p)
