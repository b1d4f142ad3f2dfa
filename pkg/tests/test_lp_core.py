import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from patchlab.errors import ConfigurationError, PreconditionError
from patchlab.fieldops import build_grid, random_bandlimited
from patchlab.lp_core import (
    besov_norm,
    besov_norm_direct,
    besov_report,
    block_of,
    bony_split,
    dyadic_blocks,
    filter_bank,
    holder_norm,
    holder_report,
    indicator_multiplier_ratio,
    paraproduct,
    remainder,
    restricted_holder_norm,
)

G = build_grid(2, 2 * np.pi, 64)
seeds = st.integers(0, 2**31 - 1)


def _step(t):
    # independent scalar copy of the smooth step used by the filter bank
    def g(u):
        return math.exp(-1.0 / u) if u > 0 else 0.0

    a, b = g(2.0 - t), g(t - 1.0)
    return a / (a + b)


def _weight(n, k):
    if n == -1:
        return _step(k)
    return _step(k / 2 ** (n + 1)) - _step(k / 2**n)


def test_constant_lives_in_low_block():
    blocks = dyadic_blocks(np.full(G.shape, 1.7), G).blocks
    np.testing.assert_allclose(blocks[0], 1.7, atol=1e-14)
    assert np.max(np.abs(blocks[1:])) < 1e-14


@pytest.mark.parametrize("k", [1, 3, 6, 11, 24])
def test_single_mode_block_weights(k):
    x = G.mesh()[0]
    f = np.cos(k * x)
    levels = filter_bank(G).levels
    for n in levels:
        got = np.max(np.abs(block_of(f, G, n)))
        assert got == pytest.approx(abs(_weight(n, k)), abs=1e-12)
    main = max(levels, key=lambda n: abs(_weight(n, k)))
    for n in levels:
        if abs(n - main) >= 2:
            assert np.max(np.abs(block_of(f, G, n))) < 1e-13


@given(seeds, st.floats(1.0, 20.0))
def test_reconstruction(seed, kmax):
    f = random_bandlimited(G, kmax, np.random.default_rng(seed))
    f += 0.1 * np.random.default_rng(seed + 1).standard_normal(G.shape)
    assert np.max(np.abs(dyadic_blocks(f, G).reconstruct() - f)) <= 1e-10 * np.max(np.abs(f))


@given(seeds)
def test_quasi_orthogonality(seed):
    f = np.random.default_rng(seed).standard_normal(G.shape)
    for a in filter_bank(G).levels:
        fa = block_of(f, G, a)
        for b in filter_bank(G).levels:
            if abs(a - b) >= 2:
                assert np.max(np.abs(block_of(fa, G, b))) < 1e-12


def test_holder_zero_and_homogeneous(rng):
    assert holder_norm(np.zeros(G.shape), G, 0.5) == 0.0
    f = random_bandlimited(G, 10, rng)
    assert holder_norm(-3.0 * f, G, 0.5) == pytest.approx(3.0 * holder_norm(f, G, 0.5), rel=1e-13)


@given(seeds, st.floats(0.05, 0.95))
def test_holder_subadditive(seed, r):
    rng = np.random.default_rng(seed)
    f, g = random_bandlimited(G, 12, rng), rng.standard_normal(G.shape)
    assert holder_norm(f + g, G, r) <= holder_norm(f, G, r) + holder_norm(g, G, r) + 1e-12


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_holder_of_dyadic_cosine(m):
    r = 0.5
    f = np.cos(2**m * G.mesh()[0])
    expected = max(2.0 ** (n * r) * abs(_weight(n, 2**m)) for n in filter_bank(G).levels)
    assert holder_norm(f, G, r) == pytest.approx(expected, rel=1e-12)


def test_integer_index_flagged():
    assert holder_report(np.ones(G.shape), G, 1.0).integer_index
    assert not holder_report(np.ones(G.shape), G, 0.5).integer_index


def test_besov_inf_inf_is_holder(rng):
    f = random_bandlimited(G, 15, rng)
    assert besov_norm(f, G, 0.3) == holder_norm(f, G, 0.3)
    assert besov_norm(np.zeros(G.shape), G, 0.3, 1, 2) == 0.0


@given(seeds, st.sampled_from([1, 2, np.inf]), st.sampled_from([1, 2, np.inf]), st.floats(-1.5, 1.5))
def test_besov_two_routes(seed, p, q, s):
    f = random_bandlimited(G, 20, np.random.default_rng(seed))
    a, b = besov_norm(f, G, s, p, q), besov_norm_direct(f, G, s, p, q)
    assert abs(a - b) <= 1e-10 * b


def test_besov_index_validation():
    with pytest.raises(ConfigurationError):
        besov_norm(np.ones(G.shape), G, 0.5, 3, 2)
    with pytest.raises(ConfigurationError):
        besov_norm(np.ones(G.shape), G, 2.5)


def test_besov_stable_under_refinement():
    for seed in range(5):
        vals = []
        for n in (128, 256):
            g = build_grid(2, 2 * np.pi, n)
            vals.append(besov_norm(random_bandlimited(g, 20, np.random.default_rng(seed)), g, 0.5, 1, 2))
        assert abs(vals[1] - vals[0]) <= 0.2 * vals[0]


def test_csv_report_columns(rng):
    rep = besov_report(random_bandlimited(G, 8, rng), G, 0.5)
    lines = rep.to_csv().splitlines()
    assert lines[0] == "level,block_norm,weighted"
    assert len(lines) == len(rep.levels) + 1


@given(seeds)
def test_bony_identity(seed):
    rng = np.random.default_rng(seed)
    a, b = random_bandlimited(G, 25, rng), rng.standard_normal(G.shape)
    tab, tba, rem = bony_split(a, b, G)
    assert np.max(np.abs(tab + tba + rem - a * b)) <= 1e-10 * np.max(np.abs(a * b))
    np.testing.assert_allclose(tab, paraproduct(a, b, G), atol=1e-12)
    np.testing.assert_allclose(rem, remainder(a, b, G), atol=1e-12)


def test_paraproduct_of_zero(rng):
    b = rng.standard_normal(G.shape)
    z = np.zeros(G.shape)
    assert np.max(np.abs(paraproduct(z, b, G))) == 0.0
    assert np.max(np.abs(remainder(z, b, G))) == 0.0


def test_paraproduct_constant_census_stable():
    r = 0.5
    census = []
    for n in (128, 256):
        g = build_grid(2, 2 * np.pi, n)
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            a, b = random_bandlimited(g, 30, rng), random_bandlimited(g, 30, rng)
            ratio = holder_norm(paraproduct(a, b, g), g, r) / (np.max(np.abs(a)) * holder_norm(b, g, r))
            worst = max(worst, ratio)
        census.append(worst)
    assert np.isfinite(census).all()
    assert abs(census[1] - census[0]) <= 0.2 * census[0]


def test_restricted_holder_of_linear_function():
    x, y = G.mesh()
    mask = x * x + y * y < 4.0
    val = restricted_holder_norm(3 * x - 4 * y, G, mask, 1.0, np.random.default_rng(0))
    sup = np.max(np.abs(3 * x - 4 * y)[mask])
    assert val == pytest.approx(sup + 5.0, rel=1e-12)


def test_multiplier_whole_box_and_inner_support():
    rep = indicator_multiplier_ratio(np.ones(G.shape), G, 0.5, 4, np.random.default_rng(1))
    np.testing.assert_allclose(rep.ratios, 1.0, atol=1e-12)
    x, y = G.mesh()
    chi = (x * x + y * y < 2.5**2).astype(float)
    r2 = x * x + y * y
    bump = np.where(r2 < 1, np.exp(-1 / np.maximum(1 - r2, 1e-300)), 0.0)
    rep = indicator_multiplier_ratio(chi, G, 0.5, fields=[bump])
    assert rep.max_ratio <= 1 + 1e-6


def test_multiplier_rejects_bad_indicators():
    with pytest.raises(PreconditionError):
        indicator_multiplier_ratio(np.full(G.shape, 0.5), G)
    chi = np.zeros(G.shape)
    chi[0, :] = 1
    with pytest.raises(PreconditionError):
        indicator_multiplier_ratio(chi, G)
