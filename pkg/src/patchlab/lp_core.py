"""Littlewood-Paley blocks, Hölder/Besov norms and Bony's paraproduct calculus.

The filter bank is built from a smooth radial step ``theta`` (1 below 1, 0
above 2). With kappa the base frequency,

    chi(xi)   = theta(|xi| / kappa)
    phi_n(xi) = theta(|xi| / (kappa 2^(n+1))) - theta(|xi| / (kappa 2^n)),

and the top block is defined as the residual ``1 - chi - sum phi_n``, so the
discrete partition of unity holds to rounding on every lattice frequency.
The number of levels is chosen so that the residual coincides with the
genuine annulus profile on the lattice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, PreconditionError
from .fieldops import Grid, fft_workers, irfft, random_bandlimited, rfft


def _g(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def theta(t):
    """Smooth non-increasing step: 1 for t <= 1, 0 for t >= 2."""
    t = np.asarray(t, dtype=float)
    a = _g(2.0 - t)
    b = _g(t - 1.0)
    return a / (a + b)


def theta_prime(t):
    t = np.asarray(t, dtype=float)
    a = _g(2.0 - t)
    b = _g(t - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        da = np.where(t < 2, -a / np.where(t < 2, (2.0 - t) ** 2, 1.0), 0.0)
        db = np.where(t > 1, b / np.where(t > 1, (t - 1.0) ** 2, 1.0), 0.0)
    return (da * b - a * db) / (a + b) ** 2


@dataclass(frozen=True, eq=False)
class DyadicFilterBank:
    """Radial masks on the ``rfftn`` lattice, one per level -1..nmax."""

    grid: Grid
    kappa: float
    masks: np.ndarray  # (nlevels, *grid.rshape)

    @property
    def nmax(self) -> int:
        return self.masks.shape[0] - 2

    @property
    def levels(self) -> np.ndarray:
        return np.arange(-1, self.nmax + 1)

    def weights(self, s: float) -> np.ndarray:
        return 2.0 ** (self.levels * s)


def level_count(grid: Grid, kappa: float = 1.0) -> int:
    """Smallest ``nmax`` with ``kappa 2^(nmax+1)`` above the largest lattice |xi|."""
    kcorner = np.sqrt(grid.dim) * grid.nyquist
    return max(0, int(np.ceil(np.log2(kcorner / kappa))) - 1)


@lru_cache(maxsize=16)
def filter_bank(grid: Grid, kappa: float = 1.0) -> DyadicFilterBank:
    k = grid.kmag(real=True)
    nmax = level_count(grid, kappa)
    masks = np.empty((nmax + 2,) + grid.rshape)
    masks[0] = theta(k / kappa)
    acc = masks[0].copy()
    for n in range(nmax):
        masks[n + 1] = theta(k / (kappa * 2.0 ** (n + 1))) - theta(k / (kappa * 2.0**n))
        acc += masks[n + 1]
    masks[nmax + 1] = 1.0 - acc
    masks.setflags(write=False)
    return DyadicFilterBank(grid, kappa, masks)


@dataclass
class LPSpectrum:
    """Blocks ``Δ_{-1} f, Δ_0 f, ..., Δ_nmax f`` stacked on the first axis."""

    grid: Grid
    blocks: np.ndarray
    levels: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.blocks.sum(axis=0)

    def low(self, q: int) -> np.ndarray:
        """``S_q f = sum_{m <= q-1} Δ_m f`` (zero when q <= -1)."""
        stop = q + 1  # index of level q-1 is q, keep levels -1..q-1
        if stop <= 0:
            return np.zeros_like(self.blocks[0])
        return self.blocks[:stop].sum(axis=0)


def dyadic_blocks(f: np.ndarray, grid: Grid, bank: DyadicFilterBank | None = None) -> LPSpectrum:
    bank = bank or filter_bank(grid)
    fh = rfft(np.asarray(f, dtype=float), grid)
    extra = fh.ndim - grid.dim
    masks = bank.masks.reshape((bank.masks.shape[0],) + (1,) * extra + grid.rshape)
    blocks = irfft(masks * fh[None], grid)
    spec = LPSpectrum(grid, blocks, bank.levels)
    if __debug__:
        scale = max(float(np.max(np.abs(f))), 1e-300)
        err = float(np.max(np.abs(blocks.sum(axis=0) - f))) / scale
        assert err <= 1e-10, f"dyadic reconstruction error {err:.3e}"
    return spec


def block_of(f: np.ndarray, grid: Grid, n: int, bank: DyadicFilterBank | None = None) -> np.ndarray:
    bank = bank or filter_bank(grid)
    fh = rfft(np.asarray(f, dtype=float), grid)
    return irfft(fh * bank.masks[n + 1], grid)


# -- norms ------------------------------------------------------------------

_SUPPORTED = {1.0, 2.0, np.inf}


def _parse_index(v, name):
    if isinstance(v, str):
        v = v.strip().lower()
        v = np.inf if v in ("inf", "infinity", "oo") else float(v)
    v = float(v)
    if v not in _SUPPORTED:
        raise ConfigurationError(f"Besov index {name}={v} unsupported; choose 1, 2 or inf")
    return v


def lp_norm(g: np.ndarray, grid: Grid, p: float) -> float:
    """Grid-measure weighted discrete L^p norm; vector fields use the pointwise Euclidean norm."""
    g = np.asarray(g, dtype=float)
    if g.ndim > grid.dim:
        g = np.sqrt(np.sum(g.reshape((-1,) + grid.shape) ** 2, axis=0))
    a = np.abs(g)
    if p == np.inf:
        return float(a.max())
    if p == 1.0:
        return float(a.sum() * grid.cell_volume)
    return float(np.sqrt(np.sum(a * a) * grid.cell_volume))


def _lq(values: np.ndarray, q: float) -> float:
    if q == np.inf:
        return float(np.max(values))
    if q == 1.0:
        return float(np.sum(values))
    return float(np.sqrt(np.sum(values * values)))


@dataclass
class NormReport:
    """Per-level block norms, weighted values and their l^q aggregate."""

    s: float
    p: float
    q: float
    levels: np.ndarray
    block_norms: np.ndarray
    weighted: np.ndarray
    norm: float
    integer_index: bool = False

    def rows(self):
        for lv, b, w in zip(self.levels, self.block_norms, self.weighted):
            yield int(lv), float(b), float(w)

    def to_csv(self) -> str:
        lines = ["level,block_norm,weighted"]
        lines += [f"{lv},{b!r},{w!r}" for lv, b, w in self.rows()]
        return "\n".join(lines) + "\n"


def besov_report(f: np.ndarray, grid: Grid, s: float, p=np.inf, q=np.inf) -> NormReport:
    p = _parse_index(p, "p")
    q = _parse_index(q, "q")
    s = float(s)
    if not -2.0 < s < 2.0:
        raise ConfigurationError(f"smoothness index s={s} outside (-2, 2)")
    spec = dyadic_blocks(f, grid)
    bn = np.array([lp_norm(b, grid, p) for b in spec.blocks])
    w = 2.0 ** (spec.levels * s) * bn
    return NormReport(s, p, q, spec.levels, bn, w, _lq(w, q), integer_index=float(s).is_integer())


def besov_norm(f: np.ndarray, grid: Grid, s: float, p=np.inf, q=np.inf) -> float:
    return besov_report(f, grid, s, p, q).norm


def holder_report(f: np.ndarray, grid: Grid, r: float) -> NormReport:
    """Dyadic C^r_* norm ``sup_n 2^{nr} ||Δ_n f||_inf`` (levels from -1)."""
    return besov_report(f, grid, r, np.inf, np.inf)


def holder_norm(f: np.ndarray, grid: Grid, r: float) -> float:
    return holder_report(f, grid, r).norm


def besov_norm_direct(f: np.ndarray, grid: Grid, s: float, p=np.inf, q=np.inf, kappa: float = 1.0) -> float:
    """Second route to the Besov norm.

    Uses the full complex FFT and rebuilds each annulus mask from scratch as
    ``1 - theta(|xi|/(kappa 2^n))`` minus the next level's complement, without
    touching the cached filter bank.
    """
    p = _parse_index(p, "p")
    q = _parse_index(q, "q")
    axes = tuple(range(f.ndim - grid.dim, f.ndim))
    F = sfft.fftn(f, axes=axes, workers=fft_workers())
    k = grid.kmag(real=False)
    nmax = level_count(grid, kappa)
    vals = []
    for n in range(-1, nmax + 1):
        upper = np.ones_like(k) if n == nmax else theta(k / (kappa * 2.0 ** (n + 1)))
        lower = np.zeros_like(k) if n == -1 else theta(k / (kappa * 2.0**n))
        blk = sfft.ifftn(F * (upper - lower), axes=axes, workers=fft_workers()).real
        vals.append(2.0 ** (n * s) * lp_norm(blk, grid, p))
    return _lq(np.array(vals), q)


# -- paraproducts -----------------------------------------------------------


def _check_same(a, b):
    if np.shape(a)[-1] != np.shape(b)[-1]:
        raise PreconditionError("fields live on different grids")


def paraproduct(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """``T_a b = sum_q S_{q-1} a Δ_q b`` with ``S_{q-1} = sum_{m <= q-2} Δ_m``."""
    _check_same(a, b)
    A = dyadic_blocks(a, grid).blocks
    B = dyadic_blocks(b, grid).blocks
    low = np.cumsum(A, axis=0)  # low[i] = sum of blocks with index <= i
    out = np.zeros(np.broadcast_shapes(A.shape[1:], B.shape[1:]))
    for i in range(2, B.shape[0]):
        out += low[i - 2] * B[i]
    return out


def remainder(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """``R(a, b) = sum_{|q - q'| <= 1} Δ_q a Δ_q' b``."""
    _check_same(a, b)
    A = dyadic_blocks(a, grid).blocks
    B = dyadic_blocks(b, grid).blocks
    L = A.shape[0]
    out = np.zeros(np.broadcast_shapes(A.shape[1:], B.shape[1:]))
    for i in range(L):
        near = B[max(i - 1, 0) : min(i + 2, L)].sum(axis=0)
        out += A[i] * near
    return out


def bony_split(a: np.ndarray, b: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(T_a b, T_b a, R(a, b))`` computed from one pair of block decompositions."""
    A = dyadic_blocks(a, grid).blocks
    B = dyadic_blocks(b, grid).blocks
    L = A.shape[0]
    shape = np.broadcast_shapes(A.shape[1:], B.shape[1:])
    lowA = np.cumsum(A, axis=0)
    lowB = np.cumsum(B, axis=0)
    tab = np.zeros(shape)
    tba = np.zeros(shape)
    rem = np.zeros(shape)
    for i in range(L):
        if i >= 2:
            tab += lowA[i - 2] * B[i]
            tba += lowB[i - 2] * A[i]
        rem += A[i] * B[max(i - 1, 0) : min(i + 2, L)].sum(axis=0)
    return tab, tba, rem


# -- Hölder seminorm on point pairs -----------------------------------------


def pair_holder_seminorm(values: np.ndarray, points: np.ndarray, r: float, pairs: np.ndarray) -> float:
    """``max |f(x) - f(y)| / |x - y|^r`` over the given index pairs."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    i, j = pairs[:, 0], pairs[:, 1]
    dist = np.linalg.norm(points[i] - points[j], axis=1)
    ok = dist > 0
    diff = np.linalg.norm(values[i] - values[j], axis=1)
    if not np.any(ok):
        return 0.0
    return float(np.max(diff[ok] / dist[ok] ** r))


def restricted_holder_norm(f: np.ndarray, grid: Grid, mask: np.ndarray, r: float,
                           rng: np.random.Generator, npairs: int = 10_000) -> float:
    """``sup|f| + [f]_r`` over grid nodes in ``mask``.

    The seminorm uses the standard |x - y|^r denominator over seeded random
    node pairs plus every axis-neighbour pair inside the mask.
    """
    comps = np.asarray(f, dtype=float).reshape((-1,) + grid.shape)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return 0.0
    vals = comps.reshape(comps.shape[0], -1)[:, idx].T
    pts = grid.points()[idx]
    lookup = -np.ones(mask.size, dtype=np.int64)
    lookup[idx] = np.arange(idx.size)
    pairs = [rng.integers(0, idx.size, size=(npairs, 2))]
    multi = np.array(np.unravel_index(idx, grid.shape))
    for a in range(grid.dim):
        nb = multi.copy()
        nb[a] += 1
        inside = nb[a] < grid.n
        flat = np.ravel_multi_index(nb[:, inside], grid.shape)
        other = lookup[flat]
        good = other >= 0
        pairs.append(np.stack([np.arange(idx.size)[inside][good], other[good]], axis=1))
    pairs = np.concatenate(pairs)
    sup = float(np.max(np.linalg.norm(vals, axis=1)))
    return sup + pair_holder_seminorm(vals, pts, r, pairs)


# -- characteristic-function multiplier --------------------------------------


@dataclass
class MultiplierReport:
    """Outcome of ``indicator_multiplier_ratio``.

    ``ratios`` holds ||χ f|| / ||f|| in B^s_{1,2} per corpus member.
    ``low_part`` and ``high_part`` are the same ratio for ``T_χ f + R(χ, f)``
    and ``T_f χ`` separately, the two pieces the boundedness argument treats
    differently.
    """

    s: float
    ratios: np.ndarray
    low_part: np.ndarray
    high_part: np.ndarray
    max_ratio: float = field(init=False)

    def __post_init__(self):
        self.max_ratio = float(np.max(self.ratios)) if len(self.ratios) else float("nan")


def indicator_multiplier_ratio(indicator: np.ndarray, grid: Grid, s: float = 0.5, m: int = 50,
                               rng: np.random.Generator | None = None, kmax: float = 12.0,
                               fields: list[np.ndarray] | None = None) -> MultiplierReport:
    """Measure ``||χ_P f||_{B^s_{1,2}} / ||f||_{B^s_{1,2}}`` over a random corpus.

    ``indicator`` is the sampled characteristic function of P. The whole box
    (χ identically 1) is accepted; any other set must stay off the box edge.
    """
    chi = np.asarray(indicator, dtype=float)
    if not np.all((chi == 0) | (chi == 1)):
        raise PreconditionError("indicator must take values 0 and 1 only")
    if not np.all(chi == 1):
        edge = np.zeros(grid.shape, dtype=bool)
        for a in range(grid.dim):
            sl = [slice(None)] * grid.dim
            sl[a] = 0
            edge[tuple(sl)] = True
            sl[a] = -1
            edge[tuple(sl)] = True
        if np.any(chi[edge] != 0):
            raise PreconditionError("patch touches the box boundary")
    if fields is None:
        rng = rng if rng is not None else np.random.default_rng(0)
        fields = [random_bandlimited(grid, kmax, rng) for _ in range(m)]
    ratios, lows, highs = [], [], []
    for f in fields:
        nf = besov_norm(f, grid, s, 1, 2)
        f = f / nf
        tcf, tfc, rem = bony_split(chi, f, grid)
        ratios.append(besov_norm(chi * f, grid, s, 1, 2))
        lows.append(besov_norm(tcf + rem, grid, s, 1, 2))
        highs.append(besov_norm(tfc, grid, s, 1, 2))
    return MultiplierReport(float(s), np.array(ratios), np.array(lows), np.array(highs))
