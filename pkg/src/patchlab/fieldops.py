"""Uniform periodic grids, sampled fields, round domains and differential operators.

Fields are plain numpy arrays. A scalar field has shape ``grid.shape``; a
vector field has the component axis first, ``(ncomp, *grid.shape)``. Point
sets used for off-grid evaluation have the coordinate axis last, ``(P, dim)``.
"""
from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, PreconditionError

SNAPSHOT_MAGIC = b"PLABFLD1"


def fft_workers() -> int:
    """Thread count for FFTs, read from PATCHLAB_THREADS (default 1)."""
    raw = os.environ.get("PATCHLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"PATCHLAB_THREADS must be an integer, got {raw!r}") from exc
    return max(n, 1)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Cubic periodic box ``[-extent/2, extent/2)^dim`` with ``n`` nodes per axis.

    Node ``j`` on every axis sits at ``(j - n/2) * h``, so the origin is a node.
    """

    dim: int
    extent: float
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"grid dimension must be 2 or 3, got {self.dim}")
        if not _is_pow2(int(self.n)) or self.n < 8:
            raise ConfigurationError(f"points per axis must be a power of two >= 8, got {self.n}")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise ConfigurationError(f"grid extent must be positive, got {self.extent}")

    @property
    def h(self) -> float:
        return self.extent / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.h

    @property
    def lower(self) -> float:
        return -0.5 * self.extent

    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcastable coordinate arrays, one per axis."""
        out = []
        for a in range(self.dim):
            s = [1] * self.dim
            s[a] = self.n
            out.append(self.axis.reshape(s))
        return tuple(out)

    def mesh(self) -> np.ndarray:
        """Dense node coordinates with shape ``(dim, *shape)``."""
        return np.stack(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    def points(self) -> np.ndarray:
        """Node coordinates as a ``(n**dim, dim)`` array in C order."""
        return self.mesh().reshape(self.dim, -1).T

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable angular wavenumbers for the full complex FFT."""
        k = sfft.fftfreq(self.n, d=self.h) * 2 * np.pi
        out = []
        for a in range(self.dim):
            s = [1] * self.dim
            s[a] = self.n
            out.append(k.reshape(s))
        return tuple(out)

    def rwavenumbers(self) -> tuple[np.ndarray, ...]:
        """Broadcastable angular wavenumbers matching ``rfftn`` output."""
        k = sfft.fftfreq(self.n, d=self.h) * 2 * np.pi
        kr = sfft.rfftfreq(self.n, d=self.h) * 2 * np.pi
        out = []
        for a in range(self.dim):
            s = [1] * self.dim
            kk = kr if a == self.dim - 1 else k
            s[a] = kk.size
            out.append(kk.reshape(s))
        return tuple(out)

    @property
    def rshape(self) -> tuple[int, ...]:
        return (self.n,) * (self.dim - 1) + (self.n // 2 + 1,)

    def kmag(self, real: bool = True) -> np.ndarray:
        ks = self.rwavenumbers() if real else self.wavenumbers()
        return np.sqrt(sum(k * k for k in ks))

    @property
    def nyquist(self) -> float:
        return np.pi / self.h


def build_grid(dim: int, extent: float, n: int) -> Grid:
    return Grid(int(dim), float(extent), int(n))


# -- sampled fields ---------------------------------------------------------


@dataclass
class Field:
    """Sampled field plus the metadata written to snapshot files."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape == self.grid.shape:
            pass
        elif v.ndim == self.grid.dim + 1 and v.shape[1:] == self.grid.shape:
            pass
        else:
            raise PreconditionError(f"array shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise PreconditionError("field contains non-finite values")
        self.values = v

    @property
    def ncomp(self) -> int:
        return 1 if self.values.shape == self.grid.shape else self.values.shape[0]

    def components(self) -> np.ndarray:
        return self.values.reshape((self.ncomp,) + self.grid.shape)


def write_snapshot(path, values: np.ndarray, grid: Grid, time: float = 0.0) -> None:
    """Write a field as a little-endian binary snapshot.

    Layout: 8-byte magic ``PLABFLD1``; uint32 dim; uint32 ncomp; dim x uint32
    points per axis; dim x float64 extent per axis; float64 time; then the
    float64 payload in C order with the component index slowest.
    """
    fld = Field(grid, values, time)
    head = struct.pack("<8sII", SNAPSHOT_MAGIC, grid.dim, fld.ncomp)
    head += struct.pack(f"<{grid.dim}I", *grid.shape)
    head += struct.pack(f"<{grid.dim}d", *([grid.extent] * grid.dim))
    head += struct.pack("<d", float(time))
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(fld.components(), dtype="<f8").tobytes())


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 16 or raw[:8] != SNAPSHOT_MAGIC:
        raise ConfigurationError(f"{path}: not a patchlab field snapshot")
    dim, ncomp = struct.unpack_from("<II", raw, 8)
    if dim not in (2, 3):
        raise ConfigurationError(f"{path}: bad dimension {dim}")
    off = 16
    ns = struct.unpack_from(f"<{dim}I", raw, off)
    off += 4 * dim
    ext = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    (time,) = struct.unpack_from("<d", raw, off)
    off += 8
    if len(set(ns)) != 1 or len(set(ext)) != 1:
        raise ConfigurationError(f"{path}: only cubic grids are supported")
    grid = build_grid(dim, ext[0], ns[0])
    count = ncomp * int(np.prod(grid.shape))
    if len(raw) - off != 8 * count:
        raise ConfigurationError(f"{path}: payload size does not match header")
    data = np.frombuffer(raw, dtype="<f8", count=count, offset=off).astype(float)
    data = data.reshape((ncomp,) + grid.shape)
    if ncomp == 1:
        data = data[0]
    return Field(grid, data, time)


def export_slice_csv(path, values: np.ndarray, grid: Grid, axis: int = 0, through=None) -> None:
    """Write the 1-D line along ``axis`` through node index ``through`` (default: centre)."""
    comps = np.asarray(values).reshape((-1,) + grid.shape)
    idx = [grid.n // 2 if through is None else through] * grid.dim
    idx[axis] = slice(None)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x"] + [f"c{c}" for c in range(comps.shape[0])])
        for j, x in enumerate(grid.axis):
            row = [repr(float(x))]
            for c in range(comps.shape[0]):
                idx_j = list(idx)
                idx_j[axis] = j
                row.append(repr(float(comps[c][tuple(idx_j)])))
            wr.writerow(row)


# -- round domains ----------------------------------------------------------


@dataclass(frozen=True)
class RoundDomain:
    """Disk (dim 2) or ball (dim 3) of radius R centred at the origin.

    ``delta`` is the smooth defining function (R^2 - |x|^2)/(2R); it is
    positive inside, vanishes on the boundary and its gradient there is the
    inward unit normal, so the outward normal is ``-grad delta``.
    """

    dim: int
    radius: float

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError("domain dimension must be 2 or 3")
        if not self.radius > 0:
            raise ConfigurationError(f"domain radius must be positive, got {self.radius}")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def measure(self) -> float:
        R = self.radius
        return np.pi * R * R if self.dim == 2 else 4.0 / 3.0 * np.pi * R**3

    def delta(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.radius**2 - np.sum(x * x, axis=-1)) / (2 * self.radius)

    def grad_delta(self, x) -> np.ndarray:
        return -np.asarray(x, dtype=float) / self.radius

    def normal(self, x) -> np.ndarray:
        """Outward normal ``-grad delta`` (unit length on the boundary)."""
        return -self.grad_delta(x)

    def distance(self, x) -> np.ndarray:
        """Exact signed distance to the boundary, positive inside."""
        return self.radius - np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def contains(self, x, closed: bool = True) -> np.ndarray:
        d = self.delta(x)
        return d >= 0 if closed else d > 0

    def boundary_samples(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """``m`` boundary points and their outward normals."""
        if self.dim == 2:
            th = 2 * np.pi * np.arange(m) / m
            nrm = np.stack([np.cos(th), np.sin(th)], axis=-1)
        else:
            nrm = fibonacci_sphere(m)
        return self.radius * nrm, nrm

    def node_mask(self, grid: Grid, closed: bool = True) -> np.ndarray:
        return self.contains(np.moveaxis(grid.mesh(), 0, -1), closed=closed)

    def check_fits(self, grid: Grid, margin_cells: float = 4.0) -> None:
        if grid.dim != self.dim:
            raise ConfigurationError("domain and grid dimensions differ")
        room = 0.5 * grid.extent - self.radius
        if room < margin_cells * grid.h:
            raise ConfigurationError(
                f"domain of radius {self.radius} leaves {room / grid.h:.2f} cells to the box edge;"
                f" at least {margin_cells:g} are needed to avoid spectral wrap-around"
            )


def domain_disk(R: float, grid: Grid | None = None) -> RoundDomain:
    dom = RoundDomain(2, float(R))
    if grid is not None:
        dom.check_fits(grid)
    return dom


def domain_ball(R: float, grid: Grid | None = None) -> RoundDomain:
    dom = RoundDomain(3, float(R))
    if grid is not None:
        dom.check_fits(grid)
    return dom


def fibonacci_sphere(m: int) -> np.ndarray:
    """Nearly uniform unit vectors on the sphere (golden-angle spiral)."""
    i = np.arange(m) + 0.5
    z = 1 - 2 * i / m
    rho = np.sqrt(np.maximum(1 - z * z, 0.0))
    ang = np.pi * (1 + 5**0.5) * i
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), z], axis=-1)


# -- spectral operators -----------------------------------------------------


def _spatial_axes(grid: Grid, f: np.ndarray) -> tuple[int, ...]:
    return tuple(range(f.ndim - grid.dim, f.ndim))


def rfft(f: np.ndarray, grid: Grid) -> np.ndarray:
    return sfft.rfftn(f, axes=_spatial_axes(grid, f), workers=fft_workers())


def irfft(fh: np.ndarray, grid: Grid) -> np.ndarray:
    axes = tuple(range(fh.ndim - grid.dim, fh.ndim))
    return sfft.irfftn(fh, s=grid.shape, axes=axes, workers=fft_workers())


@lru_cache(maxsize=32)
def _deriv_symbols(grid: Grid) -> tuple[np.ndarray, ...]:
    # odd derivative symbols vanish on the Nyquist plane so real fields stay real
    out = []
    for a, k in enumerate(grid.rwavenumbers()):
        k = np.array(k, dtype=float)
        if a < grid.dim - 1:
            sl = [slice(None)] * grid.dim
            sl[a] = grid.n // 2
            k[tuple(sl)] = 0.0
        else:
            k[..., -1] = 0.0
        out.append(1j * k)
    return tuple(out)


def differentiate(f: np.ndarray, grid: Grid, axis: int, order: int = 1) -> np.ndarray:
    """Spectral ``∂^order f / ∂x_axis^order`` of a periodic field (leading axes are batch)."""
    fh = rfft(f, grid)
    if order % 2 == 1:
        sym = _deriv_symbols(grid)[axis] ** order
    else:
        sym = (1j * grid.rwavenumbers()[axis]) ** order
    return irfft(fh * sym, grid)


def gradient(f: np.ndarray, grid: Grid) -> np.ndarray:
    fh = rfft(f, grid)
    syms = _deriv_symbols(grid)
    return np.stack([irfft(fh * s, grid) for s in syms], axis=-grid.dim - 1)


def jacobian(v: np.ndarray, grid: Grid) -> np.ndarray:
    """``J[i, j] = ∂_j v_i`` for a vector field ``v`` with shape ``(c, *shape)``."""
    vh = rfft(v, grid)
    syms = _deriv_symbols(grid)
    return np.stack([irfft(vh * s, grid) for s in syms], axis=1)


def divergence(v: np.ndarray, grid: Grid) -> np.ndarray:
    vh = rfft(v[: grid.dim], grid)
    syms = _deriv_symbols(grid)
    acc = sum(vh[a] * syms[a] for a in range(grid.dim))
    return irfft(acc, grid)


def curl(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Curl of a vector field.

    In 2-D a planar field (2 components) returns the scalar ∂1 v2 - ∂2 v1, and
    a 3-component z-invariant field returns its full 3-component curl.
    """
    syms = _deriv_symbols(grid)
    vh = rfft(v, grid)
    if grid.dim == 2:
        d1, d2 = syms
        if v.shape[0] == 2:
            return irfft(d1 * vh[1] - d2 * vh[0], grid)
        return np.stack(
            [irfft(d2 * vh[2], grid), irfft(-d1 * vh[2], grid), irfft(d1 * vh[1] - d2 * vh[0], grid)]
        )
    d1, d2, d3 = syms
    return np.stack(
        [
            irfft(d2 * vh[2] - d3 * vh[1], grid),
            irfft(d3 * vh[0] - d1 * vh[2], grid),
            irfft(d1 * vh[1] - d2 * vh[0], grid),
        ]
    )


def laplacian(f: np.ndarray, grid: Grid) -> np.ndarray:
    return irfft(-rfft(f, grid) * grid.kmag() ** 2, grid)


def fd_derivative(f: np.ndarray, grid: Grid, axis: int, mask: np.ndarray | None = None) -> np.ndarray:
    """Fourth-order finite difference of ``f`` along ``axis`` using only nodes in ``mask``.

    Central 5-point stencils are used where all points are available, forward
    or backward one-sided 5-point stencils otherwise; nodes where neither
    fits get NaN.
    """
    f = np.asarray(f, dtype=float)
    if mask is None:
        mask = np.ones(grid.shape, dtype=bool)
    ax = f.ndim - grid.dim + axis
    h = grid.h
    out = np.full(f.shape, np.nan)

    def sh(a, s):
        return np.roll(a, -s, axis=ax)

    def shm(s):
        return np.roll(mask, -s, axis=axis)

    idx = np.arange(grid.n)
    shape = [1] * grid.dim
    shape[axis] = grid.n
    idx = idx.reshape(shape)

    def inside(s):
        # shifted node must exist without wrapping across the periodic seam
        ok = (idx + s >= 0) & (idx + s < grid.n)
        return np.broadcast_to(ok, grid.shape) & shm(s)

    central = (sh(f, -2) - 8 * sh(f, -1) + 8 * sh(f, 1) - sh(f, 2)) / (12 * h)
    fwd = (-25 * f + 48 * sh(f, 1) - 36 * sh(f, 2) + 16 * sh(f, 3) - 3 * sh(f, 4)) / (12 * h)
    bwd = (25 * f - 48 * sh(f, -1) + 36 * sh(f, -2) - 16 * sh(f, -3) + 3 * sh(f, -4)) / (12 * h)
    c_ok = mask & inside(-2) & inside(-1) & inside(1) & inside(2)
    f_ok = mask & inside(1) & inside(2) & inside(3) & inside(4) & ~c_ok
    b_ok = mask & inside(-1) & inside(-2) & inside(-3) & inside(-4) & ~c_ok & ~f_ok
    out = np.where(c_ok, central, out)
    out = np.where(f_ok, fwd, out)
    out = np.where(b_ok, bwd, out)
    return out


# -- interpolation ----------------------------------------------------------


def _trig_factors(grid: Grid, x: np.ndarray) -> np.ndarray:
    """``exp(i k (x - x0))`` per lattice wavenumber; the Nyquist column uses cos."""
    k = sfft.fftfreq(grid.n, d=grid.h) * 2 * np.pi
    ph = (np.asarray(x)[:, None] - grid.axis[0]) * k[None, :]
    e = np.exp(1j * ph)
    e[:, grid.n // 2] = np.cos(ph[:, grid.n // 2])
    return e


def spectral_eval(f: np.ndarray, grid: Grid, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

    Exact for band-limited data. ``f`` may carry leading component axes; the
    result has shape ``(*leading, P)``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    lead = f.shape[: f.ndim - grid.dim]
    F = sfft.fftn(f, axes=_spatial_axes(grid, f), workers=fft_workers()) / np.prod(grid.shape)
    F = F.reshape((-1,) + grid.shape)
    P = points.shape[0]
    out = np.empty((F.shape[0], P))
    for s in range(0, P, chunk):
        pts = points[s : s + chunk]
        E = [_trig_factors(grid, pts[:, a]) for a in range(grid.dim)]
        if grid.dim == 2:
            tmp = np.einsum("px,cxy->cpy", E[0], F)
            out[:, s : s + chunk] = np.einsum("cpy,py->cp", tmp, E[1]).real
        else:
            tmp = np.einsum("px,cxyz->cpyz", E[0], F)
            tmp = np.einsum("cpyz,py->cpz", tmp, E[1])
            out[:, s : s + chunk] = np.einsum("cpz,pz->cp", tmp, E[2]).real
    return out.reshape(lead + (P,))


def random_bandlimited(grid: Grid, kmax: float, rng: np.random.Generator, ncomp: int | None = None,
                       decay: float = 1.0) -> np.ndarray:
    """Random real trigonometric polynomial with modes ``|m| <= kmax`` (units of 2π/extent).

    Coefficients depend only on ``kmax`` and the generator, not on the grid
    size, so the same continuous field can be sampled at several resolutions.
    """
    kint = int(np.floor(kmax))
    rng_axis = np.arange(-kint, kint + 1)
    mesh = np.stack(np.meshgrid(*([rng_axis] * grid.dim), indexing="ij"), -1).reshape(-1, grid.dim)
    norm = np.linalg.norm(mesh, axis=1)
    # one representative of each +-m pair: first nonzero coordinate positive
    first = np.array([next((v for v in row if v != 0), 0) for row in mesh])
    keep = (norm <= kmax) & (first > 0)
    modes = mesh[keep]
    nc = 1 if ncomp is None else ncomp
    amp = (1.0 + norm[keep]) ** (-decay)
    a = rng.standard_normal((nc, len(modes))) * amp
    b = rng.standard_normal((nc, len(modes))) * amp
    c0 = rng.standard_normal(nc)
    if np.any(np.abs(modes) >= grid.n // 2):
        raise ConfigurationError("requested modes reach the grid Nyquist frequency")
    spec = np.zeros((nc,) + grid.shape, dtype=complex)
    N = np.prod(grid.shape)
    idx = tuple(modes.T % grid.n)
    nidx = tuple((-modes.T) % grid.n)
    # node positions start at -extent/2, so phase-shift each mode accordingly
    shift = np.exp(-1j * 2 * np.pi / grid.extent * (modes @ np.full(grid.dim, grid.axis[0])))
    for c in range(nc):
        coef = 0.5 * (a[c] - 1j * b[c]) * shift * N
        spec[c][idx] += coef
        spec[c][nidx] += np.conj(coef)
        spec[c][(0,) * grid.dim] += c0[c] * N
    out = sfft.ifftn(spec, axes=tuple(range(1, grid.dim + 1)), workers=fft_workers()).real
    return out[0] if ncomp is None else out
