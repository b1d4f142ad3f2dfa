"""Velocity from vorticity: free-space Biot–Savart, the Λ multiplier, and the
harmonic correction that makes the velocity tangent to a round boundary.

Two free-space solvers are provided. ``mode="periodic"`` is the plain
spectral symbol ``i k × ω̂ / |k|²`` on the box torus. ``mode="free"`` convolves
with the fundamental solution truncated at the box diagonal on a 3x padded
lattice, which reproduces the whole-space convolution for data supported in
the box (no periodic images).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy import ndimage
from scipy.interpolate import RectBivariateSpline
from scipy.special import j0, j1

from .errors import ConfigurationError, PreconditionError
from .fieldops import (
    Grid,
    RoundDomain,
    _deriv_symbols,
    fft_workers,
    irfft,
    jacobian,
    rfft,
)
from .harmonics import HarmonicPolynomial, SphereFit, harmonic_basis, monomials
from .lp_core import filter_bank, pair_holder_seminorm, restricted_holder_norm

PAD = 3
FLUX_TOL = 1e-3
SPLINE_ORDER = 5


# -- Λ multiplier ------------------------------------------------------------


def lambda_symbol(grid: Grid, kappa: float = 1.0) -> np.ndarray:
    """``λ(ξ) = (χ(ξ) + |ξ|²)^{1/2}`` on the rfft lattice, χ the level -1 mask."""
    chi = filter_bank(grid, kappa).masks[0]
    return np.sqrt(chi + grid.kmag() ** 2)


def lambda_apply(f: np.ndarray, grid: Grid, sigma: float, kappa: float = 1.0) -> np.ndarray:
    """Multiply the spectrum of ``f`` by ``λ(ξ)^σ``."""
    if sigma == 0:
        return np.array(f, dtype=float, copy=True)
    return irfft(rfft(f, grid) * lambda_symbol(grid, kappa) ** sigma, grid)


# -- free-space Biot–Savart --------------------------------------------------


def _check_support(omega: np.ndarray, grid: Grid, margin: int = 4) -> None:
    comps = omega.reshape((-1,) + grid.shape)
    scale = max(float(np.max(np.abs(comps))), 1e-300)
    edge = np.zeros(grid.shape, dtype=bool)
    for a in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[a] = slice(0, margin)
        edge[tuple(sl)] = True
        sl[a] = slice(grid.n - margin, None)
        edge[tuple(sl)] = True
    if np.max(np.abs(comps[:, edge])) > 1e-12 * scale:
        raise PreconditionError(f"vorticity must vanish within {margin} cells of the box edge")


@lru_cache(maxsize=8)
def _truncated_kernel(grid: Grid) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    """Fourier transform of the Green function cut off at the box diagonal.

    Returned on the rfft lattice of the padded box together with its
    wavenumbers (Nyquist planes zeroed, as for derivatives).
    """
    npad = PAD * grid.n
    L = grid.extent
    k = sfft.fftfreq(npad, d=grid.h) * 2 * np.pi
    kr = sfft.rfftfreq(npad, d=grid.h) * 2 * np.pi
    ks = []
    for a in range(grid.dim):
        s = [1] * grid.dim
        kk = (kr if a == grid.dim - 1 else k).copy()
        s[a] = kk.size
        ks.append(kk.reshape(s))
    kmag = np.sqrt(sum(kk * kk for kk in ks))
    if grid.dim == 2:
        rho = np.sqrt(2.0) * L
        with np.errstate(divide="ignore", invalid="ignore"):
            G = (1.0 - j0(kmag * rho)) / kmag**2 - rho * np.log(rho) * j1(kmag * rho) / kmag
        G[(0,) * grid.dim] = rho**2 / 4 - rho**2 * np.log(rho) / 2
    else:
        rho = np.sqrt(3.0) * L
        with np.errstate(divide="ignore", invalid="ignore"):
            G = (1.0 - np.cos(kmag * rho)) / kmag**2
        G[(0,) * grid.dim] = rho**2 / 2
    dks = []
    for a, kk in enumerate(ks):
        kk = kk.copy()
        if npad % 2 == 0:
            if a < grid.dim - 1:
                sl = [slice(None)] * grid.dim
                sl[a] = npad // 2
                kk[tuple(sl)] = 0.0
            else:
                kk[..., -1] = 0.0
        dks.append(1j * kk)
    G.setflags(write=False)
    return G, tuple(dks)


def _stream_free(omega: np.ndarray, grid: Grid) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
    npad = PAD * grid.n
    lead = omega.shape[: omega.ndim - grid.dim]
    padded = np.zeros(lead + (npad,) * grid.dim)
    padded[(...,) + (slice(0, grid.n),) * grid.dim] = omega
    axes = tuple(range(len(lead), padded.ndim))
    G, dks = _truncated_kernel(grid)
    return sfft.rfftn(padded, axes=axes, workers=fft_workers()) * G, dks


def _back_free(vh: np.ndarray, grid: Grid) -> np.ndarray:
    npad = PAD * grid.n
    axes = tuple(range(vh.ndim - grid.dim, vh.ndim))
    out = sfft.irfftn(vh, s=(npad,) * grid.dim, axes=axes, workers=fft_workers())
    return out[(...,) + (slice(0, grid.n),) * grid.dim]


@dataclass
class FreeSolution:
    """Velocity on the grid with optional exact node derivatives.

    ``jacobian[i, j] = ∂_j v_i`` and, in 2-D, the stream function ``ψ`` with
    ``v = (∂₂ψ, -∂₁ψ)``. In free mode all three come from the padded
    lattice, so no wrap-around from the box edge enters them.
    """

    velocity: np.ndarray
    jacobian: np.ndarray | None = None
    stream: np.ndarray | None = None


def biot_savart(omega: np.ndarray, grid: Grid, mode: str = "free", with_jacobian: bool = False) -> FreeSolution:
    omega = np.asarray(omega, dtype=float)
    if grid.dim == 2 and omega.shape != grid.shape:
        raise PreconditionError("2-D vorticity must be a scalar field on the grid")
    if grid.dim == 3 and omega.shape != (3,) + grid.shape:
        raise PreconditionError("3-D vorticity must have three components")
    if mode == "periodic":
        psih, syms = _stream_periodic(omega, grid)
        back = lambda fh: irfft(fh, grid)  # noqa: E731
    elif mode == "free":
        _check_support(omega, grid)
        psih, syms = _stream_free(omega, grid)
        back = lambda fh: _back_free(fh, grid)  # noqa: E731
    else:
        raise ConfigurationError(f"unknown Biot-Savart mode {mode!r}")
    if grid.dim == 2:
        d1, d2 = syms
        vh = np.stack([d2 * psih, -d1 * psih])
    else:
        d1, d2, d3 = syms
        vh = np.stack([d2 * psih[2] - d3 * psih[1], d3 * psih[0] - d1 * psih[2], d1 * psih[1] - d2 * psih[0]])
    sol = FreeSolution(back(vh))
    if with_jacobian:
        sol.jacobian = np.stack([back(vh * sj) for sj in syms], axis=1)
    if grid.dim == 2:
        sol.stream = back(psih)
    return sol


def bs_free(omega: np.ndarray, grid: Grid, mode: str = "free") -> np.ndarray:
    """Velocity whose curl is ``omega`` (divergence-free, decaying).

    In 2-D ``omega`` is the scalar vorticity and the result is planar with
    shape ``(2, *shape)``; in 3-D both have three components.
    """
    return biot_savart(omega, grid, mode).velocity


def _stream_periodic(omega: np.ndarray, grid: Grid):
    wh = rfft(omega, grid)
    k2 = grid.kmag() ** 2
    k2[(0,) * grid.dim] = 1.0
    if grid.dim == 3:
        means = wh[(slice(None),) + (0,) * grid.dim].real / np.prod(grid.shape)
        if np.max(np.abs(means)) > 1e-12 * max(float(np.max(np.abs(omega))), 1e-300):
            raise PreconditionError("periodic Biot-Savart needs zero-mean vorticity components")
    # in 2-D the mean has no periodic stream function and is dropped
    psih = wh / k2
    psih[(...,) + (0,) * grid.dim] = 0.0
    return psih, _deriv_symbols(grid)


# -- Neumann correction ------------------------------------------------------


class DiskPotential:
    """Harmonic ``α`` in the disk with prescribed normal derivative.

    ``α = Re f(z)`` with ``f(z) = Σ_m c_m (z/R)^m``. The boundary data are
    trigonometric-interpolated at ``samples`` uniform angles, so the Neumann
    condition holds exactly at those points.
    """

    def __init__(self, domain: RoundDomain, data: np.ndarray, samples: np.ndarray):
        R = domain.radius
        m = len(data)
        gh = np.fft.rfft(data) / m
        self.mean_flux = float(gh[0].real)
        modes = np.arange(gh.size)
        c = np.zeros(gh.size, dtype=complex)
        c[1:] = 2.0 * R * gh[1:] / modes[1:]
        if m % 2 == 0:
            c[-1] = R * gh[-1] / modes[-1]
        self.R = R
        self.coeffs = c
        # power-series coefficients of f, f' and f'' in ζ = z / R, highest first
        self._f = c[::-1]
        self._fp = (c[1:] * modes[1:] / R)[::-1]
        self._fpp = (c[2:] * modes[2:] * (modes[2:] - 1) / R**2)[::-1]

    def _zeta(self, x):
        x = np.atleast_2d(x)
        return (x[:, 0] + 1j * x[:, 1]) / self.R

    def value(self, x) -> np.ndarray:
        return np.polyval(self._f, self._zeta(x)).real

    def grad(self, x) -> np.ndarray:
        fp = np.polyval(self._fp, self._zeta(x))
        return np.stack([fp.real, -fp.imag], axis=-1)

    def hessian(self, x) -> np.ndarray:
        fpp = np.polyval(self._fpp, self._zeta(x))
        H = np.empty(fpp.shape + (2, 2))
        H[:, 0, 0] = fpp.real
        H[:, 1, 1] = -fpp.real
        H[:, 0, 1] = H[:, 1, 0] = -fpp.imag
        return H


class BallPotential:
    """Harmonic ``α`` in the ball from a least-squares harmonic fit of the Neumann data."""

    def __init__(self, domain: RoundDomain, data: np.ndarray, samples: np.ndarray, degree: int = 12):
        R = domain.radius
        fit = SphereFit(R, samples, degree)
        a = fit.fit(data)
        self.mean_flux = float(a[0])
        _, degs = harmonic_basis(3, degree)
        # radial derivative of R (r/R)^l p(u) / l at r = R is p(u)
        mono = fit.basis[:, 1:] @ (a[1:] / degs)
        self.poly = HarmonicPolynomial(3, degree, mono, scale=R)
        self.residual = float(np.max(np.abs(fit.evaluate(a, samples) - data))) if len(data) else 0.0

    def value(self, x):
        return self.poly.value(np.atleast_2d(x))

    def grad(self, x):
        return self.poly.grad(np.atleast_2d(x))

    def hessian(self, x):
        return self.poly.hessian(np.atleast_2d(x))


def default_samples(domain: RoundDomain) -> int:
    return 512 if domain.dim == 2 else 800


def neumann_potential(evaluate, domain: RoundDomain, samples: int | None = None, flux_tol: float = FLUX_TOL):
    """Build the harmonic potential whose normal derivative is ``v̄·n`` on ``∂Ω``.

    ``evaluate`` maps boundary points ``(m, dim)`` to velocities ``(m, dim)``.
    The mean outward flux must vanish up to ``flux_tol`` times the largest
    boundary speed; the mean itself is removed before the solve.
    """
    m = samples or default_samples(domain)
    pts, nrm = domain.boundary_samples(m)
    vb = evaluate(pts)[:, : domain.dim]
    g = np.einsum("pd,pd->p", vb, nrm)
    scale = max(float(np.max(np.linalg.norm(vb, axis=1))), 1e-300)
    flux = float(np.mean(g))
    if abs(flux) > flux_tol * scale:
        raise PreconditionError(
            f"boundary flux {flux:.3e} is not compatible with a Neumann correction (scale {scale:.3e})"
        )
    g = g - flux
    if domain.dim == 2:
        pot = DiskPotential(domain, g, pts)
    else:
        pot = BallPotential(domain, g, pts)
    pot.flux = flux
    pot.samples = pts
    pot.normals = nrm
    return pot


# -- velocity field on Ω -------------------------------------------------------


class _ZeroPotential:
    flux = 0.0

    def grad(self, x):
        return np.zeros_like(np.atleast_2d(x), dtype=float)

    def hessian(self, x):
        x = np.atleast_2d(x)
        return np.zeros(x.shape + (x.shape[1],))


@dataclass(eq=False)
class VelocityField:
    """``v = v̄ - ∇α`` on Ω with node values and off-grid evaluation.

    Off the grid, ``v̄`` is interpolated by quintic splines: in 2-D through
    the stream function, so the interpolant is exactly divergence-free and
    its boundary flux vanishes; in 3-D componentwise with periodic wrap.
    ``α`` is evaluated in closed form. Node values outside Ω are zero.
    """

    grid: Grid
    domain: RoundDomain
    vbar: np.ndarray
    potential: object = None
    vbar_jacobian: np.ndarray | None = None
    stream: np.ndarray | None = None
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.potential is None:
            self.potential = _ZeroPotential()
        self.mask = self.domain.node_mask(self.grid)
        self._jac = None
        self._jcoef = None
        if self.grid.dim == 2 and self.stream is not None:
            ax = self.grid.axis
            self._psi = RectBivariateSpline(ax, ax, self.stream, kx=SPLINE_ORDER, ky=SPLINE_ORDER)
        else:
            self._psi = None
            self._coef = _spline_coefficients(self.vbar)

    def _index_coords(self, x):
        return ((np.atleast_2d(x) - self.grid.axis[0]) / self.grid.h).T

    def vbar_at(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self._psi is not None:
            return np.stack([self._psi.ev(x[:, 0], x[:, 1], dy=1), -self._psi.ev(x[:, 0], x[:, 1], dx=1)], -1)
        return _spline_eval(self._coef, self._index_coords(x))

    def vbar_grad_at(self, x: np.ndarray) -> np.ndarray:
        """``∂_j v̄_i`` at points, shape ``(P, dim, dim)``."""
        x = np.atleast_2d(x)
        if self._psi is not None:
            ev = self._psi.ev
            pxy = ev(x[:, 0], x[:, 1], dx=1, dy=1)
            pxx = ev(x[:, 0], x[:, 1], dx=2)
            pyy = ev(x[:, 0], x[:, 1], dy=2)
            return np.stack([np.stack([pxy, pyy], -1), np.stack([-pxx, -pxy], -1)], -2)
        if self._jcoef is None:
            J = self.vbar_jacobian if self.vbar_jacobian is not None else jacobian(self.vbar, self.grid)
            d = self.grid.dim
            self._jcoef = _spline_coefficients(J.reshape((d * d,) + self.grid.shape))
        d = self.grid.dim
        return _spline_eval(self._jcoef, self._index_coords(x)).reshape(-1, d, d)

    def at(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.vbar_at(x) - self.potential.grad(x)

    def grad_at(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return self.vbar_grad_at(x) - self.potential.hessian(x)

    @property
    def values(self) -> np.ndarray:
        pts = self.grid.points()[self.mask.ravel()]
        out = np.zeros_like(self.vbar)
        corr = self.potential.grad(pts)
        for c in range(self.grid.dim):
            out[c][self.mask] = self.vbar[c][self.mask] - corr[:, c]
        return out

    @property
    def jacobian(self) -> np.ndarray:
        """``∂_j v_i`` at nodes; zero outside Ω."""
        if self._jac is None:
            J = self.vbar_jacobian
            if J is None:
                J = jacobian(self.vbar, self.grid)
            J = J.copy()
            pts = self.grid.points()[self.mask.ravel()]
            H = self.potential.hessian(pts)
            d = self.grid.dim
            for i in range(d):
                for j in range(d):
                    J[i, j][self.mask] -= H[:, i, j]
                    J[i, j][~self.mask] = 0.0
            self._jac = J
        return self._jac

    def boundary_normal_velocity(self, samples: int | None = None) -> np.ndarray:
        m = samples or default_samples(self.domain)
        pts, nrm = self.domain.boundary_samples(m)
        return np.einsum("pd,pd->p", self.at(pts), nrm)

    def kinetic_energy(self) -> float:
        v = self.values
        return 0.5 * float(np.sum(v[:, self.mask] ** 2)) * self.grid.cell_volume


def _spline_coefficients(comps: np.ndarray) -> np.ndarray:
    return np.stack([ndimage.spline_filter(c, order=SPLINE_ORDER, mode="grid-wrap") for c in comps])


def _spline_eval(coef: np.ndarray, ix: np.ndarray) -> np.ndarray:
    return np.stack(
        [ndimage.map_coordinates(c, ix, order=SPLINE_ORDER, mode="grid-wrap", prefilter=False) for c in coef],
        axis=-1,
    )


def neumann_correct(vbar, domain: RoundDomain, grid: Grid, samples: int | None = None,
                    flux_tol: float = FLUX_TOL) -> VelocityField:
    """Subtract the gradient of a harmonic potential so the result is tangent to ``∂Ω``.

    ``vbar`` is either a gridded vector field or a :class:`FreeSolution`
    (whose stream function and Jacobian are then used).
    """
    if isinstance(vbar, FreeSolution):
        sol = vbar
    else:
        sol = FreeSolution(np.asarray(vbar, dtype=float))
    if sol.velocity.shape != (grid.dim,) + grid.shape:
        raise PreconditionError("v̄ must be a gridded vector field with dim components")
    domain.check_fits(grid)
    vel = VelocityField(grid, domain, sol.velocity, None, sol.jacobian, sol.stream)
    vel.potential = neumann_potential(vel.vbar_at, domain, samples, flux_tol)
    return vel


def zero_extension(omega: np.ndarray, domain: RoundDomain, grid: Grid) -> np.ndarray:
    mask = domain.node_mask(grid)
    return np.where(mask, omega, 0.0)


def velocity_from_vorticity(omega: np.ndarray, domain: RoundDomain, grid: Grid, atlas=None,
                            r: float = 0.5, extension: str = "radial") -> VelocityField:
    """Velocity in Ω with curl ``omega`` and zero normal component on ``∂Ω``.

    In 2-D the vorticity is extended by zero: for ``ω e₃``, which is tangent
    to ``∂Ω``, this coincides with the divergence-preserving extension. In
    3-D ``omega`` is extended divergence-free, by default with
    ``extend_radial_div``; ``extension="Pdiv"`` uses the chart-based
    operator instead (``atlas`` is built when not supplied).
    """
    omega = np.asarray(omega, dtype=float)
    if grid.dim == 2:
        wbar = zero_extension(omega, domain, grid)
    else:
        from .extension import build_atlas, extend_Pdiv, extend_radial_div

        u = np.where(domain.node_mask(grid), omega, 0.0)
        if extension == "Pdiv":
            atlas = atlas or build_atlas(domain)
            wbar = extend_Pdiv(u, atlas, grid, r=r, report=False).values
        elif extension == "radial":
            wbar = extend_radial_div(u, domain, grid).values
        else:
            raise ConfigurationError(f"unknown extension {extension!r}")
    return neumann_correct(biot_savart(wbar, grid, "free", with_jacobian=True), domain, grid)


# -- static estimate -----------------------------------------------------------


@dataclass
class StaticReport:
    """Quantities entering the log-Lipschitz velocity bound.

    ``lip`` is ``sup|v| + sup|∇v|`` from spectral node derivatives and
    ``lip_pairs`` is ``sup|v|`` plus the Lipschitz seminorm over random
    interior node pairs. ``ratio`` uses ``lip``.
    """

    r: float
    s: float
    lip: float
    lip_pairs: float
    omega_sup: float
    winv_sup: float
    w_holder: float
    conormal: float
    omega_n: float
    X: float = field(init=False)
    ratio: float = field(init=False)
    grad_v_seminorm: float = 0.0
    omega_seminorm: float = 0.0

    def __post_init__(self):
        parts = (self.omega_sup, self.winv_sup, self.w_holder, self.conormal, self.omega_n)
        if any(p < 0 for p in parts):
            raise PreconditionError("norm components must be nonnegative")
        self.X = 1.0 + sum(parts)
        self.ratio = self.lip / ((1.0 + self.omega_sup) * np.log(np.e + self.X))

    @property
    def x20(self) -> float:
        return self.X**20

    @property
    def implied_constant(self) -> float:
        """Smallest C with ``[∇v]_r <= C X^20 + [ω]_r`` on the chosen subset."""
        return max(self.grad_v_seminorm - self.omega_seminorm, 0.0) / self.x20

    CSV_COLUMNS = (
        "r", "s", "lip", "lip_pairs", "omega_sup", "winv_sup", "w_holder", "conormal", "omega_n",
        "X", "ratio", "grad_v_seminorm", "omega_seminorm",
    )

    def csv_row(self) -> str:
        d = asdict(self)
        return ",".join(f"{d[c]:.12g}" for c in self.CSV_COLUMNS)


def _interior_pairs(idx: np.ndarray, rng: np.random.Generator, npairs: int) -> np.ndarray:
    return rng.integers(0, idx.size, size=(npairs, 2))


def lipschitz_norms(vel: VelocityField, rng: np.random.Generator, npairs: int = 10_000) -> tuple[float, float]:
    """``(spectral, pairwise)`` estimates of ``‖v‖_Lip`` over nodes of Ω."""
    mask = vel.mask
    v = vel.values
    vsup = float(np.max(np.linalg.norm(v[:, mask], axis=0))) if mask.any() else 0.0
    J = vel.jacobian
    gsup = float(np.max(np.linalg.norm(J[:, :, mask], axis=(0, 1)))) if mask.any() else 0.0
    idx = np.flatnonzero(mask)
    pts = vel.grid.points()[idx]
    vals = v.reshape(v.shape[0], -1)[:, idx].T
    pairs = _interior_pairs(idx, rng, npairs)
    return vsup + gsup, vsup + pair_holder_seminorm(vals, pts, 1.0, pairs)


def static_estimate_report(vel: VelocityField, omega: np.ndarray, system, patch=None, r: float = 0.5,
                           rng: np.random.Generator | None = None, margin_cells: float = 4.0,
                           npairs: int = 10_000, chi: np.ndarray | None = None,
                           profiles: tuple[np.ndarray, np.ndarray] | None = None) -> StaticReport:
    """Assemble ``X`` and the log-Lipschitz ratio for a velocity/vorticity pair.

    ``system`` only needs ``fields`` (``(N', 3, *shape)``) and ``s``. When
    ``patch`` is given the conormal derivatives use its two-profile
    structure, with ``chi`` and ``profiles`` replacing the patch indicator
    and profiles for a transported patch; otherwise they are taken
    spectrally from the sampled product.
    """
    from . import patch as patchmod

    rng = rng if rng is not None else np.random.default_rng(0)
    grid, domain = vel.grid, vel.domain
    mask = vel.mask
    omega = np.asarray(omega, dtype=float)
    om = np.where(mask, omega, 0.0)
    omega_sup = float(np.max(np.abs(om))) if grid.dim == 2 else float(np.max(np.linalg.norm(om, axis=0)))

    winv, winv_sup = patchmod.admissibility(system, mask)
    if not np.isfinite(winv_sup):
        raise patchmod.AdmissibilityError("tangent system is not admissible on Ω")
    w_holder = sum(
        restricted_holder_norm(w, grid, mask, r, rng, npairs) for w in system.fields
    )
    if patch is not None:
        con = patchmod.conormal_derivative(system.fields, patch, grid, domain, profiles=profiles, chi=chi, omega=om)
    else:
        con = patchmod.conormal_spectral(system.fields, om, grid)
    from .lp_core import holder_norm

    conormal = sum(holder_norm(c, grid, r - 1.0) for c in con)
    if grid.dim == 2:
        omega_n = 0.0
    else:
        from .extension import BoundaryTrace, boundary_holder_norm

        trace = BoundaryTrace(domain, om, grid=grid)
        omega_n = boundary_holder_norm(lambda y: np.einsum("pd,pd->p", trace(y), domain.normal(y)), domain, r)

    lip, lip_pairs = lipschitz_norms(vel, rng, npairs)

    dist = domain.distance(np.moveaxis(grid.mesh(), 0, -1))
    idx = np.flatnonzero(mask & (dist >= margin_cells * grid.h))
    pts = grid.points()[idx]
    pairs = _interior_pairs(idx, rng, npairs)
    J = vel.jacobian.reshape(grid.dim * grid.dim, -1)[:, idx].T
    gv = pair_holder_seminorm(J, pts, r, pairs)
    ov = pair_holder_seminorm(om.reshape(-1, grid.n**grid.dim)[:, idx].T, pts, r, pairs)
    return StaticReport(r=r, s=system.s, lip=lip, lip_pairs=lip_pairs, omega_sup=omega_sup,
                        winv_sup=winv_sup, w_holder=w_holder, conormal=conormal, omega_n=omega_n,
                        grad_v_seminorm=gv, omega_seminorm=ov)
