"""Extension of fields from a round domain to the surrounding box.

A boundary atlas covers a neighbourhood of the boundary by balls ``V_i``
centred on boundary points ``x_i``, each carrying an orthonormal frame whose
vectors all point outward at the same angle to the normal. A point ``ξ`` of
``V_i`` is sent along each frame direction ``e_j`` to the unique boundary
point ``y^{i,j}(ξ)`` of the line ``ξ + t e_j`` near ``x_i``. Outside the
domain the chart-local extension is

    ũ_i(ξ) = Σ_j [T(y^{i,j}(ξ)) · e_j] e_j,

with ``T`` the normal trace ``(u·n) n`` for ``P`` and the full trace ``u``
for ``P_c``. Each ũ_i is divergence free (it is a sum of fields constant
along their own direction), so ``div Pu = Σ ũ_i · ∇ψ_i`` outside the domain
with ``ψ_i`` the partition of unity. ``P_div`` removes that divergence by a
Neumann problem in the shell between the domain and the enclosing ball ``V``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial import cKDTree

from .errors import ConfigurationError, ConstructionError, PreconditionError
from .fieldops import Grid, RoundDomain, fd_derivative, fibonacci_sphere
from .harmonics import CircleFit, SphereFit, SphereTable
from .lp_core import pair_holder_seminorm, restricted_holder_norm, theta, theta_prime

SUPPORT_FRACTION = 0.9  # bumps vanish beyond this fraction of the chart radius


def _frame_for(normal: np.ndarray) -> np.ndarray:
    """Orthonormal rows making equal outward angles with ``normal``.

    The Householder reflection taking (1,..,1)/sqrt(d) to ``normal`` is applied
    to the standard basis.
    """
    d = normal.size
    a = np.full(d, 1.0 / np.sqrt(d))
    v = a - normal
    nv = np.dot(v, v)
    H = np.eye(d) if nv < 1e-30 else np.eye(d) - 2.0 * np.outer(v, v) / nv
    return H.T.copy()  # rows are images of e_1..e_d


def _radial_step(r, start, width):
    """1 for r <= start, 0 for r >= start + width, smooth in between."""
    return theta(1.0 + (r - start) / width)


def _radial_step_prime(r, start, width):
    return theta_prime(1.0 + (r - start) / width) / width


@dataclass
class BoundaryAtlas:
    domain: RoundDomain
    centers: np.ndarray  # (N, d)
    frames: np.ndarray  # (N, d, d), frames[i, j] = e_j at chart i
    radius: float  # radius of each V_i
    inner_start: float = field(init=False)

    def __post_init__(self):
        R = self.domain.radius
        self.inner_start = R - 0.5 * self.radius

    @property
    def nchart(self) -> int:
        return len(self.centers)

    @property
    def support_radius(self) -> float:
        return SUPPORT_FRACTION * self.radius

    @property
    def outer_radius(self) -> float:
        """Radius of the enclosing ball ``V``; all extensions vanish beyond it."""
        return self.domain.radius + self.radius

    # -- projections --

    @staticmethod
    def _line_roots(x, e, R):
        xe = np.sum(x * e, axis=-1)
        disc = xe * xe - np.sum(x * x, axis=-1) + R * R
        return xe, disc

    def project_pairs(self, j: int, x: np.ndarray, charts: np.ndarray) -> np.ndarray:
        """Boundary point on ``x + t e_j`` of the given chart, nearest to that chart's centre."""
        e = self.frames[charts, j]
        xe, disc = self._line_roots(x, e, self.domain.radius)
        if np.any(disc < 0):
            raise ConstructionError("projection line misses the boundary; chart too large")
        s = np.sqrt(disc)
        y1 = x + (-xe + s)[:, None] * e
        y2 = x + (-xe - s)[:, None] * e
        c = self.centers[charts]
        d1 = np.sum((y1 - c) ** 2, axis=-1)
        d2 = np.sum((y2 - c) ** 2, axis=-1)
        return np.where((d1 <= d2)[:, None], y1, y2)

    def project(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        """``y^{i,j}(x)`` for points of chart ``i``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.project_pairs(j, x, np.full(len(x), i))

    def _roots_in_window(self, i, j, x, wradius):
        e = self.frames[i, j]
        xe, disc = self._line_roots(x, e[None], self.domain.radius)
        ok = disc > 0
        s = np.sqrt(np.where(ok, disc, 0.0))
        cnt = np.zeros(len(x), dtype=int)
        for sign in (1.0, -1.0):
            y = x + (-xe + sign * s)[:, None] * e
            cnt += (np.linalg.norm(y - self.centers[i], axis=-1) < wradius) & ok
        return cnt

    def validate(self, samples: int = 300) -> None:
        """Check single intersection of every projection line with the boundary near x_i."""
        d = self.domain.dim
        rng = np.random.default_rng(12345)
        u = rng.standard_normal((samples, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        rad = self.radius * rng.uniform(0, 1, samples) ** (1.0 / d)
        offs = u * rad[:, None]
        offs[:len(u) // 4] = u[:len(u) // 4] * self.radius  # include the chart rim
        for i in range(self.nchart):
            x = self.centers[i] + offs
            for j in range(d):
                cnt = self._roots_in_window(i, j, x, 2.0 * self.radius)
                if np.any(cnt != 1):
                    raise ConstructionError(
                        f"chart {i}: line along e_{j + 1} does not meet the boundary exactly once"
                        " near the chart centre; use more charts or a smaller chart radius"
                    )
        pts = self._coverage_samples()
        beta = self.bumps(pts)[0]
        if np.min(beta.sum(axis=0)) <= 1e-3:
            raise ConstructionError("charts do not cover a neighbourhood of the boundary")

    def _coverage_samples(self):
        R = self.domain.radius
        d = self.domain.dim
        if d == 2:
            th = np.linspace(0, 2 * np.pi, 720, endpoint=False)
            dirs = np.stack([np.cos(th), np.sin(th)], -1)
        else:
            dirs = fibonacci_sphere(4 * self.nchart)
        rs = np.linspace(self.inner_start - 0.1 * self.radius, R, 6)
        return np.concatenate([r * dirs for r in rs])

    # -- partition of unity --

    def pairs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs (point, chart) with the point inside the chart's bump support."""
        if not hasattr(self, "_tree"):
            self._tree = cKDTree(self.centers)
        lists = self._tree.query_ball_point(x, self.support_radius)
        counts = np.fromiter((len(l) for l in lists), dtype=np.int64, count=len(lists))
        pidx = np.repeat(np.arange(len(x)), counts)
        cidx = np.fromiter((c for l in lists for c in l), dtype=np.int64, count=int(counts.sum()))
        return pidx, cidx

    def _chart_bumps(self, x, pidx, cidx):
        dx = x[pidx] - self.centers[cidx]
        dist = np.linalg.norm(dx, axis=-1)
        sr = self.support_radius
        t = 2.0 * dist / sr
        val = theta(t)
        dn = np.where(dist > 0, dist, 1.0)
        grad = (theta_prime(t) * 2.0 / sr / dn)[:, None] * dx
        return val, grad

    def _interior_bump(self, x):
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        w0 = 0.25 * self.radius
        return _radial_step(r, self.inner_start, w0), (_radial_step_prime(r, self.inner_start, w0) / safe)[:, None] * x

    def bumps(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Dense bump values ``β_0..β_N`` (N+1, P) and gradients (N+1, P, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        P, d = x.shape
        beta = np.zeros((self.nchart + 1, P))
        grad = np.zeros((self.nchart + 1, P, d))
        beta[0], grad[0] = self._interior_bump(x)
        pidx, cidx = self.pairs(x)
        val, g = self._chart_bumps(x, pidx, cidx)
        beta[cidx + 1, pidx] = val
        grad[cidx + 1, pidx] = g
        return beta, grad

    def cutoff(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``η`` = 1 on the closed domain, 0 beyond ``R + radius/4``; with gradient."""
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        w = 0.25 * self.radius
        R = self.domain.radius
        eta = _radial_step(r, R, w)
        geta = (_radial_step_prime(r, R, w) / safe)[:, None] * x
        return eta, geta

    def partition_pairs(self, x: np.ndarray):
        """Sparse partition of unity ``ψ_i = β_i / (Σβ + 1 - η)``.

        Returns ``(pidx, cidx, psi, gpsi, psi0, gpsi0)`` where the chart terms
        are listed per (point, chart) pair and ``psi0`` is the interior term.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        P = len(x)
        b0, g0 = self._interior_bump(x)
        pidx, cidx = self.pairs(x)
        val, g = self._chart_bumps(x, pidx, cidx)
        B = b0 + np.bincount(pidx, weights=val, minlength=P)
        gB = g0.copy()
        for a in range(x.shape[1]):
            gB[:, a] += np.bincount(pidx, weights=g[:, a], minlength=P)
        eta, geta = self.cutoff(x)
        D = B + 1.0 - eta
        gD = gB - geta
        psi = val / D[pidx]
        gpsi = g / D[pidx, None] - val[:, None] * gD[pidx] / (D[pidx] ** 2)[:, None]
        psi0 = b0 / D
        gpsi0 = g0 / D[:, None] - b0[:, None] * gD / (D * D)[:, None]
        return pidx, cidx, psi, gpsi, psi0, gpsi0

    def partition(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Dense ``ψ_0..ψ_N`` (N+1, P) and gradients (N+1, P, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        pidx, cidx, psi, gpsi, psi0, gpsi0 = self.partition_pairs(x)
        out = np.zeros((self.nchart + 1, len(x)))
        gout = np.zeros((self.nchart + 1,) + x.shape)
        out[0], gout[0] = psi0, gpsi0
        out[cidx + 1, pidx] = psi
        gout[cidx + 1, pidx] = gpsi
        return out, gout


def build_atlas(domain: RoundDomain, charts: int | None = None, radius: float | None = None) -> BoundaryAtlas:
    """Charts at uniform angles (disk) or on a Fibonacci spiral (ball)."""
    d = domain.dim
    R = domain.radius
    if charts is None:
        # orthonormal outward frames force a small chart radius (about 0.19 R in 2-D, 0.09 R in 3-D)
        charts = 40 if d == 2 else int(np.ceil(4 * np.pi * (1.1 / 0.085) ** 2))
    minimum = 4 if d == 2 else 6
    if charts < minimum:
        raise ConfigurationError(f"at least {minimum} charts are required in {d}-D, got {charts}")
    if d == 2:
        th = 2 * np.pi * np.arange(charts) / charts
        normals = np.stack([np.cos(th), np.sin(th)], -1)
        spacing = 2 * np.pi * R / charts
    else:
        normals = fibonacci_sphere(charts)
        spacing = np.sqrt(4 * np.pi * R * R / charts)
    if radius is None:
        radius = (1.2 if d == 2 else 1.1) * spacing
    frames = np.stack([_frame_for(nv) for nv in normals])
    atlas = BoundaryAtlas(domain, R * normals, frames, float(radius))
    atlas.validate()
    return atlas


# -- boundary traces -------------------------------------------------------


class BoundaryTrace:
    """Boundary values of a vector field, from a callable or from grid samples.

    Gridded data is fitted by a local weighted quadratic at boundary sample
    points (using only nodes of the closed domain), then interpolated along
    the boundary by a trigonometric series (disk) or spherical harmonics (ball).
    """

    def __init__(self, domain: RoundDomain, source, grid: Grid | None = None, samples: int | None = None,
                 degree: int = 10):
        self.domain = domain
        self.callable = callable(source)
        if self.callable:
            self._f = source
            return
        if grid is None:
            raise PreconditionError("gridded input needs its grid")
        u = np.asarray(source, dtype=float)
        inside = domain.node_mask(grid)
        comps = u.reshape((-1,) + grid.shape)
        if not np.all(np.isfinite(comps[:, inside])):
            raise PreconditionError("field is not defined on every interior node")
        d = domain.dim
        pts = grid.points()[inside.ravel()]
        vals = comps.reshape(comps.shape[0], -1)[:, inside.ravel()].T
        if samples is None:
            samples = 512 if d == 2 else 600
        bpts, _ = domain.boundary_samples(samples)
        tree = cKDTree(pts)
        traces = np.empty((samples, vals.shape[1]))
        for k, y in enumerate(bpts):
            traces[k] = _local_poly_value(tree, pts, vals, y, grid.h, d)
        self.fitter = CircleFit(samples) if d == 2 else SphereFit(domain.radius, bpts, degree)
        self.coeffs = self.fitter.fit(traces)
        self._table = SphereTable(self.fitter, self.coeffs) if d == 3 else None

    def __call__(self, y: np.ndarray) -> np.ndarray:
        if self.callable:
            return np.asarray(self._f(y), dtype=float)
        if self._table is not None:
            return self._table(y)
        return self.fitter.evaluate(self.coeffs, y)


def _local_poly_value(tree, pts, vals, y, h, d):
    """Value at ``y`` of a weighted least-squares quadratic through nearby samples.

    Node layouts near the boundary can make the quadratic design rank
    deficient (all nodes on two lattice planes), so the stencil grows until
    the system has full rank, falling back to a linear fit.
    """
    for rad, quad in ((2.2, True), (2.8, True), (3.5, True), (2.5, False), (3.5, False)):
        idx = tree.query_ball_point(y, rad * h)
        z = (pts[idx] - y) / h
        cols = [np.ones(len(idx))] + [z[:, a] for a in range(d)]
        if quad:
            cols += [z[:, a] * z[:, b] for a in range(d) for b in range(a, d)]
        A = np.stack(cols, axis=1)
        if len(idx) < A.shape[1] + 2:
            continue
        w = np.exp(-0.25 * np.sum(z * z, axis=1))
        coef, _, rank, _ = np.linalg.lstsq(A * w[:, None], vals[idx] * w[:, None], rcond=None)
        if rank == A.shape[1]:
            return coef[0]
    raise PreconditionError(f"too few interior nodes near boundary point {y}")


# -- extension operators -----------------------------------------------------


@dataclass
class ExtensionReport:
    """Ratios of extended to original norms.

    sup_ratio       ||Pu||_inf / ||u||_inf
    holder_ratio    ||Pu||_{C^r(V \\ Ω)} / ||u||_{C^r(Ω)}
    div_sup_ratio   ||div Pu||_inf / ||u||_inf
    div_holder_ratio ||div Pu||_{C^r(V \\ Ω)} / ||u||_{C^r(Ω)}
    """

    op: str
    r: float
    sup_ratio: float
    holder_ratio: float
    div_sup_ratio: float
    div_holder_ratio: float

    def to_csv(self) -> str:
        head = "op,r,sup_ratio,holder_ratio,div_sup_ratio,div_holder_ratio"
        vals = [self.sup_ratio, self.holder_ratio, self.div_sup_ratio, self.div_holder_ratio]
        return head + "\n" + ",".join([self.op, repr(self.r)] + [repr(float(v)) for v in vals]) + "\n"


@dataclass
class Extension:
    op: str
    grid: Grid
    values: np.ndarray  # (d, *shape)
    divergence: np.ndarray  # (*shape): analytic/FD divergence at nodes (P, Pc)
    max_divergence: float
    report: ExtensionReport | None = None
    shell: "ShellNeumann | None" = None


def _normal_trace(domain, trace):
    def T(y):
        n = domain.normal(y)
        return np.sum(trace(y) * n, axis=-1)[:, None] * n

    return T


def exterior_values(atlas: BoundaryAtlas, T: Callable, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``Σ_i ψ_i ũ_i`` and ``Σ_i ũ_i · ∇ψ_i`` at points outside the open domain."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    P, d = x.shape
    out = np.zeros((P, d))
    div = np.zeros(P)
    if P == 0:
        return out, div
    pidx, cidx, psi, gpsi, _, _ = atlas.partition_pairs(x)
    if pidx.size == 0:
        return out, div
    xs = x[pidx]
    ut = np.zeros((pidx.size, d))
    for j in range(d):
        e = atlas.frames[cidx, j]
        y = atlas.project_pairs(j, xs, cidx)
        ut += np.sum(T(y) * e, axis=-1)[:, None] * e
    for a in range(d):
        out[:, a] = np.bincount(pidx, weights=psi * ut[:, a], minlength=P)
    div[:] = np.bincount(pidx, weights=np.sum(ut * gpsi, axis=-1), minlength=P)
    return out, div


def _interior_values(u, grid, inside):
    d = grid.dim
    if callable(u):
        vals = np.zeros((d,) + grid.shape)
        pts = grid.points()[inside.ravel()]
        vals.reshape(d, -1)[:, inside.ravel()] = np.asarray(u(pts), dtype=float).T
        return vals
    arr = np.asarray(u, dtype=float).reshape((d,) + grid.shape)
    vals = np.where(inside[None], arr, 0.0)
    return vals


def _interior_divergence(u, grid, inside):
    if callable(u):
        pts = grid.points()[inside.ravel()]
        eps = 1e-5
        div = np.zeros(len(pts))
        for a in range(grid.dim):
            dx = np.zeros(grid.dim)
            dx[a] = eps
            div += (u(pts + dx)[:, a] - u(pts - dx)[:, a]) / (2 * eps)
        out = np.zeros(grid.shape)
        out.ravel()[inside.ravel()] = div
        return out
    arr = np.asarray(u, dtype=float).reshape((grid.dim,) + grid.shape)
    div = sum(fd_derivative(arr[a], grid, a, inside) for a in range(grid.dim))
    return np.where(inside, np.nan_to_num(div), 0.0)


def _extend(u, atlas: BoundaryAtlas, grid: Grid, op: str, trace: BoundaryTrace | None = None):
    dom = atlas.domain
    if atlas.outer_radius > 0.5 * grid.extent - 2 * grid.h:
        raise ConfigurationError("enclosing set V does not fit in the box")
    inside = dom.node_mask(grid)
    trace = trace or BoundaryTrace(dom, u, grid)
    T = _normal_trace(dom, trace) if op == "P" else trace
    vals = _interior_values(u, grid, inside)
    if not np.all(np.isfinite(vals)):
        raise PreconditionError("field has non-finite values inside the domain")
    r = np.sqrt(sum(c * c for c in np.broadcast_arrays(*grid.coords())))
    shell = (~inside) & (r < atlas.outer_radius)
    pts = grid.points()[shell.ravel()]
    ext, div_ext = exterior_values(atlas, T, pts)
    vals.reshape(grid.dim, -1)[:, shell.ravel()] = ext.T
    div = _interior_divergence(u, grid, inside)
    div.ravel()[shell.ravel()] = div_ext
    return vals, div, inside, shell, T


def boundary_holder_norm(T: Callable, domain: RoundDomain, r: float, samples: int = 512) -> float:
    """``sup|T| + [T]_r`` over boundary samples, all pairs."""
    y, _ = domain.boundary_samples(samples)
    vals = np.asarray(T(y), dtype=float).reshape(samples, -1)
    ii, jj = np.triu_indices(samples, k=1)
    return float(np.max(np.linalg.norm(vals, axis=1))) + pair_holder_seminorm(
        vals, y, r, np.stack([ii, jj], axis=1))


def _ratio(num, den, scale):
    if den <= 1e-12 * scale:
        return 0.0 if num <= 1e-9 * scale else float("inf")
    return num / den


def _report(op, vals, div, inside, shell, grid, r, T, domain, divmax=None):
    rng = np.random.default_rng(2024)
    unorm = float(np.max(np.linalg.norm(vals.reshape(grid.dim, -1)[:, inside.ravel()], axis=0)))
    unorm = max(unorm, 1e-300)
    tnorm = boundary_holder_norm(T, domain, r)
    sup = float(np.max(np.linalg.norm(vals.reshape(grid.dim, -1), axis=0))) / unorm
    ext_h = restricted_holder_norm(vals, grid, shell, r, rng) if np.any(shell) else 0.0
    dmax = float(np.max(np.abs(div))) if divmax is None else divmax
    div_h = restricted_holder_norm(div, grid, shell, r, rng) if np.any(shell) else 0.0
    return ExtensionReport(op, r, sup, _ratio(ext_h, tnorm, unorm), dmax / unorm, _ratio(div_h, tnorm, unorm))


def extend_P(u, atlas: BoundaryAtlas, grid: Grid, r: float = 0.5, report: bool = True) -> Extension:
    """Extension through the normal trace ``(u·n) n``; ``Pu = u`` on the closed domain."""
    vals, div, inside, shell, T = _extend(u, atlas, grid, "P")
    rep = _report("P", vals, div, inside, shell, grid, r, T, atlas.domain) if report else None
    return Extension("P", grid, vals, div, float(np.max(np.abs(div))), rep)


def extend_Pc(u, atlas: BoundaryAtlas, grid: Grid, r: float = 0.5, report: bool = True) -> Extension:
    """Extension through the full trace ``u``; continuous across the boundary."""
    vals, div, inside, shell, T = _extend(u, atlas, grid, "Pc")
    rep = _report("Pc", vals, div, inside, shell, grid, r, T, atlas.domain) if report else None
    return Extension("Pc", grid, vals, div, float(np.max(np.abs(div))), rep)


def extend_Pdiv(u, atlas: BoundaryAtlas, grid: Grid, r: float = 0.5, report: bool = True,
                flux_tol: float = 1e-3, shell: "ShellNeumann | None" = None) -> Extension:
    """Divergence-free extension ``Pu - χ_{V \\ Ω} ∇ψ``.

    ``ψ`` solves the Neumann problem ``Δψ = div Pu`` in the shell ``R < |x| <
    R_V`` with zero normal derivative on both spheres, discretised by finite
    volumes on a polar/spherical grid. The reported divergence is the
    finite-volume cell divergence of the extended field in the shell together
    with the interior divergence of ``u``.
    """
    dom = atlas.domain
    trace = BoundaryTrace(dom, u, grid)
    vals, div, inside, shellmask, T = _extend(u, atlas, grid, "P", trace)
    unorm = max(float(np.max(np.abs(vals))), 1e-300)
    solver = shell or ShellNeumann.for_grid(atlas, grid)
    flux = solver.boundary_flux(T)
    if abs(flux) > flux_tol * unorm * solver.inner_area:
        raise PreconditionError(
            f"net flux {flux:.3e} through the boundary is not zero; the shell Neumann problem has no solution"
        )
    sol = solver.solve(lambda x: exterior_values(atlas, T, x)[0])
    pts = grid.points()[shellmask.ravel()]
    gpsi = sol.gradient_at(pts)
    vals.reshape(grid.dim, -1)[:, shellmask.ravel()] -= gpsi.T
    int_div = float(np.max(np.abs(div[inside]))) if np.any(inside) else 0.0
    divmax = max(sol.max_cell_divergence, int_div)
    newdiv = np.where(inside, div, 0.0)
    rep = _report("Pdiv", vals, newdiv, inside, shellmask, grid, r, T, dom, divmax) if report else None
    return Extension("Pdiv", grid, vals, newdiv, divmax, rep, solver)


def extend_radial_div(u, domain: RoundDomain, grid: Grid, width: float | None = None,
                      flux_tol: float = 1e-3, shell: "ShellNeumann | None" = None) -> Extension:
    """Divergence-free extension through a radially constant copy of the full trace.

    Outside Ω the field is ``η(r) u(R x/|x|) - ∇ψ`` on ``R < r < R + width``,
    with ``η`` a smooth step from 1 to 0 and ``ψ`` the shell Neumann
    correction. The normal component is continuous across ``∂Ω`` and the field
    vanishes beyond the shell. The transition scale is ``width`` rather than
    the chart radius, which matters on coarse grids.
    """
    R = domain.radius
    if width is None:
        width = 0.5 * grid.extent - R - 4 * grid.h
    if width < 2 * grid.h:
        raise ConfigurationError("no room for the extension shell inside the box")
    trace = BoundaryTrace(domain, u, grid)
    inside = domain.node_mask(grid)
    vals = _interior_values(u, grid, inside)

    def F(x):
        x = np.atleast_2d(x)
        r = np.linalg.norm(x, axis=-1)
        y = R * x / np.where(r > 0, r, 1.0)[:, None]
        return _radial_step(r, R, 0.8 * width)[:, None] * trace(y)

    if shell is None:
        nr = max(6, int(np.ceil(width / grid.h)))
        nang = max(24, int(np.ceil(2 * np.pi * (R + width) / grid.h)))
        nang += nang % 2
        shell = ShellNeumann(domain.dim, R, R + width, nr, nang, quad=2 if domain.dim == 3 else 3)
    unorm = max(float(np.max(np.abs(vals))), 1e-300)
    flux = shell.boundary_flux(trace)
    if abs(flux) > flux_tol * unorm * shell.inner_area:
        raise PreconditionError(f"net flux {flux:.3e} through the boundary is not zero")
    sol = shell.solve(F)
    r = np.sqrt(sum(c * c for c in np.broadcast_arrays(*grid.coords())))
    band = (~inside) & (r < R + width)
    pts = grid.points()[band.ravel()]
    vals.reshape(grid.dim, -1)[:, band.ravel()] = (F(pts) - sol.gradient_at(pts)).T
    div = _interior_divergence(u, grid, inside)
    int_div = float(np.max(np.abs(div[inside]))) if np.any(inside) else 0.0
    return Extension("radial", grid, vals, np.where(inside, div, 0.0),
                     max(sol.max_cell_divergence, int_div), None, shell)


# -- shell Neumann problem ---------------------------------------------------


@dataclass
class ShellSolution:
    solver: "ShellNeumann"
    psi: np.ndarray  # cell-centred potential
    cell_divergence: np.ndarray
    _interp: list

    @property
    def max_cell_divergence(self) -> float:
        return float(np.max(np.abs(self.cell_divergence)))

    def gradient_at(self, x: np.ndarray) -> np.ndarray:
        q = self.solver.to_spherical(x)
        return np.stack([f(q) for f in self._interp], axis=-1)


class ShellNeumann:
    """Finite-volume Laplacian on ``R_in < r < R_out`` in polar or spherical cells."""

    def __init__(self, dim: int, r_in: float, r_out: float, nr: int, nang: int, quad: int = 3):
        self.dim = dim
        self.r_in, self.r_out = r_in, r_out
        self.nr = nr
        self.re = np.linspace(r_in, r_out, nr + 1)
        self.rc = 0.5 * (self.re[1:] + self.re[:-1])
        gx, gw = leggauss(quad)
        self._gx, self._gw = gx, gw
        if dim == 2:
            self.nt = nang
            self.te = np.linspace(0, 2 * np.pi, nang + 1)
            self.tc = 0.5 * (self.te[1:] + self.te[:-1])
            self.shape = (nr, nang)
        else:
            self.nt = max(nang // 2, 4)
            self.nphi = nang
            self.te = np.linspace(0, np.pi, self.nt + 1)
            self.tc = 0.5 * (self.te[1:] + self.te[:-1])
            self.pe = np.linspace(0, 2 * np.pi, nang + 1)
            self.pc = 0.5 * (self.pe[1:] + self.pe[:-1])
            self.shape = (nr, self.nt, nang)
        self._assemble()

    @classmethod
    def for_grid(cls, atlas: BoundaryAtlas, grid: Grid) -> "ShellNeumann":
        R, RV = atlas.domain.radius, atlas.outer_radius
        nr = max(8, int(np.ceil(2 * (RV - R) / grid.h)))
        if grid.dim == 2:
            nang = max(64, int(2 ** np.ceil(np.log2(2 * np.pi * RV / (0.5 * grid.h)))))
            return cls(2, R, RV, nr, nang)
        nang = max(24, int(np.ceil(2 * np.pi * RV / grid.h)))
        nang += nang % 2
        return cls(3, R, RV, max(6, nr // 2), nang, quad=2)

    @property
    def inner_area(self) -> float:
        return 2 * np.pi * self.r_in if self.dim == 2 else 4 * np.pi * self.r_in**2

    # geometry helpers
    def to_spherical(self, x):
        r = np.linalg.norm(x, axis=-1)
        if self.dim == 2:
            t = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
            return np.stack([r, t], -1)
        t = np.arccos(np.clip(x[:, 2] / np.where(r > 0, r, 1.0), -1, 1))
        p = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        return np.stack([r, t, p], -1)

    def _basis(self, t, p=None):
        if self.dim == 2:
            er = np.stack([np.cos(t), np.sin(t)], -1)
            et = np.stack([-np.sin(t), np.cos(t)], -1)
            return er, et
        st, ct, sp_, cp = np.sin(t), np.cos(t), np.sin(p), np.cos(p)
        er = np.stack([st * cp, st * sp_, ct], -1)
        et = np.stack([ct * cp, ct * sp_, -st], -1)
        ep = np.stack([-sp_, cp, np.zeros_like(t)], -1)
        return er, et, ep

    def _nodes(self, lo, hi):
        """Gauss nodes and weights mapped onto each interval [lo_k, hi_k]."""
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        return mid[:, None] + half[:, None] * self._gx[None], half[:, None] * self._gw[None]

    @staticmethod
    def _stencil(links):
        """COO triplets of the two-point flux stencil for each (cell a, cell b, coefficient) link."""
        a = np.concatenate([l[0] for l in links])
        b = np.concatenate([l[1] for l in links])
        c = np.concatenate([l[2] for l in links])
        rows = np.concatenate([a, a, b, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([-c, c, -c, c])
        return rows, cols, vals

    def _assemble(self):
        re, rc = self.re, self.rc
        nr = self.nr
        if self.dim == 2:
            nt = self.nt
            dt = self.te[1] - self.te[0]
            vol = 0.5 * (re[1:] ** 2 - re[:-1] ** 2)[:, None] * dt * np.ones(nt)
            idx = np.arange(nr * nt).reshape(nr, nt)
            links = []
            if nr > 1:
                c = re[1:-1] * dt / (rc[1:] - rc[:-1])
                links.append((idx[:-1].ravel(), idx[1:].ravel(), np.repeat(c, nt)))
            c = (re[1:] - re[:-1]) / (rc * dt)
            links.append((idx.ravel(), np.roll(idx, -1, axis=1).ravel(), np.repeat(c, nt)))
            rows, cols, vals = self._stencil(links)
        else:
            nt, npp = self.nt, self.nphi
            dp = self.pe[1] - self.pe[0]
            dth = self.te[1] - self.te[0]
            cosd = np.cos(self.te[:-1]) - np.cos(self.te[1:])
            vol = ((re[1:] ** 3 - re[:-1] ** 3) / 3)[:, None, None] * cosd[None, :, None] * dp * np.ones(npp)
            idx = np.arange(nr * nt * npp).reshape(nr, nt, npp)
            A_r = []
            for k in range(1, nr):
                c = re[k] ** 2 * cosd * dp / (rc[k] - rc[k - 1])
                A_r.append((idx[k - 1].ravel(), idx[k].ravel(), np.repeat(c, npp)))
            for j in range(1, nt):
                area = np.sin(self.te[j]) * dp * 0.5 * (re[1:] ** 2 - re[:-1] ** 2)
                c = area / (rc * dth)
                A_r.append((idx[:, j - 1].ravel(), idx[:, j].ravel(), np.repeat(c, npp)))
            for l in range(npp):
                area = dth * 0.5 * (re[1:] ** 2 - re[:-1] ** 2)
                c = area[:, None] / (rc[:, None] * np.sin(self.tc)[None, :] * dp)
                A_r.append((idx[:, :, l].ravel(), idx[:, :, (l + 1) % npp].ravel(), c.ravel()))
            rows, cols, vals = self._stencil(A_r)
        n = int(np.prod(self.shape))
        L = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
        # pin the largest cell: with a compatible right-hand side its dropped equation holds automatically
        self._pin = int(np.argmax(vol.ravel()))
        M = L.tolil()
        M[self._pin, :] = 0.0
        M[self._pin, self._pin] = 1.0
        self.L = L
        self._M = M.tocsc()
        self.vol = vol
        self._lu = spla.splu(self._M)

    # fluxes of a vector field through every cell face
    def _face_fluxes(self, F: Callable):
        re = self.re
        if self.dim == 2:
            nt = self.nt
            tg, tw = self._nodes(self.te[:-1], self.te[1:])  # (nt, q)
            er, _ = self._basis(tg.ravel())
            Fr = np.empty((self.nr + 1, nt))
            for k, r in enumerate(re):
                v = np.sum(F(r * er) * er, axis=-1).reshape(tg.shape)
                Fr[k] = r * np.sum(v * tw, axis=1)
            rg, rw = self._nodes(re[:-1], re[1:])  # (nr, q)
            Ft = np.empty((self.nr, nt))
            er_e, et_e = self._basis(self.te[:-1])
            for j in range(nt):
                pts = rg.ravel()[:, None] * er_e[j][None]
                v = (F(pts) @ et_e[j]).reshape(rg.shape)
                Ft[:, j] = np.sum(v * rw, axis=1)
            return Fr, Ft
        nt, npp = self.nt, self.nphi
        tg, tw = self._nodes(self.te[:-1], self.te[1:])
        pg, pw = self._nodes(self.pe[:-1], self.pe[1:])
        q = self._gx.size
        # radial faces: quadrature over (theta, phi) per cell
        T = np.broadcast_to(tg[:, None, :, None], (nt, npp, q, q))
        Pp = np.broadcast_to(pg[None, :, None, :], (nt, npp, q, q))
        W = tw[:, None, :, None] * pw[None, :, None, :] * np.sin(T)
        er, _, _ = self._basis(T.ravel(), Pp.ravel())
        Fr = np.empty((self.nr + 1, nt, npp))
        for k, r in enumerate(re):
            v = np.sum(F(r * er) * er, axis=-1).reshape(T.shape)
            Fr[k] = r * r * np.sum(v * W, axis=(2, 3))
        rg, rw = self._nodes(re[:-1], re[1:])
        # theta faces
        Ft = np.zeros((self.nr, nt + 1, npp))
        Rg = np.broadcast_to(rg[:, None, :, None], (self.nr, npp, q, q))
        Pg = np.broadcast_to(pg[None, :, None, :], (self.nr, npp, q, q))
        Wt = rw[:, None, :, None] * pw[None, :, None, :] * Rg
        for j in range(1, nt):
            t = np.full(Rg.size, self.te[j])
            er, et, _ = self._basis(t, Pg.ravel())
            v = np.sum(F(Rg.ravel()[:, None] * er) * et, axis=-1).reshape(Rg.shape)
            Ft[:, j] = np.sin(self.te[j]) * np.sum(v * Wt, axis=(2, 3))
        # phi faces
        Fp = np.empty((self.nr, nt, npp))
        Rg2 = np.broadcast_to(rg[:, None, :, None], (self.nr, nt, q, q))
        Tg2 = np.broadcast_to(tg[None, :, None, :], (self.nr, nt, q, q))
        Wp = rw[:, None, :, None] * tw[None, :, None, :] * Rg2
        for l in range(npp):
            p = np.full(Rg2.size, self.pe[l])
            er, _, ep = self._basis(Tg2.ravel(), p)
            v = np.sum(F(Rg2.ravel()[:, None] * er) * ep, axis=-1).reshape(Rg2.shape)
            Fp[:, :, l] = np.sum(v * Wp, axis=(2, 3))
        return Fr, Ft, Fp

    def _net_outflow(self, fluxes):
        if self.dim == 2:
            Fr, Ft = fluxes
            return (Fr[1:] - Fr[:-1]) + (np.roll(Ft, -1, axis=1) - Ft)
        Fr, Ft, Fp = fluxes
        return (Fr[1:] - Fr[:-1]) + (Ft[:, 1:] - Ft[:, :-1]) + (np.roll(Fp, -1, axis=2) - Fp)

    def boundary_flux(self, T: Callable) -> float:
        """Outward flux of the boundary values ``T`` through the inner sphere."""
        if self.dim == 2:
            tg, tw = self._nodes(self.te[:-1], self.te[1:])
            er, _ = self._basis(tg.ravel())
            v = np.sum(T(self.r_in * er) * er, axis=-1).reshape(tg.shape)
            return float(self.r_in * np.sum(v * tw))
        nt, npp = self.nt, self.nphi
        tg, tw = self._nodes(self.te[:-1], self.te[1:])
        pg, pw = self._nodes(self.pe[:-1], self.pe[1:])
        q = self._gx.size
        Tt = np.broadcast_to(tg[:, None, :, None], (nt, npp, q, q))
        Pp = np.broadcast_to(pg[None, :, None, :], (nt, npp, q, q))
        W = tw[:, None, :, None] * pw[None, :, None, :] * np.sin(Tt)
        er, _, _ = self._basis(Tt.ravel(), Pp.ravel())
        v = np.sum(T(self.r_in * er) * er, axis=-1).reshape(Tt.shape)
        return float(self.r_in**2 * np.sum(v * W))

    def solve(self, F: Callable) -> ShellSolution:
        """Potential ``ψ`` with ``Δψ = div F`` in the shell and zero Neumann data."""
        b = self._net_outflow(self._face_fluxes(F)).ravel()
        vol = self.vol.ravel()
        b_shift = b - vol * b.sum() / vol.sum()
        rhs = b_shift.copy()
        rhs[self._pin] = 0.0
        psi = self._lu.solve(rhs)
        for _ in range(2):  # iterative refinement; cell volumes are tiny so residuals matter
            psi += self._lu.solve(rhs - self._M @ psi)
        psi -= psi.mean()
        cell_div = (b - self.L @ psi) / vol
        return ShellSolution(self, psi.reshape(self.shape), cell_div.reshape(self.shape),
                             self._gradient_interpolants(psi.reshape(self.shape)))

    def _gradient_interpolants(self, psi):
        re, rc = self.re, self.rc
        # radial face gradients, zero on both spheres
        gr_face = np.zeros((self.nr + 1,) + psi.shape[1:])
        gr_face[1:-1] = (psi[1:] - psi[:-1]) / (rc[1:] - rc[:-1]).reshape((-1,) + (1,) * (psi.ndim - 1))
        gr = 0.5 * (gr_face[1:] + gr_face[:-1])
        if self.dim == 2:
            dt = self.te[1] - self.te[0]
            gt = (np.roll(psi, -1, axis=1) - np.roll(psi, 1, axis=1)) / (2 * dt) / rc[:, None]
            er, et = self._basis(self.tc)
            G = gr[..., None] * er[None] + gt[..., None] * et[None]
            tpad = np.concatenate([[self.tc[-1] - 2 * np.pi], self.tc, [self.tc[0] + 2 * np.pi]])
            rpad = np.concatenate([[self.r_in], rc, [self.r_out]])
            out = []
            for a in range(2):
                g = G[..., a]
                g = np.concatenate([g[:, -1:], g, g[:, :1]], axis=1)
                g = np.concatenate([g[:1], g, g[-1:]], axis=0)
                out.append(RegularGridInterpolator((rpad, tpad), g, bounds_error=False, fill_value=None))
            return out
        dth = self.te[1] - self.te[0]
        dp = self.pe[1] - self.pe[0]
        pt = np.concatenate([psi[:, :1], psi, psi[:, -1:]], axis=1)
        gt = (pt[:, 2:] - pt[:, :-2]) / (2 * dth) / rc[:, None, None]
        gt[:, 0] *= 2.0
        gt[:, -1] *= 2.0
        gp = (np.roll(psi, -1, axis=2) - np.roll(psi, 1, axis=2)) / (2 * dp)
        gp = gp / (rc[:, None, None] * np.sin(self.tc)[None, :, None])
        T, Pp = np.meshgrid(self.tc, self.pc, indexing="ij")
        er, et, ep = self._basis(T, Pp)
        G = gr[..., None] * er[None] + gt[..., None] * et[None] + gp[..., None] * ep[None]
        rpad = np.concatenate([[self.r_in], rc, [self.r_out]])
        tpad = np.concatenate([[0.0], self.tc, [np.pi]])
        ppad = np.concatenate([[self.pc[-1] - 2 * np.pi], self.pc, [self.pc[0] + 2 * np.pi]])
        out = []
        for a in range(3):
            g = G[..., a]
            g = np.concatenate([g[:, :, -1:], g, g[:, :, :1]], axis=2)
            g = np.concatenate([g[:, :1], g, g[:, -1:]], axis=1)
            g = np.concatenate([g[:1], g, g[-1:]], axis=0)
            out.append(RegularGridInterpolator((rpad, tpad, ppad), g, bounds_error=False, fill_value=None))
        return out
