"""Vortex patches, tangent vector-field systems and conormal derivatives.

A patch is the sublevel set ``{f_P < 0}`` of a quadric. Vorticity equals
one polynomial profile inside and another outside. Tangent systems are
built from ``∇f_P × e_i`` near the patch boundary, ``∇δ × e_i`` near the
domain boundary and constant fields in between. All three groups are glued
with smooth cutoffs. In 2-D every field carries three components and does
not depend on ``z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import AdmissibilityError, ConfigurationError, ConstructionError, PreconditionError
from .fieldops import Grid, RoundDomain, divergence, fibonacci_sphere, gradient
from .lp_core import bony_split, holder_norm, paraproduct, theta, theta_prime

# -- polynomial profiles ------------------------------------------------------


@dataclass(frozen=True)
class Polynomial:
    """``Σ c_k x^{e_k}`` in ``dim`` variables; ``terms`` is a tuple of (coef, exponents)."""

    dim: int
    terms: tuple = ()

    @classmethod
    def constant(cls, dim: int, c: float) -> "Polynomial":
        return cls(dim, ((float(c), (0,) * dim),))

    @classmethod
    def from_spec(cls, dim: int, spec) -> "Polynomial":
        """Accept a number or a list of ``[coef, [e1, ..., ed]]`` pairs."""
        if isinstance(spec, (int, float)):
            return cls.constant(dim, spec)
        terms = []
        for item in spec:
            c, e = item
            e = tuple(int(v) for v in e)
            if len(e) != dim or min(e, default=0) < 0:
                raise ConfigurationError(f"monomial exponents {e} do not match dimension {dim}")
            terms.append((float(c), e))
        return cls(dim, tuple(terms))

    def _eval(self, x, deriv=None):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for c, e in self.terms:
            e = list(e)
            coef = c
            if deriv is not None:
                if e[deriv] == 0:
                    continue
                coef *= e[deriv]
                e[deriv] -= 1
            term = np.full(x.shape[:-1], coef)
            for a, p in enumerate(e):
                if p:
                    term = term * x[..., a] ** p
            out = out + term
        return out

    def __call__(self, x) -> np.ndarray:
        return self._eval(x)

    def grad(self, x) -> np.ndarray:
        return np.stack([self._eval(x, a) for a in range(self.dim)], axis=-1)

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)


class Profile:
    """Scalar (2-D) or 3-vector (3-D) polynomial vorticity profile."""

    def __init__(self, components: Sequence[Polynomial]):
        self.components = tuple(components)
        self.dim = self.components[0].dim

    @classmethod
    def from_spec(cls, dim: int, spec) -> "Profile":
        if dim == 2:
            return cls([Polynomial.from_spec(2, spec)])
        if isinstance(spec, (int, float)) or len(spec) != 3:
            raise ConfigurationError("3-D profiles need three component polynomials")
        return cls([Polynomial.from_spec(3, s) for s in spec])

    @property
    def ncomp(self) -> int:
        return len(self.components)

    def __call__(self, x) -> np.ndarray:
        """Values with the component axis last; scalar profiles drop it."""
        vals = np.stack([p(x) for p in self.components], axis=-1)
        return vals[..., 0] if self.ncomp == 1 else vals

    def divergence(self, x) -> np.ndarray:
        if self.ncomp == 1:
            return np.zeros(np.shape(x)[:-1])
        return sum(p.grad(x)[..., a] for a, p in enumerate(self.components))

    def on_grid(self, grid: Grid) -> np.ndarray:
        """Node values, component axis first for vector profiles."""
        x = np.moveaxis(grid.mesh(), 0, -1)
        v = self(x)
        return v if self.ncomp == 1 else np.moveaxis(v, -1, 0)


# -- level sets ---------------------------------------------------------------


@dataclass(frozen=True)
class QuadricLevelSet:
    """``f(x) = s0² (Σ ((x - c)_i / s_i)² - 1)``, with ``s0`` the first semi-axis.

    A circle of radius ``a`` gives ``|x - c|² - a²``.
    """

    center: tuple
    semi_axes: tuple

    def __post_init__(self):
        if len(self.center) != len(self.semi_axes) or len(self.center) not in (2, 3):
            raise ConfigurationError("level-set centre and semi-axes must share a dimension of 2 or 3")
        if min(self.semi_axes) <= 0:
            raise ConfigurationError("semi-axes must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def _c(self):
        return np.asarray(self.center, dtype=float)

    @property
    def _w(self):
        s = np.asarray(self.semi_axes, dtype=float)
        return (s[0] / s) ** 2

    def __call__(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float) - self._c
        return np.sum(self._w * y * y, axis=-1) - self.semi_axes[0] ** 2

    def grad(self, x) -> np.ndarray:
        return 2.0 * self._w * (np.asarray(x, dtype=float) - self._c)

    def hessian(self) -> np.ndarray:
        return np.diag(2.0 * self._w)

    def distance_proxy(self, x) -> np.ndarray:
        """First-order signed distance ``f / |∇f|`` (exact for circles up to a factor near 1)."""
        g = np.linalg.norm(self.grad(x), axis=-1)
        return self(x) / np.maximum(g, 1e-300)

    def boundary_samples(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """Points on ``{f = 0}`` and unit normals ``∇f/|∇f|``."""
        s = np.asarray(self.semi_axes, dtype=float)
        if self.dim == 2:
            t = 2 * np.pi * np.arange(m) / m
            u = np.stack([np.cos(t), np.sin(t)], -1)
        else:
            u = fibonacci_sphere(m)
        pts = self._c + u * s
        g = self.grad(pts)
        return pts, g / np.linalg.norm(g, axis=-1, keepdims=True)

    def line_roots(self, p, d):
        """Parameters ``t`` where ``p + t d`` crosses ``{f = 0}`` (NaN when it misses)."""
        p = np.asarray(p, dtype=float) - self._c
        d = np.asarray(d, dtype=float)
        w = self._w
        A = np.sum(w * d * d, axis=-1)
        B = 2 * np.sum(w * p * d, axis=-1)
        C = np.sum(w * p * p, axis=-1) - self.semi_axes[0] ** 2
        disc = B * B - 4 * A * C
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        return (-B - sq) / (2 * A), (-B + sq) / (2 * A)

    def area(self) -> float:
        s = np.asarray(self.semi_axes, dtype=float)
        return float(np.pi * np.prod(s)) if self.dim == 2 else float(4 / 3 * np.pi * np.prod(s))


def circle(center, radius) -> QuadricLevelSet:
    return QuadricLevelSet(tuple(float(c) for c in center), (float(radius),) * len(center))


# -- vortex patch -------------------------------------------------------------


@dataclass
class VortexPatch:
    """Vorticity ``ω_0i`` on ``{f_P < 0}`` and ``ω_0e`` elsewhere in Ω."""

    levelset: QuadricLevelSet
    inner: Profile
    outer: Profile
    r: float = 0.5

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ConfigurationError(f"Hölder exponent r must lie in (0, 1), got {self.r}")
        if self.inner.ncomp != self.outer.ncomp:
            raise ConfigurationError("interior and exterior profiles differ in shape")
        pts, _ = self.levelset.boundary_samples(256)
        gmin = float(np.min(np.linalg.norm(self.levelset.grad(pts), axis=-1)))
        if gmin < 0.1:
            raise ConstructionError(f"level-set gradient {gmin:.3g} is too small on the patch boundary")

    @property
    def dim(self) -> int:
        return self.levelset.dim

    def indicator(self, grid: Grid) -> np.ndarray:
        """Sharp node indicator of the patch."""
        return (self.levelset(np.moveaxis(grid.mesh(), 0, -1)) < 0).astype(float)

    def vorticity(self, grid: Grid, domain: RoundDomain | None = None) -> np.ndarray:
        chi = self.indicator(grid)
        wi, we = self.inner.on_grid(grid), self.outer.on_grid(grid)
        om = wi * chi + we * (1 - chi)
        if domain is not None:
            om = np.where(domain.node_mask(grid), om, 0.0)
        return om

    def at(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        inside = self.levelset(x) < 0
        wi, we = self.inner(x), self.outer(x)
        if wi.ndim == 1:
            return np.where(inside, wi, we)
        return np.where(inside[:, None], wi, we)

    def normal_jump(self, samples: int = 512) -> float:
        """``max |(ω_0i - ω_0e)·ν|`` on the patch boundary (zero for 2-D scalar vorticity)."""
        if self.inner.ncomp == 1:
            return 0.0
        pts, nu = self.levelset.boundary_samples(samples)
        return float(np.max(np.abs(np.sum((self.inner(pts) - self.outer(pts)) * nu, axis=-1))))

    def check_divergence_free(self, tol: float = 1e-8) -> None:
        if self.inner.ncomp == 1:
            return
        jump = self.normal_jump()
        pts = np.random.default_rng(0).uniform(-1, 1, (200, 3))
        div = max(float(np.max(np.abs(self.inner.divergence(pts)))), float(np.max(np.abs(self.outer.divergence(pts)))))
        if jump > tol or div > tol:
            raise PreconditionError(f"patch vorticity is not divergence-free (jump {jump:.2e}, div {div:.2e})")

    def check_interior(self, domain: RoundDomain, min_gap: float) -> float:
        pts, _ = self.levelset.boundary_samples(1024 if self.dim == 2 else 2000)
        gap = float(np.min(domain.distance(pts)))
        if gap < min_gap:
            raise ConstructionError(
                f"patch boundary comes within {gap:.4g} of the domain boundary; at least {min_gap:.4g} is required"
            )
        return gap


# -- cutoffs -----------------------------------------------------------------


def _bump(s, width):
    """1 for ``|s| <= width/4``, 0 for ``|s| >= 3 width/4``, smooth in between."""
    t = 1.0 + (np.abs(s) - 0.25 * width) / (0.5 * width)
    return theta(t)


def _bump_grad(s, width, grad_s):
    t = 1.0 + (np.abs(s) - 0.25 * width) / (0.5 * width)
    return (theta_prime(t) * np.sign(s) / (0.5 * width))[..., None] * grad_s


def _cross(a, b):
    return np.cross(a, b)


def _lift3(v):
    """Planar vectors to 3-vectors with zero third component."""
    if v.shape[-1] == 3:
        return v
    return np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)


# -- tangent systems ----------------------------------------------------------


@dataclass(eq=False)
class TangentSystem:
    """A family of vector fields sampled on a grid, with the generating callables.

    ``fields`` has shape ``(N', 3, *grid.shape)``. ``funcs`` evaluate each
    field at points ``(P, dim)`` returning ``(P, 3)``; ``jacobians`` (if
    given) return ``(P, 3, dim)``.
    """

    grid: Grid
    funcs: tuple
    s: float
    fields: np.ndarray = field(init=False, repr=False)
    labels: tuple = ()
    jacobians: tuple | None = None

    def __post_init__(self):
        if len(self.funcs) < 2:
            raise ConfigurationError("a tangent system needs at least two fields")
        pts = self.grid.points()
        vals = [np.asarray(f(pts), dtype=float) for f in self.funcs]
        self.fields = np.stack([v.T.reshape((3,) + self.grid.shape) for v in vals])

    @property
    def count(self) -> int:
        return len(self.funcs)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """``(N', P, 3)`` values at points."""
        x = np.atleast_2d(x)
        return np.stack([np.asarray(f(x), dtype=float) for f in self.funcs])

    def scaled(self, lam: float) -> "TangentSystem":
        funcs = tuple((lambda f: (lambda x: lam * f(x)))(f) for f in self.funcs)
        jac = None
        if self.jacobians is not None:
            jac = tuple((lambda f: (lambda x: lam * f(x)))(f) for f in self.jacobians)
        return TangentSystem(self.grid, funcs, self.s, self.labels, jac)

    def max_normal_component(self, points: np.ndarray, normals: np.ndarray) -> float:
        vals = self.evaluate(points)
        return float(np.max(np.abs(np.einsum("npc,pc->np", vals, _lift3(normals)))))


def pairwise_cross_sum(W: np.ndarray) -> np.ndarray:
    """``Σ_{μ<ν} |w^μ × w^ν|²`` for stacked 3-vectors ``W`` of shape ``(N', 3, ...)``."""
    acc = np.zeros(W.shape[2:])
    for m in range(W.shape[0]):
        for n in range(m + 1, W.shape[0]):
            c = np.cross(W[m], W[n], axis=0)
            acc += np.sum(c * c, axis=0)
    return acc


def inverse_admissibility(W: np.ndarray) -> np.ndarray:
    """``[W]^{-1} = (2/(N'(N'-1)) Σ_{μ<ν} |w^μ × w^ν|²)^{-1/4}`` pointwise (inf where degenerate)."""
    N = W.shape[0]
    if N < 2:
        raise ConfigurationError("admissibility needs at least two fields")
    mean = 2.0 / (N * (N - 1)) * pairwise_cross_sum(W)
    with np.errstate(divide="ignore"):
        return np.where(mean > 0, mean ** -0.25, np.inf)


def admissibility(system: TangentSystem, mask: np.ndarray | None = None, strict: bool = True):
    """``([W]^{-1}`` on the grid, its sup over ``mask``)."""
    winv = inverse_admissibility(system.fields)
    region = winv if mask is None else winv[mask]
    sup = float(np.max(region)) if region.size else 0.0
    if strict and not np.isfinite(sup):
        raise AdmissibilityError("all cross products vanish at some node; the system is not admissible")
    return winv, sup


def _cutoffs(levelset: QuadricLevelSet, domain: RoundDomain, width: float):
    """``η_P, η_Ω, η_m`` and their gradients as callables on points."""

    def eta_P(x):
        return _bump(levelset.distance_proxy(x), width)

    def grad_dp(x):
        g = levelset.grad(x)
        gn = np.linalg.norm(g, axis=-1, keepdims=True)
        H = levelset.hessian()
        f = levelset(x)[..., None]
        # ∇(f/|∇f|) = ∇f/|∇f| - f H ∇f / |∇f|³
        return g / gn - f * (g @ H) / gn**3

    def eta_P_grad(x):
        return _bump_grad(levelset.distance_proxy(x), width, grad_dp(x))

    def eta_O(x):
        return _bump(domain.distance(x), width)

    def eta_O_grad(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        return _bump_grad(domain.distance(x), width, -x / np.maximum(r, 1e-300))

    def eta_m(x):
        return (1 - eta_P(x)) * (1 - eta_O(x))

    def eta_m_grad(x):
        return -eta_P_grad(x) * (1 - eta_O(x))[..., None] - eta_O_grad(x) * (1 - eta_P(x))[..., None]

    return (eta_P, eta_P_grad), (eta_O, eta_O_grad), (eta_m, eta_m_grad)


def tangent_system_from_levelset(patch: VortexPatch, domain: RoundDomain, grid: Grid,
                                 blend_cells: float = 8.0, s: float | None = None) -> TangentSystem:
    """Admissible system tangent to both ``∂P`` and ``∂Ω``.

    2-D: ``{η_P ∇f×e₃, η_m e₁, η_m e₂, η_Ω ∇δ×e₃, e₃}``. 3-D: ``η_P ∇f×e_i``,
    ``η_m e_i`` and ``η_Ω ∇δ×e_i`` for ``i = 1, 2, 3``. The cutoffs switch
    over a band of ``blend_cells`` grid spacings.
    """
    if patch.dim != domain.dim or grid.dim != domain.dim:
        raise ConfigurationError("patch, domain and grid dimensions differ")
    width = blend_cells * grid.h
    patch.check_interior(domain, 0.75 * width)
    (eP, geP), (eO, geO), (em, gem) = _cutoffs(patch.levelset, domain, width)
    ls = patch.levelset
    d = grid.dim
    E = np.eye(3)
    funcs, jacs, labels = [], [], []

    def grad_f3(x):
        return _lift3(ls.grad(x))

    H3 = np.zeros((3, d))
    H3[:d, :d] = ls.hessian()

    def cross_const(vec_fn, vec_jac, e):
        # (a × e) with a = vec_fn(x): jacobian columns are (∂_j a) × e
        def val(x):
            return np.cross(vec_fn(x), e)

        def jac(x):
            J = vec_jac(x)  # (P, 3, d)
            return np.stack([np.cross(J[:, :, j], e) for j in range(d)], axis=-1)

        return val, jac

    def scaled(eta, geta, val, jac):
        def v(x):
            return eta(x)[..., None] * val(x)

        def J(x):
            return eta(x)[:, None, None] * jac(x) + val(x)[:, :, None] * geta(x)[:, None, :]

        return v, J

    gf_jac = lambda x: np.broadcast_to(H3, (len(np.atleast_2d(x)), 3, d))  # noqa: E731

    def gdelta(x):
        return _lift3(domain.grad_delta(x))

    gd = np.zeros((3, d))
    gd[:d, :d] = -np.eye(d) / domain.radius
    gdelta_jac = lambda x: np.broadcast_to(gd, (len(np.atleast_2d(x)), 3, d))  # noqa: E731

    def const(e):
        return (lambda x: np.broadcast_to(e, (len(np.atleast_2d(x)), 3)).copy(),
                lambda x: np.zeros((len(np.atleast_2d(x)), 3, d)))

    axes_cross = [2] if d == 2 else [0, 1, 2]
    for i in axes_cross:
        v, J = scaled(eP, geP, *cross_const(grad_f3, gf_jac, E[i]))
        funcs.append(v), jacs.append(J), labels.append(f"etaP*gradf x e{i + 1}")
    for i in range(d):
        v, J = scaled(em, gem, *const(E[i]))
        funcs.append(v), jacs.append(J), labels.append(f"etam*e{i + 1}")
    for i in axes_cross:
        v, J = scaled(eO, geO, *cross_const(gdelta, gdelta_jac, E[i]))
        funcs.append(v), jacs.append(J), labels.append(f"etaO*graddelta x e{i + 1}")
    if d == 2:
        v, J = const(E[2])
        funcs.append(v), jacs.append(J), labels.append("e3")
    system = TangentSystem(grid, tuple(funcs), patch.r if s is None else s, tuple(labels), tuple(jacs))
    admissibility(system, domain.node_mask(grid))
    return system


def system_from_callables(grid: Grid, funcs: Sequence[Callable], s: float = 0.5) -> TangentSystem:
    """Wrap arbitrary fields (planar outputs are lifted to three components)."""
    wrapped = tuple((lambda f: (lambda x: _lift3(np.asarray(f(np.atleast_2d(x)), dtype=float))))(f) for f in funcs)
    return TangentSystem(grid, wrapped, s)


# -- normal field ------------------------------------------------------------


def patch_normal_field(patch: VortexPatch, domain: RoundDomain, width: float) -> Callable:
    """Callable ``ñ`` equal to ``∇f/|∇f|`` on ``∂P`` and to the outward normal on ``∂Ω``."""
    patch.check_interior(domain, 1.5 * width)
    (eP, _), (eO, _), _ = _cutoffs(patch.levelset, domain, width)
    ls = patch.levelset

    def ntilde(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = ls.grad(x)
        nu = g / np.maximum(np.linalg.norm(g, axis=-1, keepdims=True), 1e-300)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        no = x / np.maximum(r, 1e-300)
        return eP(x)[:, None] * nu + eO(x)[:, None] * no

    return ntilde


# -- conormal derivatives -----------------------------------------------------


def box_cutoff(grid: Grid, domain: RoundDomain) -> np.ndarray:
    """Smooth radial cutoff, 1 on a neighbourhood of Ω and 0 near the box edge."""
    R = domain.radius
    gap = 0.5 * grid.extent - R
    r = np.sqrt(sum(c * c for c in np.broadcast_arrays(*grid.coords())))
    start = R + 0.2 * gap
    return theta(1.0 + (r - start) / (0.6 * gap))


def _route(a: np.ndarray, b: np.ndarray, chi_divw: np.ndarray, grid: Grid) -> np.ndarray:
    """``Σ_i ∂_i(a^i b)`` for ``a = w χ`` with ``div a = χ div w`` (scalar ``b``).

    Written as ``Σ_i ∂_i[T_{a^i} b + R(a^i, b)] + Σ_i T_{∂_i b} a^i + T_b(χ div w)``.
    """
    gb = gradient(b, grid)
    inner = np.zeros((grid.dim,) + grid.shape)
    out = np.zeros(grid.shape)
    for i in range(grid.dim):
        tab, _, rem = bony_split(a[i], b, grid)
        inner[i] = tab + rem
        out += paraproduct(gb[i], a[i], grid)
    out += divergence(inner, grid)
    out += paraproduct(b, chi_divw, grid)
    return out


def conormal_derivative(fields: np.ndarray, patch: VortexPatch, grid: Grid, domain: RoundDomain,
                        profiles: tuple[np.ndarray, np.ndarray] | None = None,
                        chi: np.ndarray | None = None, omega=None) -> list[np.ndarray]:
    """``⟨∇, w ⊗ ω_0⟩`` for each field, via the paraproduct route on each region.

    The vorticity is split as ``ω_0i χ_P + ω_0e χ_{Ω∖P}``; the profiles are
    multiplied by a smooth box cutoff so that they are periodic. ``profiles``
    and ``chi`` override the polynomial profiles and the sharp patch
    indicator (used for transported patches). Returns one scalar field per
    ``w`` in 2-D and one 3-vector field per ``w`` in 3-D.
    """
    zeta = box_cutoff(grid, domain)
    chi_P = patch.indicator(grid) if chi is None else chi
    chi_O = domain.node_mask(grid).astype(float)
    chi_E = chi_O * (1 - chi_P)
    if profiles is None:
        bi, be = patch.inner.on_grid(grid), patch.outer.on_grid(grid)
    else:
        bi, be = profiles
    d = grid.dim
    out = []
    for w in fields:
        wp = w[:d]
        divw = divergence(wp, grid)
        res = []
        comps_i = [bi] if bi.ndim == d else list(bi)
        comps_e = [be] if be.ndim == d else list(be)
        for ci, ce in zip(comps_i, comps_e):
            val = _route(wp * chi_P, zeta * ci, chi_P * divw, grid)
            val += _route(wp * chi_E, zeta * ce, chi_E * divw, grid)
            res.append(val)
        out.append(res[0] if len(res) == 1 else np.stack(res))
    return out


def conormal_spectral(fields: np.ndarray, omega: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """Naive spectral ``Σ_i ∂_i(w^i ω)`` of the sampled product (for smooth data)."""
    d = grid.dim
    out = []
    for w in fields:
        wp = w[:d]
        if omega.ndim == d:
            out.append(divergence(wp * omega[None], grid))
        else:
            out.append(np.stack([divergence(wp * omega[c][None], grid) for c in range(omega.shape[0])]))
    return out


@dataclass
class ConormalReport:
    """C^{s-1} norms of the conormal derivatives and the bound's right-hand side.

    ``rhs = ‖w‖_∞ (‖ω_0i‖_s + ‖ω_0e‖_s) + ‖ω_0‖_∞ ‖w‖_s`` per field;
    ``ratio`` is ``norm / rhs``, an empirical value for the constant.
    """

    s: float
    norms: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray = field(init=False)

    def __post_init__(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            self.ratio = np.where(self.rhs > 0, self.norms / self.rhs, 0.0)


def conormal_report(system: TangentSystem, patch: VortexPatch, grid: Grid, domain: RoundDomain,
                    s: float | None = None) -> ConormalReport:
    s = system.s if s is None else s
    con = conormal_derivative(system.fields, patch, grid, domain)
    zeta = box_cutoff(grid, domain)
    bi, be = patch.inner.on_grid(grid), patch.outer.on_grid(grid)
    ni = holder_norm(zeta * bi, grid, s)
    ne = holder_norm(zeta * be, grid, s)
    om = patch.vorticity(grid, domain)
    osup = float(np.max(np.abs(om)))
    norms, rhs = [], []
    for w, c in zip(system.fields, con):
        norms.append(holder_norm(c, grid, s - 1.0))
        wsup = float(np.max(np.linalg.norm(w, axis=0)))
        rhs.append(wsup * (ni + ne) + osup * holder_norm(w, grid, s))
    return ConormalReport(s, np.array(norms), np.array(rhs))


# -- discrete identity div(w χ_P) = χ_P div w ------------------------------------


def cut_cell_identity_residual(w: Callable, levelset: QuadricLevelSet, grid: Grid, quad: int = 8,
                               eps: float = 1e-6) -> np.ndarray:
    """Cell-wise ``(1/h²)[Σ_faces ∫_{face∩P} w·n - ∫_{cell∩P} div w]`` in 2-D.

    Cells are centred on grid nodes. Face pieces inside P come from the
    exact line/quadric intersections; the area integral uses Gauss
    quadrature on the exact vertical extent of ``cell ∩ P`` per column.
    Only cells cut by ``∂P`` can be nonzero. Returns the node array.
    """
    if grid.dim != 2:
        raise ConfigurationError("the cut-cell identity check is implemented in 2-D")
    h = grid.h
    gx, gw = np.polynomial.legendre.leggauss(quad)
    X, Y = np.moveaxis(grid.mesh(), 0, -1).reshape(-1, 2).T
    # restrict to cells the boundary may cross
    near = np.abs(levelset.distance_proxy(np.stack([X, Y], -1))) < 1.5 * h
    out = np.zeros(grid.shape)
    idx = np.flatnonzero(near)
    for k in idx:
        cx, cy = X[k], Y[k]
        x0, x1, y0, y1 = cx - h / 2, cx + h / 2, cy - h / 2, cy + h / 2
        total = 0.0
        # vertical faces: x fixed, integrate w_x over y with sign
        for xf, sgn in ((x1, 1.0), (x0, -1.0)):
            total += sgn * _segment_flux(w, levelset, np.array([xf, y0]), np.array([0.0, 1.0]), h, 0, gx, gw)
        for yf, sgn in ((y1, 1.0), (y0, -1.0)):
            total += sgn * _segment_flux(w, levelset, np.array([x0, yf]), np.array([1.0, 0.0]), h, 1, gx, gw)
        total -= _cut_area_integral(w, levelset, x0, x1, y0, y1, gx, gw, eps)
        out.ravel()[k] = total / h**2
    return out


def _inside_intervals(levelset, p, d, length):
    """Sub-intervals of ``[0, length]`` along ``p + t d`` lying in P."""
    t0, t1 = levelset.line_roots(p, d)
    if not np.isfinite(t0):
        return []
    lo, hi = max(0.0, min(t0, t1)), min(length, max(t0, t1))
    return [(lo, hi)] if hi > lo else []


def _segment_flux(w, levelset, p, d, length, comp, gx, gw):
    total = 0.0
    for lo, hi in _inside_intervals(levelset, p, d, length):
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
        pts = p[None] + t[:, None] * d[None]
        total += 0.5 * (hi - lo) * float(np.sum(gw * w(pts)[:, comp]))
    return total


def _cut_area_integral(w, levelset, x0, x1, y0, y1, gx, gw, eps):
    def divw(pts):
        acc = np.zeros(len(pts))
        for a in range(2):
            dx = np.zeros(2)
            dx[a] = eps
            acc += (w(pts + dx)[:, a] - w(pts - dx)[:, a]) / (2 * eps)
        return acc

    # split the x-range where the boundary has a vertical tangent so each piece is smooth
    brk = [x0, x1]
    s = np.asarray(levelset.semi_axes, dtype=float)
    c = np.asarray(levelset.center, dtype=float)
    for xv in (c[0] - s[0], c[0] + s[0]):
        if x0 < xv < x1:
            brk.append(xv)
    # and where it crosses the top and bottom edges, where the clipped extent has a kink
    for yf in (y0, y1):
        for t in levelset.line_roots(np.array([x0, yf]), np.array([1.0, 0.0])):
            if np.isfinite(t) and 0 < t < x1 - x0:
                brk.append(x0 + float(t))
    brk = sorted(brk)
    total = 0.0
    for a, b in zip(brk[:-1], brk[1:]):
        xs = 0.5 * (a + b) + 0.5 * (b - a) * gx
        for xq, wq in zip(xs, gw):
            for lo, hi in _inside_intervals(levelset, np.array([xq, y0]), np.array([0.0, 1.0]), y1 - y0):
                ys = y0 + 0.5 * (lo + hi) + 0.5 * (hi - lo) * gx
                pts = np.stack([np.full(ys.shape, xq), ys], -1)
                total += 0.5 * (b - a) * wq * 0.5 * (hi - lo) * float(np.sum(gw * divw(pts)))
    return total
