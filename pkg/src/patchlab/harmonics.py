"""Harmonic polynomial bases used for boundary traces and Neumann potentials.

In 3-D the homogeneous harmonic polynomials of degree l are found as the
null space of the Laplacian acting on degree-l monomials. Everything is kept
in monomial coefficients so values, gradients and Hessians are plain matrix
products.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np


@lru_cache(maxsize=8)
def monomials(dim: int, degree: int) -> np.ndarray:
    """Exponent tuples with total degree <= ``degree``, graded then lexicographic."""
    out = []
    for tot in range(degree + 1):
        for e in product(range(tot + 1), repeat=dim):
            if sum(e) == tot:
                out.append(e)
    return np.array(out, dtype=int)


def monomial_matrix(x: np.ndarray, exps: np.ndarray) -> np.ndarray:
    """``M[p, k] = prod_a x[p, a] ** exps[k, a]``."""
    deg = int(exps.max()) if exps.size else 0
    M = np.ones((x.shape[0], exps.shape[0]))
    for a in range(x.shape[1]):
        pw = x[:, a : a + 1] ** np.arange(deg + 1)[None, :]
        M *= pw[:, exps[:, a]]
    return M


@lru_cache(maxsize=8)
def derivative_operator(dim: int, degree: int, axis: int) -> np.ndarray:
    """Matrix acting on monomial coefficient vectors as ``∂/∂x_axis``."""
    exps = monomials(dim, degree)
    index = {tuple(e): k for k, e in enumerate(exps)}
    D = np.zeros((len(exps), len(exps)))
    for k, e in enumerate(exps):
        if e[axis] == 0:
            continue
        f = list(e)
        f[axis] -= 1
        D[index[tuple(f)], k] = e[axis]
    return D


@lru_cache(maxsize=8)
def harmonic_basis(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient columns of harmonic polynomials of degrees 1..degree and their degrees."""
    exps = monomials(dim, degree)
    tot = exps.sum(axis=1)
    lap = sum(derivative_operator(dim, degree, a) @ derivative_operator(dim, degree, a) for a in range(dim))
    cols, degs = [], []
    for l in range(1, degree + 1):
        sel = np.flatnonzero(tot == l)
        A = lap[:, sel]
        _, sv, vt = np.linalg.svd(A, full_matrices=True)
        rank = int(np.sum(sv > 1e-9 * max(sv.max(initial=0.0), 1.0)))
        null = vt[rank:].T
        C = np.zeros((len(exps), null.shape[1]))
        C[sel] = null
        cols.append(C)
        degs += [l] * null.shape[1]
    return np.concatenate(cols, axis=1), np.array(degs)


class HarmonicPolynomial:
    """Scalar polynomial ``p(x / scale) * scale`` held in monomial coefficients."""

    def __init__(self, dim: int, degree: int, coeffs: np.ndarray, scale: float = 1.0):
        self.dim = dim
        self.degree = degree
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.scale = float(scale)
        self._exps = monomials(dim, degree)
        D = [derivative_operator(dim, degree, a) for a in range(dim)]
        self._grad = [Da @ self.coeffs for Da in D]
        self._hess = [[D[a] @ (D[b] @ self.coeffs) for b in range(dim)] for a in range(dim)]

    def _M(self, x):
        return monomial_matrix(np.asarray(x, dtype=float) / self.scale, self._exps)

    def value(self, x) -> np.ndarray:
        return self.scale * (self._M(x) @ self.coeffs)

    def grad(self, x) -> np.ndarray:
        M = self._M(x)
        return np.stack([M @ g for g in self._grad], axis=-1)

    def hessian(self, x) -> np.ndarray:
        M = self._M(x)
        H = np.empty((M.shape[0], self.dim, self.dim))
        for a in range(self.dim):
            for b in range(self.dim):
                H[:, a, b] = M @ self._hess[a][b]
        return H / self.scale


class SphereFit:
    """Least-squares fit of scalar data on a sphere by harmonic polynomials.

    Restricted to the sphere these are the spherical harmonics, so this is a
    truncated spherical-harmonic expansion (constant term included).
    """

    def __init__(self, radius: float, points: np.ndarray, degree: int = 8):
        self.radius = float(radius)
        self.degree = degree
        basis, self.degrees = harmonic_basis(3, degree)
        exps = monomials(3, degree)
        const = np.zeros((len(exps), 1))
        const[0, 0] = 1.0
        self.basis = np.concatenate([const, basis], axis=1)
        self._exps = exps
        A = monomial_matrix(points / self.radius, exps) @ self.basis
        self._pinv = np.linalg.pinv(A, rcond=1e-10)

    def fit(self, values: np.ndarray) -> np.ndarray:
        """Coefficients for each trailing column of ``values`` (shape (m,) or (m, c))."""
        return self._pinv @ values

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        # project to the sphere: the fit represents a function of direction only
        u = x / np.linalg.norm(x, axis=-1, keepdims=True)
        mc = self.basis @ coeffs
        out = np.empty((len(u),) + mc.shape[1:])
        for s in range(0, len(u), 8192):
            out[s : s + 8192] = monomial_matrix(u[s : s + 8192], self._exps) @ mc
        return out


class SphereTable:
    """Bicubic (theta, phi) interpolation of a fitted function on the sphere.

    Evaluating the harmonic expansion at many points is costly, so it is
    tabulated once on a latitude-longitude grid.
    """

    def __init__(self, fit: SphereFit, coeffs: np.ndarray, nth: int = 97, nph: int = 192):
        from scipy.interpolate import RectBivariateSpline

        th = np.linspace(0.0, np.pi, nth)
        ph = np.linspace(0.0, 2 * np.pi, nph, endpoint=False)
        pad = 3
        php = np.concatenate([ph[-pad:] - 2 * np.pi, ph, ph[:pad] + 2 * np.pi])
        T, P = np.meshgrid(th, php, indexing="ij")
        pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
        vals = fit.evaluate(coeffs, pts).reshape(T.shape + np.shape(coeffs)[1:])
        vals = vals.reshape(T.shape + (-1,))
        self.ncomp = vals.shape[-1]
        self.scalar = np.ndim(coeffs) == 1
        self.splines = [RectBivariateSpline(th, php, vals[..., c], kx=3, ky=3) for c in range(self.ncomp)]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        x = np.asarray(points, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        th = np.arccos(np.clip(x[:, 2] / np.where(r > 0, r, 1.0), -1.0, 1.0))
        ph = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2 * np.pi)
        out = np.stack([s.ev(th, ph) for s in self.splines], axis=-1)
        return out[:, 0] if self.scalar else out


class CircleFit:
    """Trigonometric interpolation of periodic data sampled at uniform angles."""

    def __init__(self, m: int):
        self.m = m

    def fit(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfft(values, axis=0) / self.m

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        th = np.arctan2(points[:, 1], points[:, 0])
        k = np.arange(coeffs.shape[0])
        w = np.full(k.shape, 2.0)
        w[0] = 1.0
        if self.m % 2 == 0:
            w[-1] = 1.0
        ph = np.exp(1j * th[:, None] * k[None, :]) * w
        return (ph @ coeffs).real
