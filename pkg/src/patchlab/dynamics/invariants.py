"""Quantities conserved or reconstructed along particle trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AdmissibilityError
from ..fieldops import RoundDomain
from ..lp_core import pair_holder_seminorm
from .flow import TUBE, WALL, FlowState


def _omega3(omega: np.ndarray) -> np.ndarray:
    """Vorticity as 3-vectors (planar scalar vorticity points along e₃)."""
    if omega.ndim == 1:
        out = np.zeros((len(omega), 3))
        out[:, 2] = omega
        return out
    return omega


def _pairs(n: int):
    return [(m, k) for m in range(n) for k in range(m + 1, n)]


def cross_invariant(state: FlowState, mu: int, nu: int, initial: bool = False) -> np.ndarray:
    """``(w^μ × w^ν)·ω`` per particle (at ``t = 0`` when ``initial``)."""
    w = state.w0 if initial else state.w
    om = state.omega0 if initial else state.omega
    return np.einsum("pc,pc->p", np.cross(w[:, mu], w[:, nu]), _omega3(om))


def cross_invariant_drift(state: FlowState, index: np.ndarray | None = None) -> float:
    """Largest ``|I(t) - I(0)|`` over all pairs and the selected particles, relative to ``max |I(0)|``."""
    idx = np.arange(len(state.x)) if index is None else np.asarray(index)
    if idx.size == 0 or state.w.shape[1] < 2:
        return 0.0
    drift, scale = 0.0, 0.0
    sub = _sub(state, idx)
    for mu, nu in _pairs(state.w.shape[1]):
        now = cross_invariant(sub, mu, nu)
        then = cross_invariant(sub, mu, nu, initial=True)
        drift = max(drift, float(np.max(np.abs(now - then))))
        scale = max(scale, float(np.max(np.abs(then))))
    return drift / scale if scale > 0 else drift


def _sub(state: FlowState, idx: np.ndarray) -> FlowState:
    from dataclasses import replace

    return replace(state, x=state.x[idx], kind=state.kind[idx], omega=state.omega[idx], w=state.w[idx],
                   gphi=state.gphi[idx], x0=state.x0[idx], omega0=state.omega0[idx], w0=state.w0[idx],
                   gphi0=state.gphi0[idx])


def _cross_sum(w: np.ndarray) -> np.ndarray:
    """``Σ_{μ<ν} |w^μ × w^ν|`` per particle."""
    acc = np.zeros(len(w))
    for mu, nu in _pairs(w.shape[1]):
        acc += np.linalg.norm(np.cross(w[:, mu], w[:, nu]), axis=1)
    return acc


def _holder_on_points(values: np.ndarray, points: np.ndarray, r: float, max_pairs: int = 200_000) -> float:
    """``sup|g| + [g]_r`` over particle pairs (all pairs, or a seeded subset when many)."""
    n = len(points)
    if n == 0:
        return 0.0
    vals = values.reshape(n, -1)
    if n * (n - 1) // 2 <= max_pairs:
        i, j = np.triu_indices(n, 1)
        pairs = np.stack([i, j], 1)
    else:
        pairs = np.random.default_rng(0).integers(0, n, size=(max_pairs, 2))
    return float(np.max(np.linalg.norm(vals, axis=1))) + pair_holder_seminorm(vals, points, r, pairs)


@dataclass
class NormalVorticity:
    """``ω·n`` at wall particles from the closed formula and by direct sampling."""

    points: np.ndarray
    direct: np.ndarray
    formula: np.ndarray
    holder: float

    @property
    def discrepancy(self) -> float:
        """``max|formula - direct| / max|direct|`` (absolute when ω·n vanishes)."""
        diff = float(np.max(np.abs(self.formula - self.direct))) if len(self.direct) else 0.0
        scale = float(np.max(np.abs(self.direct))) if len(self.direct) else 0.0
        return diff / scale if scale > 0 else diff


def omega_dot_n(state: FlowState, domain: RoundDomain, r: float = 0.5) -> NormalVorticity:
    """Normal vorticity on ∂Ω at the wall particles.

    The formula divides ``Σ_{μ<ν}|w^μ_0 × w^ν_0| ω_0·n`` at the initial
    point by ``Σ_{μ<ν}|w^μ × w^ν|`` at the current point; the direct value
    is the transported vorticity dotted with the current outward normal.
    """
    idx = state.select(WALL)
    x, x0 = state.x[idx], state.x0[idx]
    d = state.dim
    n_now = np.zeros((len(idx), 3))
    n_now[:, :d] = domain.normal(x) / np.linalg.norm(x, axis=1, keepdims=True) * domain.radius
    n_then = np.zeros((len(idx), 3))
    n_then[:, :d] = domain.normal(x0) / np.linalg.norm(x0, axis=1, keepdims=True) * domain.radius
    om, om0 = _omega3(state.omega[idx]), _omega3(state.omega0[idx])
    direct = np.einsum("pc,pc->p", om, n_now)
    den = _cross_sum(state.w[idx])
    if np.any(den <= 1e-300):
        raise AdmissibilityError("all cross products vanish at a wall particle")
    formula = _cross_sum(state.w0[idx]) * np.einsum("pc,pc->p", om0, n_then) / den
    return NormalVorticity(x, direct, formula, _holder_on_points(direct, x, r) if len(idx) else 0.0)


@dataclass
class LevelSetNorm:
    """C^s norms of ``∇φ`` near the patch boundary from the two routes."""

    direct: float
    formula: float
    max_pointwise: float

    @property
    def relative_gap(self) -> float:
        return abs(self.formula - self.direct) / max(abs(self.direct), 1e-300)


def gradient_from_crosses(state: FlowState, idx: np.ndarray) -> np.ndarray:
    """``∇φ = |∇f| / Σ|w^μ_0 × w^ν_0| · Σ (-1)^{α_{μν}} (w^μ × w^ν)`` at the given particles.

    The signs ``α_{μν}`` come from the orientation of ``w^μ_0 × w^ν_0``
    against ``∇f`` at ``t = 0`` and are never re-evaluated.
    """
    w, w0 = state.w[idx], state.w0[idx]
    g0 = np.zeros((len(idx), 3))
    g0[:, : state.dim] = state.gphi0[idx]
    den = _cross_sum(w0)
    if np.any(den <= 1e-300):
        raise AdmissibilityError("all initial cross products vanish at a tube particle")
    acc = np.zeros((len(idx), 3))
    for mu, nu in _pairs(w.shape[1]):
        c0 = np.cross(w0[:, mu], w0[:, nu])
        sign = np.where(np.einsum("pc,pc->p", c0, g0) < 0, -1.0, 1.0)
        acc += sign[:, None] * np.cross(w[:, mu], w[:, nu])
    out = np.linalg.norm(g0, axis=1)[:, None] / den[:, None] * acc
    return out[:, : state.dim]


def levelset_boundary_norm(state: FlowState, s: float = 0.5) -> LevelSetNorm:
    """``‖∇φ‖_{C^s}`` over the tube particles, from the transported gradient and from the cross products."""
    idx = state.select(TUBE)
    if idx.size == 0:
        raise AdmissibilityError("no tube particles around the patch boundary")
    x = state.x[idx]
    direct = state.gphi[idx]
    formula = gradient_from_crosses(state, idx)
    gap = float(np.max(np.linalg.norm(formula - direct, axis=1)) / np.max(np.linalg.norm(direct, axis=1)))
    return LevelSetNorm(_holder_on_points(direct, x, s), _holder_on_points(formula, x, s), gap)
