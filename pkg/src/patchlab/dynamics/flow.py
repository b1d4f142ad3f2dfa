"""Lagrangian state of an evolving patch and its fourth-order time step.

Particles carry their position, vorticity, the tangent fields ``w^ν`` and
the level-set gradient ``∇φ``. Along a trajectory

    dx/dt = v,   dw/dt = (∇v) w,   d∇φ/dt = -(∇v)ᵀ ∇φ,   dω/dt = (∇v) ω

with ``dω/dt = 0`` in 2-D. The planar patch boundary is a ring of markers
advected with the particles.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator

from ..biot_savart import (
    FreeSolution,
    VelocityField,
    biot_savart,
    neumann_potential,
    velocity_from_vorticity,
)
from ..errors import ConfigurationError, StepError
from ..fieldops import Grid, RoundDomain
from ..patch import TangentSystem, VortexPatch
from .contour import contour_velocity, contour_velocity_gradient
from .ring import ellipse_ring, points_in_ring

LATTICE, TUBE, WALL = 0, 1, 2
ESCAPE_TOL = 1e-6
CFL_LIMIT = 0.5


@dataclass
class FlowState:
    """Particles (and in 2-D the boundary ring) at time ``t``.

    ``kind`` labels each particle as lattice (grid nodes inside Ω), tube
    (offset copies of the patch boundary) or wall (points on ∂Ω). Arrays
    ending in ``0`` hold the values at ``t = 0``.
    """

    t: float
    x: np.ndarray
    kind: np.ndarray
    omega: np.ndarray
    w: np.ndarray
    gphi: np.ndarray
    x0: np.ndarray
    omega0: np.ndarray
    w0: np.ndarray
    gphi0: np.ndarray
    ring: np.ndarray | None = None
    steps: int = 0
    reparams: int = 0

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def select(self, kind: int) -> np.ndarray:
        return np.flatnonzero(self.kind == kind)


def seed_particles(patch: VortexPatch, domain: RoundDomain, grid: Grid, system: TangentSystem | None,
                   lattice: bool = True, tube: int = 256, wall: int = 256, tube_offset: float | None = None,
                   markers: int = 1024) -> FlowState:
    """Initial state: lattice at grid nodes strictly inside Ω, tube and wall rings, markers on ∂P."""
    d = patch.dim
    pts, kinds = [], []
    if lattice:
        nodes = grid.points()
        nodes = nodes[domain.delta(nodes) > 0]
        pts.append(nodes)
        kinds.append(np.full(len(nodes), LATTICE))
    if tube:
        off = grid.h if tube_offset is None else tube_offset
        bp, nu = patch.levelset.boundary_samples(tube)
        for sgn in (-1.0, 1.0):
            pts.append(bp + sgn * off * nu)
            kinds.append(np.full(len(bp), TUBE))
    if wall:
        wp, _ = domain.boundary_samples(wall)
        pts.append(wp)
        kinds.append(np.full(len(wp), WALL))
    x = np.concatenate(pts) if pts else np.zeros((0, d))
    kind = np.concatenate(kinds) if kinds else np.zeros(0, dtype=int)
    omega = patch.at(x) if len(x) else np.zeros((0,) if d == 2 else (0, 3))
    if system is not None and len(x):
        w = np.transpose(system.evaluate(x), (1, 0, 2)).copy()
    else:
        w = np.zeros((len(x), 0, 3))
    gphi = patch.levelset.grad(x) if len(x) else np.zeros((0, d))
    ring = None
    if d == 2 and markers:
        ls = patch.levelset
        ring = ellipse_ring(ls.center, ls.semi_axes, markers)
    return FlowState(0.0, x, kind, omega.copy(), w, gphi.copy(), x.copy(), omega.copy(), w.copy(), gphi.copy(), ring)


# -- velocity models ---------------------------------------------------------------


class ContourField:
    """Velocity of a uniform planar patch from its marker ring.

    ``v = contour(ω_i - ω_e) + (ω_e/2) x^⊥ - ∇α``; the harmonic ``α`` cancels
    the normal velocity on the disk boundary and is absent in free space.
    """

    def __init__(self, ring, jump, omega_out, potential=None):
        self.ring = ring
        self.jump = jump
        self.omega_out = omega_out
        self.potential = potential

    def _solid(self, x):
        return 0.5 * self.omega_out * np.stack([-x[:, 1], x[:, 0]], -1)

    def at(self, x):
        x = np.atleast_2d(x)
        v = contour_velocity(x, self.ring, self.jump) + self._solid(x)
        if self.potential is not None:
            v = v - self.potential.grad(x)
        return v

    def at_and_grad(self, x):
        x = np.atleast_2d(x)
        v, J = contour_velocity_gradient(x, self.ring, self.jump)
        v = v + self._solid(x)
        J = J + 0.5 * self.omega_out * np.array([[0.0, -1.0], [1.0, 0.0]])
        if self.potential is not None:
            v = v - self.potential.grad(x)
            J = J - self.potential.hessian(x)
        return v, J


class _GridField:
    def __init__(self, vel: VelocityField):
        self.vel = vel

    def at(self, x):
        return self.vel.at(x)

    def at_and_grad(self, x):
        return self.vel.at(x), self.vel.grad_at(x)


@dataclass
class ContourModel:
    """Planar uniform patches; ``domain=None`` means free space."""

    jump: float
    omega_out: float = 0.0
    domain: RoundDomain | None = None
    samples: int = 256
    frozen = False

    def __post_init__(self):
        if self.domain is None and self.omega_out != 0.0:
            raise ConfigurationError("free-space runs need zero exterior vorticity")

    def field(self, y: dict, state: FlowState):
        ring = y["ring"]
        pot = None
        if self.domain is not None:
            pot = neumann_potential(lambda p: contour_velocity(p, ring, self.jump), self.domain, self.samples)
        return ContourField(ring, self.jump, self.omega_out, pot)


@dataclass
class GridModel:
    """Planar patches with polynomial profiles: velocity from the rebuilt Eulerian vorticity."""

    patch: VortexPatch
    domain: RoundDomain
    grid: Grid
    frozen = False

    def field(self, y: dict, state: FlowState):
        probe = _probe(state, y)
        om = eulerian_vorticity(probe, self.patch, self.grid, self.domain)
        return _GridField(velocity_from_vorticity(om, self.domain, self.grid))


class _WallConsistent:
    """Wall particles get a tangent velocity and a gradient that keeps tangent vectors tangent.

    On the sphere ``|x| = R`` an exact flow has ``v·n = 0``, hence
    ``n·(Jτ) = -v·τ / R`` for every tangent ``τ``. The interpolated gradient
    misses this by the grid error, which tilts ``w^μ × w^ν`` off the normal.
    The correction only touches the normal row on tangent columns, so
    ``tr J`` is unchanged.
    """

    def __init__(self, inner, domain: RoundDomain, wall: np.ndarray):
        self.inner = inner
        self.R = domain.radius
        self.wall = wall

    def at(self, x):
        return self.inner.at(x)

    def at_and_grad(self, x):
        v, J = self.inner.at_and_grad(x)
        if len(x) != len(self.wall) or not self.wall.any():
            return v, J
        i = self.wall
        n = x[i] / np.linalg.norm(x[i], axis=1, keepdims=True)
        vw = v[i] - np.einsum("pc,pc->p", v[i], n)[:, None] * n
        g = np.einsum("pji,pj->pi", J[i], n) + vw / self.R
        g -= np.einsum("pc,pc->p", g, n)[:, None] * n
        v = v.copy()
        J = J.copy()
        v[i] = vw
        J[i] -= n[:, :, None] * g[:, None, :]
        return v, J


@dataclass
class DeskModel:
    """3-D velocity rebuilt once per step from the particle vorticity."""

    patch: VortexPatch
    domain: RoundDomain
    grid: Grid
    extension: str = "radial"
    wall_consistent: bool = True
    frozen = True

    def field(self, y: dict, state: FlowState):
        probe = _probe(state, y)
        om = eulerian_vorticity(probe, self.patch, self.grid, self.domain)
        fld = _GridField(velocity_from_vorticity(om, self.domain, self.grid, extension=self.extension))
        if self.wall_consistent:
            fld = _WallConsistent(fld, self.domain, state.kind == WALL)
        return fld


def _probe(state: FlowState, y: dict) -> FlowState:
    """State view at an intermediate stage; stages away from ``state`` count as moved."""
    fresh = y["x"] is state.x and y["ring"] is state.ring
    return replace(state, x=y["x"], ring=y["ring"], omega=y["omega"], steps=state.steps + (0 if fresh else 1))


def free_velocity_field(omega: np.ndarray, window: RoundDomain, grid: Grid) -> VelocityField:
    """Free-space velocity on a window domain, without boundary correction."""
    sol: FreeSolution = biot_savart(np.where(window.node_mask(grid), omega, 0.0), grid, "free", with_jacobian=True)
    return VelocityField(grid, window, sol.velocity, None, sol.jacobian, sol.stream)


# -- Eulerian reconstruction ---------------------------------------------------------


def scatter_to_points(src: np.ndarray, values: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation of scattered data, nearest value outside the hull."""
    vals = values.reshape(len(src), -1)
    out = LinearNDInterpolator(src, vals)(targets)
    bad = ~np.all(np.isfinite(out), axis=1)
    if bad.any():
        out[bad] = NearestNDInterpolator(src, vals)(targets[bad])
    return out.reshape((len(targets),) + values.shape[1:])


def _uniform(profile) -> bool:
    return all(p.degree == 0 for p in profile.components)


def eulerian_vorticity(state: FlowState, patch: VortexPatch, grid: Grid, domain: RoundDomain) -> np.ndarray:
    """Vorticity on the grid, zero outside Ω.

    Untouched states reuse the initial patch. In 2-D nodes are classified
    against the marker ring; non-constant profiles are composed with the
    inverse flow map interpolated from the particles. In 3-D the particle
    vorticity is interpolated directly.
    """
    if state.steps == 0:
        return patch.vorticity(grid, domain)
    mask = domain.node_mask(grid)
    pts = grid.points()[mask.ravel()]
    if state.dim == 2:
        inside = points_in_ring(pts, state.ring)
        if _uniform(patch.inner) and _uniform(patch.outer):
            src = pts
        else:
            src = scatter_to_points(state.x, state.x0, pts)
        vals = np.where(inside, patch.inner(src), patch.outer(src))
        out = np.zeros(grid.shape)
        out[mask] = vals
        return out
    vals = scatter_to_points(state.x, state.omega, pts)
    out = np.zeros((3,) + grid.shape)
    for c in range(3):
        out[c][mask] = vals[:, c]
    return out


def eulerian_indicator(state: FlowState, patch: VortexPatch, grid: Grid) -> np.ndarray:
    """Sharp indicator of the transported patch on grid nodes."""
    if state.steps == 0:
        return patch.indicator(grid)
    pts = grid.points()
    if state.dim == 2:
        return points_in_ring(pts, state.ring).reshape(grid.shape).astype(float)
    # φ(t, x) = f(ψ^{-1}(t, x))
    back = scatter_to_points(state.x, state.x0, pts)
    return (patch.levelset(back) < 0).reshape(grid.shape).astype(float)


def eulerian_tangent_fields(state: FlowState, system: TangentSystem, domain: RoundDomain) -> np.ndarray:
    """``w^ν(t)`` on the system's grid (zero outside Ω), shape ``(N', 3, *shape)``."""
    if state.steps == 0:
        return system.fields
    grid = system.grid
    mask = domain.node_mask(grid)
    pts = grid.points()[mask.ravel()]
    vals = scatter_to_points(state.x, state.w, pts)  # (P, N', 3)
    out = np.zeros_like(system.fields)
    for n in range(out.shape[0]):
        for c in range(3):
            out[n, c][mask] = vals[:, n, c]
    return out


# -- time stepping ---------------------------------------------------------------------


def _rhs(fieldobj, y: dict, dim: int) -> dict:
    out = {}
    if y.get("ring") is not None:
        out["ring"] = fieldobj.at(y["ring"])
    x = y["x"]
    if len(x) == 0:
        out.update(x=np.zeros_like(x), w=np.zeros_like(y["w"]), gphi=np.zeros_like(y["gphi"]),
                   omega=np.zeros_like(y["omega"]))
        return out
    v, J = fieldobj.at_and_grad(x)
    out["x"] = v
    w = y["w"]
    dw = np.zeros_like(w)
    dw[:, :, :dim] = np.einsum("pij,pnj->pni", J, w[:, :, :dim])
    out["w"] = dw
    out["gphi"] = -np.einsum("pji,pj->pi", J, y["gphi"])
    if dim == 2:
        out["omega"] = np.zeros_like(y["omega"])
    else:
        out["omega"] = np.einsum("pij,pj->pi", J, y["omega"])
    return out


def _axpy(y: dict, k: dict, a: float) -> dict:
    return {key: (None if y[key] is None else y[key] + a * k[key]) for key in y}


def max_speed(fieldobj, y: dict) -> float:
    parts = [np.linalg.norm(fieldobj.at(y["ring"]), axis=1)] if y.get("ring") is not None else []
    if len(y["x"]):
        parts.append(np.linalg.norm(fieldobj.at(y["x"]), axis=1))
    return float(max((p.max() for p in parts if p.size), default=0.0))


def cfl_dt(state: FlowState, model, h: float, factor: float = 1.0) -> float:
    """``factor · 0.5 h / max|v|`` at the current state (inf when the fluid is at rest)."""
    y = _pack(state)
    vmax = max_speed(model.field(y, state), y)
    return np.inf if vmax == 0 else factor * CFL_LIMIT * h / vmax


def _pack(state: FlowState) -> dict:
    return {"x": state.x, "w": state.w, "gphi": state.gphi, "omega": state.omega, "ring": state.ring}


def advance(state: FlowState, model, dt: float, h: float, domain: RoundDomain | None = None,
            check_cfl: bool = True) -> FlowState:
    """One classical Runge–Kutta step of the particle system.

    ``h`` is the spacing used in the CFL bound ``dt <= 0.5 h / max|v|``.
    When ``domain`` is given, particles must stay in the closed domain up to
    ``1e-6`` of its diameter; in 3-D wall particles are first projected back
    onto the boundary.
    """
    if dt <= 0:
        raise StepError("time step must be positive")
    y0 = _pack(state)
    f0 = model.field(y0, state)
    d = state.dim
    k1 = _rhs(f0, y0, d)
    if check_cfl:
        speeds = [np.linalg.norm(k1[key], axis=1) for key in ("ring", "x") if key in k1 and len(k1[key])]
        vmax = float(max((sp.max() for sp in speeds), default=0.0))
        if vmax > 0 and dt > CFL_LIMIT * h / vmax * (1 + 1e-12):
            raise StepError(f"CFL violation: dt={dt:.4g} exceeds {CFL_LIMIT * h / vmax:.4g}")

    def fld(y):
        return f0 if model.frozen else model.field(y, state)

    y = _axpy(y0, k1, 0.5 * dt)
    k2 = _rhs(fld(y), y, d)
    y = _axpy(y0, k2, 0.5 * dt)
    k3 = _rhs(fld(y), y, d)
    y = _axpy(y0, k3, dt)
    k4 = _rhs(fld(y), y, d)
    new = {}
    for key, val in y0.items():
        if val is None:
            new[key] = None
            continue
        new[key] = val + dt / 6.0 * (k1[key] + 2 * k2[key] + 2 * k3[key] + k4[key])
    x = new["x"]
    if domain is not None and len(x):
        if d == 3:
            wall = state.kind == WALL
            r = np.linalg.norm(x[wall], axis=1, keepdims=True)
            x[wall] = x[wall] * (domain.radius / r)
        depth = domain.delta(x)
        if np.min(depth) < -ESCAPE_TOL * domain.diameter:
            raise StepError(f"particle left the domain (delta = {np.min(depth):.3e}); boundary flux is not controlled")
    omega = new["omega"] if d == 3 else state.omega
    return replace(state, t=state.t + dt, x=x, w=new["w"], gphi=new["gphi"], omega=omega, ring=new["ring"],
                   steps=state.steps + 1)
