"""Short three-dimensional runs in the unit ball (32³ scale)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fieldops import Grid, RoundDomain, build_grid, domain_ball
from ..patch import Profile, QuadricLevelSet, TangentSystem, VortexPatch, tangent_system_from_levelset
from .flow import WALL, DeskModel, FlowState, advance, cfl_dt, seed_particles
from .invariants import cross_invariant_drift, omega_dot_n


def swirling_ellipsoid(center=(0.1, 0.0, 0.05), semi_axes=(0.4, 0.3, 0.35), swirl: float = 1.0,
                       background=(0.0, 0.0, 1.0), r: float = 0.5) -> VortexPatch:
    """Ellipsoid patch whose interior adds ``swirl·(-(a/b) y', (b/a) x', 0)`` to a uniform background.

    The added field is divergence-free and tangent to every ellipsoid
    ``x'²/a² + y'²/b² + z'²/c² = const`` centred at ``center``, so the
    normal component of the vorticity does not jump across the boundary.
    """
    cx, cy, _ = center
    a, b, _ = semi_axes
    k1, k2 = swirl * a / b, swirl * b / a
    ox, oy, oz = (float(v) for v in background)
    inner = Profile.from_spec(3, [
        [[-k1, [0, 1, 0]], [k1 * cy + ox, [0, 0, 0]]],
        [[k2, [1, 0, 0]], [-k2 * cx + oy, [0, 0, 0]]],
        oz,
    ])
    outer = Profile.from_spec(3, [ox, oy, oz])
    return VortexPatch(QuadricLevelSet(tuple(center), tuple(semi_axes)), inner, outer, r)


@dataclass
class DeskSetup:
    patch: VortexPatch
    domain: RoundDomain
    grid: Grid
    system: TangentSystem
    state: FlowState


def desk_setup(n: int = 32, extent: float = 4.0, radius: float = 1.0, blend_cells: float = 3.0,
               patch: VortexPatch | None = None, tube: int = 128, wall: int = 256) -> DeskSetup:
    grid = build_grid(3, extent, n)
    dom = domain_ball(radius, grid)
    patch = patch or swirling_ellipsoid()
    system = tangent_system_from_levelset(patch, dom, grid, blend_cells=blend_cells)
    state = seed_particles(patch, dom, grid, system, tube=tube, wall=wall)
    return DeskSetup(patch, dom, grid, system, state)


@dataclass
class DeskRun:
    """Per-step ω·n discrepancy, cross-invariant drift and wall tangency of a short run."""

    t: list = field(default_factory=list)
    discrepancy: list = field(default_factory=list)
    cross_drift: list = field(default_factory=list)
    wall_normal: list = field(default_factory=list)
    state: FlowState | None = None

    @property
    def max_discrepancy(self) -> float:
        return float(max(self.discrepancy, default=0.0))


def _wall_normal_component(state: FlowState) -> float:
    idx = state.select(WALL)
    if idx.size == 0:
        return 0.0
    n = state.x[idx] / np.linalg.norm(state.x[idx], axis=1, keepdims=True)
    wn = np.einsum("pnc,pc->pn", state.w[idx], n)
    scale = max(float(np.max(np.linalg.norm(state.w0[idx], axis=2))), 1e-300)
    return float(np.max(np.abs(wn))) / scale


def run_desk(setup: DeskSetup, steps: int = 10, dt_factor: float = 0.5, wall_consistent: bool = True,
             on_step=None) -> DeskRun:
    """Fixed-step run at ``dt_factor`` times the CFL limit of the initial state."""
    model = DeskModel(setup.patch, setup.domain, setup.grid, wall_consistent=wall_consistent)
    st = setup.state
    h = setup.grid.h
    dt = cfl_dt(st, model, h, dt_factor)
    out = DeskRun()
    for _ in range(steps):
        st = advance(st, model, dt, h, setup.domain)
        out.t.append(st.t)
        out.discrepancy.append(omega_dot_n(st, setup.domain).discrepancy)
        out.cross_drift.append(cross_invariant_drift(st))
        out.wall_normal.append(_wall_normal_component(st))
        if on_step is not None:
            on_step(st)
    out.state = st
    return out
