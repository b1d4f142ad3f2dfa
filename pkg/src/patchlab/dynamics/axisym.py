"""Axisymmetric flow without swirl in a cylinder.

In the meridian half-plane ``(r, z)`` the stream function solves
``∂_rr ψ - ∂_r ψ / r + ∂_zz ψ = -r ω_θ`` with ``ψ = 0`` on the axis and on the
walls, and ``u_r = -∂_z ψ / r``, ``u_z = ∂_r ψ / r``. Particles carry
``ξ = ω_θ / r``, which the flow conserves; the Eulerian vorticity is
``r`` times a normalised cloud-in-cell average of the particle values.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
from scipy import ndimage
from scipy.sparse.linalg import splu

from ..errors import ConfigurationError, StepError
from .diagnostics import DiagnosticsRow

CFL_LIMIT = 0.5


@dataclass(frozen=True)
class MeridianGrid:
    """Nodes ``r_i = i dr`` (``0..nr``) and ``z_j = -zmax + j dz`` (``0..nz``)."""

    rmax: float
    zmax: float
    nr: int
    nz: int

    def __post_init__(self):
        if self.nr < 4 or self.nz < 4 or self.rmax <= 0 or self.zmax <= 0:
            raise ConfigurationError("meridian grid needs positive extents and at least 4 cells per axis")

    @property
    def dr(self) -> float:
        return self.rmax / self.nr

    @property
    def dz(self) -> float:
        return 2 * self.zmax / self.nz

    @property
    def r(self) -> np.ndarray:
        return np.arange(self.nr + 1) * self.dr

    @property
    def z(self) -> np.ndarray:
        return -self.zmax + np.arange(self.nz + 1) * self.dz


class StreamSolver:
    """Second-order finite differences for the axisymmetric stream function, factorised once."""

    def __init__(self, grid: MeridianGrid):
        self.grid = grid
        nr, nz, dr, dz = grid.nr, grid.nz, grid.dr, grid.dz
        ni, nj = nr - 1, nz - 1
        idx = np.arange(ni * nj).reshape(ni, nj)
        r = grid.r[1:nr]
        rows, cols, vals = [], [], []
        I, J = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
        R = r[I]
        centre = -2 / dr**2 - 2 / dz**2
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(np.full(ni * nj, centre))
        for di, coef in ((1, 1 / dr**2 - 1 / (2 * R * dr)), (-1, 1 / dr**2 + 1 / (2 * R * dr))):
            ok = (I + di >= 0) & (I + di < ni)
            rows.append(idx[ok])
            cols.append(idx[np.clip(I + di, 0, ni - 1), J][ok])
            vals.append(coef[ok])
        for dj in (1, -1):
            ok = (J + dj >= 0) & (J + dj < nj)
            rows.append(idx[ok])
            cols.append(idx[I, np.clip(J + dj, 0, nj - 1)][ok])
            vals.append(np.full(ok.sum(), 1 / dz**2))
        A = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ni * nj,) * 2)
        self._lu = splu(A)
        self._r = R

    def solve(self, omega: np.ndarray) -> np.ndarray:
        """``ψ`` on all nodes for node vorticity ``ω_θ`` of shape ``(nr+1, nz+1)``."""
        g = self.grid
        rhs = -(self._r * omega[1:g.nr, 1:g.nz]).ravel()
        psi = np.zeros((g.nr + 1, g.nz + 1))
        psi[1:g.nr, 1:g.nz] = self._lu.solve(rhs).reshape(g.nr - 1, g.nz - 1)
        return psi

    def velocity(self, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        g = self.grid
        dpsi_dr, dpsi_dz = np.gradient(psi, g.dr, g.dz, edge_order=2)
        r = g.r[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ur = -dpsi_dz / r
            uz = dpsi_dr / r
        # on the axis ψ ≈ c r², so ∂_r ψ / r → 2 ψ(dr) / dr²
        ur[0] = 0.0
        uz[0] = 2 * psi[1] / g.dr**2
        return ur, uz


@dataclass
class AxisymState:
    t: float
    x: np.ndarray  # (P, 2) meridian positions (r, z)
    xi: np.ndarray  # ω_θ / r, constant along trajectories
    x0: np.ndarray
    steps: int = 0


def ring_state(grid: MeridianGrid, center: tuple[float, float], radius: float, xi0: float = 1.0,
               per_cell: int = 2) -> AxisymState:
    """Vortex ring: ``ξ = xi0`` on the meridian disk ``|(r, z) - center| < radius``."""
    rc, zc = center
    if rc - radius <= 0 or rc + radius >= grid.rmax or abs(zc) + radius >= grid.zmax:
        raise ConfigurationError("the ring cross-section must lie strictly inside the meridian rectangle")
    fr = (np.arange(grid.nr * per_cell) + 0.5) / per_cell * grid.dr
    fz = -grid.zmax + (np.arange(grid.nz * per_cell) + 0.5) / per_cell * grid.dz
    R, Z = np.meshgrid(fr, fz, indexing="ij")
    x = np.stack([R.ravel(), Z.ravel()], -1)
    xi = np.where((x[:, 0] - rc) ** 2 + (x[:, 1] - zc) ** 2 < radius**2, xi0, 0.0)
    return AxisymState(0.0, x, xi, x.copy())


def deposit(state: AxisymState, grid: MeridianGrid) -> np.ndarray:
    """``ω_θ`` on nodes: ``r`` times the cloud-in-cell average of ``ξ`` (a convex combination)."""
    fi = state.x[:, 0] / grid.dr
    fj = (state.x[:, 1] + grid.zmax) / grid.dz
    i0 = np.clip(np.floor(fi).astype(int), 0, grid.nr - 1)
    j0 = np.clip(np.floor(fj).astype(int), 0, grid.nz - 1)
    a, b = fi - i0, fj - j0
    shape = (grid.nr + 1, grid.nz + 1)
    size = shape[0] * shape[1]
    num = np.zeros(size)
    den = np.zeros(size)
    for di, wi in ((0, 1 - a), (1, a)):
        for dj, wj in ((0, 1 - b), (1, b)):
            w = wi * wj
            flat = np.ravel_multi_index((i0 + di, j0 + dj), shape)
            num += np.bincount(flat, w * state.xi, size)
            den += np.bincount(flat, w, size)
    xi = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0).reshape(shape)
    return grid.r[:, None] * xi


@dataclass
class AxisymFlow:
    grid: MeridianGrid

    def __post_init__(self):
        self.solver = StreamSolver(self.grid)

    def fields(self, state: AxisymState):
        om = deposit(state, self.grid)
        return om, self.solver.velocity(self.solver.solve(om))

    def _interp(self, u, x):
        g = self.grid
        coords = np.stack([x[:, 0] / g.dr, (x[:, 1] + g.zmax) / g.dz])
        return ndimage.map_coordinates(u, coords, order=1, mode="nearest")

    def velocity_at(self, state: AxisymState, x: np.ndarray) -> np.ndarray:
        _, (ur, uz) = self.fields(replace(state, x=x))
        return np.stack([self._interp(ur, x), self._interp(uz, x)], -1)

    def _clip(self, x):
        g = self.grid
        x = x.copy()
        x[:, 0] = np.clip(x[:, 0], 0.0, g.rmax)
        x[:, 1] = np.clip(x[:, 1], -g.zmax, g.zmax)
        return x

    def advance(self, state: AxisymState, dt: float) -> AxisymState:
        g = self.grid
        k1 = self.velocity_at(state, state.x)
        vmax = float(np.max(np.linalg.norm(k1, axis=1)))
        if vmax > 0 and dt > CFL_LIMIT * min(g.dr, g.dz) / vmax * (1 + 1e-12):
            raise StepError(f"CFL violation: dt={dt:.4g} exceeds {CFL_LIMIT * min(g.dr, g.dz) / vmax:.4g}")
        k2 = self.velocity_at(state, self._clip(state.x + 0.5 * dt * k1))
        k3 = self.velocity_at(state, self._clip(state.x + 0.5 * dt * k2))
        k4 = self.velocity_at(state, self._clip(state.x + dt * k3))
        x = self._clip(state.x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
        return replace(state, t=state.t + dt, x=x, steps=state.steps + 1)

    def cfl_dt(self, state: AxisymState, factor: float = 1.0) -> float:
        v = self.velocity_at(state, state.x)
        vmax = float(np.max(np.linalg.norm(v, axis=1)))
        return np.inf if vmax == 0 else factor * CFL_LIMIT * min(self.grid.dr, self.grid.dz) / vmax

    def lipschitz(self, ur: np.ndarray, uz: np.ndarray) -> float:
        """``sup|u| + sup|∇u|`` with the hoop strain ``u_r / r`` included."""
        g = self.grid
        drr, drz = np.gradient(ur, g.dr, g.dz, edge_order=2)
        dzr, dzz = np.gradient(uz, g.dr, g.dz, edge_order=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            hoop = ur / g.r[:, None]
        hoop[0] = drr[0]
        grad = np.sqrt(drr**2 + drz**2 + dzr**2 + dzz**2 + hoop**2)
        return float(np.max(np.hypot(ur, uz)) + np.max(grad))

    def diagnostics(self, state: AxisymState, particle_area: float) -> DiagnosticsRow:
        """Row with the quantities available for this flow; tangent-system columns are NaN.

        The vorticity ``ω_θ e_θ`` is tangent to every wall, so its normal
        component is zero, and ``X`` reduces to ``1 + ‖ω‖_∞``.
        """
        om, (ur, uz) = self.fields(state)
        osup = float(np.max(np.abs(om)))
        X = 1.0 + osup
        lip = self.lipschitz(ur, uz)
        nan = float("nan")
        return DiagnosticsRow(
            t=state.t, lip=lip, omega_sup=osup, winv_sup=nan, w_holder=nan, conormal=nan, omega_n=0.0, X=X,
            area=float(np.count_nonzero(state.xi)) * particle_area, cross_drift=nan,
            boundary_norm=nan, ratio=lip / ((1 + osup) * np.log(np.e + X)),
        )


def axisym_bound(state0: AxisymState, grid: MeridianGrid) -> float:
    """``‖ω_0 / δ‖_∞ · max δ`` with ``δ`` the distance to the axis."""
    return float(np.max(np.abs(state0.xi))) * grid.rmax
