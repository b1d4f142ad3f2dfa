"""Per-sample diagnostics of a run and the Gronwall envelope check."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..biot_savart import StaticReport, static_estimate_report, velocity_from_vorticity
from ..config import stream
from ..errors import AdmissibilityError, PreconditionError
from ..fieldops import Grid, RoundDomain
from ..patch import TangentSystem, VortexPatch
from .flow import (
    LATTICE,
    FlowState,
    _uniform,
    eulerian_indicator,
    eulerian_tangent_fields,
    eulerian_vorticity,
    free_velocity_field,
    scatter_to_points,
)
from .invariants import cross_invariant_drift, levelset_boundary_norm
from .ring import ring_area

MIN_ROWS = 50


@dataclass
class DiagnosticsRow:
    """One sample of the time series; ``X`` and ``ratio`` follow the static estimate."""

    t: float
    lip: float
    omega_sup: float
    winv_sup: float
    w_holder: float
    conormal: float
    omega_n: float
    X: float
    area: float
    cross_drift: float
    boundary_norm: float
    ratio: float

    COLUMNS = ("t", "lip", "omega_sup", "winv_sup", "w_holder", "conormal", "omega_n", "X", "area",
               "cross_drift", "boundary_norm", "ratio")

    def __post_init__(self):
        if not self.X >= 1.0:
            raise PreconditionError(f"X must be at least 1, got {self.X}")
        if not self.area > 0.0:
            raise PreconditionError(f"patch area must be positive, got {self.area}")

    def csv_row(self) -> str:
        d = asdict(self)
        return ",".join(f"{d[c]:.12g}" for c in self.COLUMNS)

    @classmethod
    def header(cls) -> str:
        return ",".join(cls.COLUMNS)


@dataclass
class RunContext:
    """What diagnostics need besides the state.

    ``window`` is the region the Eulerian fields live on; it is the domain
    itself unless the run is in free space.
    """

    patch: VortexPatch
    window: RoundDomain
    grid: Grid
    system: TangentSystem
    r: float = 0.5
    free: bool = False
    extension: str = "radial"
    far_from_patch: float = 0.0
    seed: int = 0
    _far: np.ndarray | None = field(default=None, repr=False)

    def drift_index(self, state: FlowState) -> np.ndarray:
        """Lattice particles initially away from the patch boundary (where ∇v is smooth)."""
        if self._far is None:
            dist = np.abs(self.patch.levelset.distance_proxy(state.x0))
            self._far = np.flatnonzero((state.kind == LATTICE) & (dist > self.far_from_patch))
        return self._far


class _Gridded:
    def __init__(self, fields, s):
        self.fields = fields
        self.s = s


def eulerian_snapshot(state: FlowState, ctx: RunContext):
    """``(ω, v, w-fields, χ_P, profiles)`` on the diagnostics grid."""
    grid, win, patch = ctx.grid, ctx.window, ctx.patch
    om = eulerian_vorticity(state, patch, grid, win)
    if ctx.free:
        vel = free_velocity_field(om, win, grid)
    else:
        vel = velocity_from_vorticity(om, win, grid, extension=ctx.extension)
    fields = eulerian_tangent_fields(state, ctx.system, win)
    if state.steps == 0:
        return om, vel, fields, None, None
    chi = eulerian_indicator(state, patch, grid) * win.node_mask(grid)
    profiles = None
    if not (_uniform(patch.inner) and _uniform(patch.outer)):
        pts = grid.points()
        inside = win.node_mask(grid).ravel()
        src = pts.copy()
        src[inside] = scatter_to_points(state.x, state.x0, pts[inside])
        bi, be = patch.inner(src), patch.outer(src)
        if bi.ndim == 1:
            profiles = (bi.reshape(grid.shape), be.reshape(grid.shape))
        else:
            profiles = (np.moveaxis(bi, -1, 0).reshape((3,) + grid.shape),
                        np.moveaxis(be, -1, 0).reshape((3,) + grid.shape))
    return om, vel, fields, chi, profiles


def static_report_for(state: FlowState, ctx: RunContext) -> StaticReport:
    om, vel, fields, chi, profiles = eulerian_snapshot(state, ctx)
    return static_estimate_report(vel, om, _Gridded(fields, ctx.system.s), ctx.patch, r=ctx.r,
                                  rng=stream(ctx.seed, "holder-pairs"), chi=chi, profiles=profiles)


def patch_measure(state: FlowState, ctx: RunContext) -> float:
    if state.dim == 2 and state.ring is not None:
        return ring_area(state.ring)
    chi = eulerian_indicator(state, ctx.patch, ctx.grid)
    return float(chi.sum()) * ctx.grid.cell_volume


def diagnostics(state: FlowState, ctx: RunContext) -> DiagnosticsRow:
    rep = static_report_for(state, ctx)
    try:
        bnorm = levelset_boundary_norm(state, ctx.system.s).direct
    except AdmissibilityError:
        bnorm = float("nan")
    return DiagnosticsRow(
        t=state.t, lip=rep.lip, omega_sup=rep.omega_sup, winv_sup=rep.winv_sup, w_holder=rep.w_holder,
        conormal=rep.conormal, omega_n=rep.omega_n, X=rep.X, area=patch_measure(state, ctx),
        cross_drift=cross_invariant_drift(state, ctx.drift_index(state)), boundary_norm=bnorm,
        ratio=float(rep.ratio),
    )


# -- Gronwall envelope -----------------------------------------------------------------


@dataclass
class EnvelopeReport:
    """Affine envelope of ``ln ln(e + X)`` against ``∫ ‖v‖_Lip`` and an exponential bound on ``‖v‖_Lip``.

    Both envelopes are fitted by least squares on the first two thirds of
    the samples and lifted to dominate them; ``holdout_excess`` is the
    largest relative amount by which a later ``X`` (or ``‖v‖_Lip``) exceeds
    its envelope, zero when the envelope still dominates.
    """

    slope: float
    intercept: float
    dominated: bool
    holdout_excess: float
    A: float | None = None
    B: float | None = None
    lip_holdout_excess: float | None = None

    def passed(self, tol: float = 0.05) -> bool:
        ok = self.dominated and self.holdout_excess <= tol
        if self.lip_holdout_excess is not None:
            ok = ok and self.lip_holdout_excess <= tol
        return ok

    def to_csv(self) -> str:
        d = asdict(self)
        keys = list(d)
        return ",".join(keys) + "\n" + ",".join("" if d[k] is None else f"{d[k]:.12g}" for k in keys) + "\n"


def _dominating_fit(x: np.ndarray, y: np.ndarray, train: int) -> tuple[float, float]:
    """Least-squares slope (clipped at 0) on the training prefix, intercept lifted to dominate it."""
    xt, yt = x[:train], y[:train]
    slope = float(np.polyfit(xt, yt, 1)[0]) if np.ptp(xt) > 0 else 0.0
    slope = max(slope, 0.0)
    return slope, float(np.max(yt - slope * xt))


def _excess(measured: np.ndarray, bound: np.ndarray) -> float:
    if measured.size == 0:
        return 0.0
    return float(np.max(np.maximum(measured / np.maximum(bound, 1e-300) - 1.0, 0.0)))


def gronwall_envelope_check(rows: list[DiagnosticsRow], global_bound: bool = False) -> EnvelopeReport:
    """Fit the envelopes; ``global_bound`` adds ``‖v(t)‖_Lip <= A e^{Bt}`` (2-D and axisymmetric runs)."""
    if len(rows) < MIN_ROWS:
        raise PreconditionError(f"the envelope check needs at least {MIN_ROWS} rows, got {len(rows)}")
    t = np.array([r.t for r in rows])
    lip = np.array([r.lip for r in rows])
    X = np.array([r.X for r in rows])
    integral = np.concatenate([[0.0], np.cumsum(0.5 * (lip[1:] + lip[:-1]) * np.diff(t))])
    y = np.log(np.log(math.e + X))
    train = (2 * len(rows)) // 3
    slope, intercept = _dominating_fit(integral, y, train)
    dominated = bool(np.all(y[:train] <= intercept + slope * integral[:train] + 1e-12))
    X_env = np.exp(np.exp(intercept + slope * integral[train:])) - math.e
    rep = EnvelopeReport(slope, intercept, dominated, _excess(X[train:], X_env))
    if global_bound:
        B, lnA = _dominating_fit(t, np.log(np.maximum(lip, 1e-300)), train)
        rep.A, rep.B = float(np.exp(lnA)), B
        rep.lip_holdout_excess = _excess(lip[train:], rep.A * np.exp(B * t[train:]))
    return rep
