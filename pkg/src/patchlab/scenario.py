"""Turn a scenario config into objects, run it and write the run directory.

Run directory layout::

    config.json        resolved scenario (every default filled in)
    timeseries.csv     one diagnostics row per sample
    snapshots/         vorticity snapshots (and planar marker rings) per sample
    envelope.csv       Gronwall envelope fit, or the reason it was skipped
    phase.csv          free-space ellipse runs: measured and predicted rotation rate
    axisym.csv         axisymmetric runs: vorticity bound per sample
    desk.csv           3-D runs: omega.n discrepancy, cross drift, wall tangency per step
    status.json        completion flag; ``partial`` is true when a step was refused
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .dynamics.axisym import AxisymFlow, MeridianGrid, axisym_bound, ring_state
from .dynamics.desk3d import swirling_ellipsoid
from .dynamics.diagnostics import (
    MIN_ROWS,
    DiagnosticsRow,
    RunContext,
    diagnostics,
    eulerian_snapshot,
    gronwall_envelope_check,
)
from .dynamics.flow import ContourModel, DeskModel, GridModel, _uniform, cfl_dt, seed_particles
from .dynamics.invariants import cross_invariant_drift, omega_dot_n
from .dynamics.runner import integrate
from .errors import ConfigurationError, StepError
from .fieldops import RoundDomain, build_grid, write_snapshot
from .patch import Profile, QuadricLevelSet, VortexPatch, tangent_system_from_levelset

EXIT_PARTIAL = 3


@dataclass
class RunOutcome:
    out: Path
    rows: list
    completed: bool
    error: str | None = None
    extras: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if self.completed else EXIT_PARTIAL


def build_patch(cfg: ScenarioConfig) -> VortexPatch:
    p, d = cfg.patch, cfg.dim
    axes = tuple(float(a) for a in p.semi_axes) if p.semi_axes else (float(p.radius),) * d
    center = tuple(float(c) for c in p.center)
    if d == 3 and p.swirl is not None:
        return swirling_ellipsoid(center, axes, p.swirl, p.outer, p.r)
    return VortexPatch(QuadricLevelSet(center, axes), Profile.from_spec(d, p.inner), Profile.from_spec(d, p.outer),
                       p.r)


@dataclass
class PlanarSetup:
    """Objects for a 2-D, free-space or 3-D particle run."""

    patch: VortexPatch
    window: RoundDomain
    domain: RoundDomain | None
    run_grid: object
    ctx: RunContext
    state: object
    model: object


def _constant(profile: Profile) -> float:
    return float(sum(c for c, _ in profile.components[0].terms))


def planar_setup(cfg: ScenarioConfig) -> PlanarSetup:
    g, d = cfg.grid, cfg.dim
    run_grid = build_grid(d, g.extent, g.n)
    diag_grid = build_grid(d, g.extent, g.diagnostics_n)
    part_grid = build_grid(d, g.extent, g.particles_n)
    window = RoundDomain(d, cfg.domain.radius)
    for grd in (run_grid, diag_grid, part_grid):
        window.check_fits(grd)
    patch = build_patch(cfg)
    system = tangent_system_from_levelset(patch, window, diag_grid, blend_cells=cfg.system.blend_cells,
                                          s=cfg.system.s)
    it = cfg.integrator
    state = seed_particles(patch, window, part_grid, system, lattice=it.lattice, tube=it.tube, wall=it.wall,
                           tube_offset=diag_grid.h, markers=it.markers if d == 2 else 0)
    free = cfg.mode == "free-space"
    domain = None if free else window
    if d == 3:
        model = DeskModel(patch, window, run_grid)
    elif _uniform(patch.inner) and _uniform(patch.outer):
        wi = _constant(patch.inner)
        we = _constant(patch.outer)
        model = ContourModel(wi - we, we, domain)
    else:
        model = GridModel(patch, window, run_grid)
    ctx = RunContext(patch, window, diag_grid, system, r=patch.r, free=free, far_from_patch=4 * diag_grid.h,
                     seed=cfg.seed)
    return PlanarSetup(patch, window, domain, run_grid, ctx, state, model)


# -- writers ----------------------------------------------------------------------------


def _write_rows(path: Path, rows: list[DiagnosticsRow]) -> None:
    with open(path, "w") as fh:
        fh.write(DiagnosticsRow.header() + "\n")
        for r in rows:
            fh.write(r.csv_row() + "\n")


def _write_envelope(path: Path, rows, global_bound: bool) -> dict:
    if len(rows) < MIN_ROWS:
        path.write_text(f"status\ninsufficient rows ({len(rows)} < {MIN_ROWS})\n")
        return {"envelope": "skipped"}
    rep = gronwall_envelope_check(rows, global_bound=global_bound)
    path.write_text(rep.to_csv())
    return {"envelope": "passed" if rep.passed() else "failed"}


def _finish(out: Path, cfg: ScenarioConfig, rows, completed: bool, error, started: float, extras: dict) -> RunOutcome:
    _write_rows(out / "timeseries.csv", rows)
    extras.update(_write_envelope(out / "envelope.csv", rows, cfg.mode != "3d-desk"))
    status = {"scenario": cfg.name, "mode": cfg.mode, "completed": completed, "partial": not completed,
              "error": error, "samples": len(rows)}
    status.update({k: v for k, v in extras.items() if isinstance(v, (int, float, str, bool)) or v is None})
    (out / "status.json").write_text(json.dumps(status, indent=2, sort_keys=True) + "\n")
    return RunOutcome(out, rows, completed, error, extras)


# -- runs ------------------------------------------------------------------------------


def _run_particles(cfg: ScenarioConfig, out: Path) -> RunOutcome:
    started = time.time()
    su = planar_setup(cfg)
    snaps = out / "snapshots"
    snaps.mkdir(exist_ok=True)
    rows = []
    desk = []

    def sample(state):
        row = diagnostics(state, su.ctx)
        rows.append(row)
        om = eulerian_snapshot(state, su.ctx)[0]
        write_snapshot(snaps / f"omega_{state.steps:06d}.bin", om, su.ctx.grid, state.t)
        if state.ring is not None:
            np.savetxt(snaps / f"ring_{state.steps:06d}.csv", state.ring, delimiter=",", header="x,y",
                       comments="", fmt="%.12g")
        if cfg.dim == 3:
            desk.append((state.steps, state.t, omega_dot_n(state, su.window, su.patch.r).discrepancy,
                         cross_invariant_drift(state)))
        return row

    it = cfg.integrator
    h = su.run_grid.h
    if cfg.dim == 3:
        dt = cfl_dt(su.state, su.model, h, it.dt_factor)
        t_end = it.steps * dt
    else:
        dt, t_end = None, it.t_end
    res = integrate(su.state, su.model, h, t_end, dt=dt, dt_factor=it.dt_factor, domain=su.domain,
                    sample_every=it.sample_every, sample=sample, track_angle=cfg.mode == "free-space")
    extras = {"steps": res.steps, "dt": res.dt, "reparametrizations": res.state.reparams}
    if cfg.mode == "free-space" and cfg.patch.kind == "ellipse" and len(res.angles) > 1:
        a, b = cfg.patch.semi_axes
        w = float(cfg.patch.inner)
        expected = w * a * b / (a + b) ** 2
        rate = res.rotation_rate()
        rel = abs(rate - expected) / abs(expected)
        (out / "phase.csv").write_text("t_end,measured_rate,expected_rate,relative_error\n"
                                       f"{res.state.t:.12g},{rate:.12g},{expected:.12g},{rel:.12g}\n")
        extras.update(rotation_rate=rate, expected_rate=expected, rate_error=rel)
    if desk:
        with open(out / "desk.csv", "w") as fh:
            fh.write("step,t,omega_n_discrepancy,cross_drift\n")
            for s, t, disc, drift in desk:
                fh.write(f"{s},{t:.12g},{disc:.12g},{drift:.12g}\n")
        extras["max_omega_n_discrepancy"] = max(d[2] for d in desk)
    return _finish(out, cfg, rows, res.completed, res.error, started, extras)


def _run_axisym(cfg: ScenarioConfig, out: Path) -> RunOutcome:
    started = time.time()
    g, p, it = cfg.grid, cfg.patch, cfg.integrator
    mg = MeridianGrid(cfg.domain.rmax, cfg.domain.zmax, g.nr, g.nz)
    flow = AxisymFlow(mg)
    per_cell = 2
    st = ring_state(mg, tuple(p.center), p.radius, p.xi, per_cell)
    area = mg.dr * mg.dz / per_cell**2
    bound = axisym_bound(st, mg)
    dt = flow.cfl_dt(st, it.dt_factor)
    nsteps = max(1, math.ceil(it.t_end / dt - 1e-9))
    dt = it.t_end / nsteps
    rows = [flow.diagnostics(st, area)]
    completed, error = True, None
    for k in range(nsteps):
        try:
            st = flow.advance(st, dt)
        except StepError as exc:
            completed, error = False, str(exc)
            break
        if (k + 1) % it.sample_every == 0:
            rows.append(flow.diagnostics(st, area))
    with open(out / "axisym.csv", "w") as fh:
        fh.write("t,omega_sup,bound,holds\n")
        for r in rows:
            fh.write(f"{r.t:.12g},{r.omega_sup:.12g},{bound:.12g},{int(r.omega_sup <= bound)}\n")
    extras = {"steps": st.steps, "dt": dt, "bound": bound,
              "bound_holds": all(r.omega_sup <= bound for r in rows)}
    return _finish(out, cfg, rows, completed, error, started, extras)


def run_scenario(cfg: ScenarioConfig, out) -> RunOutcome:
    """Run ``cfg`` and write the run directory ``out`` (created if needed)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    if cfg.mode == "axisym":
        return _run_axisym(cfg, out)
    if cfg.mode in ("2d", "free-space", "3d-desk"):
        return _run_particles(cfg, out)
    raise ConfigurationError(f"unknown mode {cfg.mode!r}")
