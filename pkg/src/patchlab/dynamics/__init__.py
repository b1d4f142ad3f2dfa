"""Lagrangian transport of vorticity, tangent fields and the patch boundary."""
from .axisym import AxisymFlow, AxisymState, MeridianGrid, axisym_bound, ring_state
from .desk3d import DeskRun, desk_setup, run_desk, swirling_ellipsoid
from .diagnostics import DiagnosticsRow, RunContext, diagnostics, gronwall_envelope_check
from .flow import LATTICE, TUBE, WALL, ContourModel, DeskModel, FlowState, GridModel, advance, cfl_dt, seed_particles
from .invariants import cross_invariant_drift, levelset_boundary_norm, omega_dot_n
from .runner import Integration, integrate

__all__ = [
    "AxisymFlow", "AxisymState", "MeridianGrid", "axisym_bound", "ring_state",
    "DeskRun", "desk_setup", "run_desk", "swirling_ellipsoid",
    "DiagnosticsRow", "RunContext", "diagnostics", "gronwall_envelope_check",
    "LATTICE", "TUBE", "WALL", "ContourModel", "DeskModel", "FlowState", "GridModel", "advance", "cfl_dt",
    "seed_particles", "cross_invariant_drift", "levelset_boundary_norm", "omega_dot_n", "Integration", "integrate",
]
