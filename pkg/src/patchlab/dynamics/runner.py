"""Fixed-step integration loops with sampling and marker-ring maintenance."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import StepError
from ..fieldops import RoundDomain
from .flow import FlowState, advance, cfl_dt
from .ring import REPARAM_EVERY, REPARAM_RATIO, principal_angle, reparametrize, spacing_ratio


def maybe_reparametrize(state: FlowState) -> FlowState:
    """Every ``REPARAM_EVERY`` steps, respace the ring when marker spacing has become uneven."""
    if state.ring is None or state.steps % REPARAM_EVERY:
        return state
    if spacing_ratio(state.ring) <= REPARAM_RATIO:
        return state
    return replace(state, ring=reparametrize(state.ring), reparams=state.reparams + 1)


@dataclass
class Integration:
    """Outcome of ``integrate``; ``completed`` is False when a step was refused."""

    state: FlowState
    dt: float
    steps: int
    completed: bool = True
    error: str | None = None
    angles: list = field(default_factory=list)  # (t, unwrapped principal angle) per step
    samples: list = field(default_factory=list)

    def rotation_rate(self) -> float:
        """Mean angular velocity of the ring's principal axis."""
        t = np.array([a[0] for a in self.angles])
        th = np.array([a[1] for a in self.angles])
        if len(t) < 2:
            return 0.0
        return float((th[-1] - th[0]) / (t[-1] - t[0]))


def _unwrap(prev: float, new: float) -> float:
    """Continue a π-periodic angle from ``prev``."""
    return new + math.pi * round((prev - new) / math.pi)


def integrate(state: FlowState, model, h: float, t_end: float, dt: float | None = None,
              dt_factor: float = 0.5, domain: RoundDomain | None = None, sample_every: int = 0,
              sample: Callable[[FlowState], object] | None = None, track_angle: bool = False) -> Integration:
    """Advance to ``t_end`` with equal steps.

    Without ``dt`` the step is ``dt_factor`` times the CFL limit of the
    initial state, shortened so that a whole number of steps reaches
    ``t_end``. ``sample`` is called at ``t = 0`` and every ``sample_every``
    steps. A refused step (CFL breach or escaped particle) stops the loop
    and is reported rather than raised.
    """
    if dt is None:
        dt = cfl_dt(state, model, h, dt_factor)
    nsteps = max(1, math.ceil(t_end / dt - 1e-9)) if np.isfinite(dt) else 1
    dt = t_end / nsteps
    out = Integration(state, dt, 0)
    if track_angle and state.ring is not None:
        out.angles.append((state.t, principal_angle(state.ring)))
    if sample is not None:
        out.samples.append(sample(state))
    for k in range(nsteps):
        try:
            state = advance(state, model, dt, h, domain)
        except StepError as exc:
            out.completed = False
            out.error = str(exc)
            break
        state = maybe_reparametrize(state)
        out.steps = k + 1
        if track_angle and state.ring is not None:
            out.angles.append((state.t, _unwrap(out.angles[-1][1], principal_angle(state.ring))))
        if sample is not None and sample_every and (k + 1) % sample_every == 0:
            out.samples.append(sample(state))
    out.state = state
    return out
