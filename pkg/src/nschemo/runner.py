"""Time loop: repeated steps with per-step diagnostics and output hooks."""
from __future__ import annotations

from dataclasses import replace

from .diagnostics import make_record
from .stepper import PhysParams, SimState, Stepper, StepperConfig


def run(
    initial: SimState,
    params: PhysParams,
    cfg: StepperConfig,
    t_end: float | None = None,
    n_steps: int | None = None,
    hooks=(),
    cadence: int = 1,
    stepper: Stepper | None = None,
):
    """Advance ``initial`` to ``t_end`` (hit exactly) or by ``n_steps`` steps.

    Returns (final_state, records) where records[0] describes the initial
    state and records[k] the k-th accepted step.  Each hook is called as
    hook(state, record) on the initial state, every ``cadence`` steps and
    on the final state.
    """
    if (t_end is None) == (n_steps is None):
        raise ValueError("give exactly one of t_end and n_steps")
    if t_end is not None and t_end < initial.t:
        raise ValueError("t_end lies before the initial time")
    if n_steps is not None and n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    stepper = stepper or Stepper(initial.grid, params, cfg)
    state = initial
    rec = make_record(None, state, params, 0.0)
    records = [rec]
    for h in hooks:
        h(state, rec)

    done = 0
    while True:
        if n_steps is not None:
            if done >= n_steps:
                break
            cap = None
        else:
            remaining = t_end - state.t
            if remaining <= 1e-13 * max(1.0, abs(t_end)):
                break
            cap = remaining
        new, info, dt = stepper.step(state, cap)
        if cap is not None and dt == cap:
            new = replace(new, t=t_end)
        rec = make_record(state, new, params, dt, info)
        records.append(rec)
        state = new
        done += 1
        last = (n_steps is not None and done >= n_steps) or (
            t_end is not None and t_end - state.t <= 1e-13 * max(1.0, abs(t_end))
        )
        if done % cadence == 0 or last:
            for h in hooks:
                h(state, rec)
    return state, records
