"""Valley-filling online provisioning for a uniform deadline.

Each slot commits a capacity m_t (and executes x_t = m_t) from a small LP
over the next D+1 slots. Outside valleys the window total tracks the
delta-delayed workload, holding back up to delta slots of work; when the
delayed curve crosses under the raw curve and the looked-ahead area is
negative, the span is a valley and the window total switches to the full
released workload so the held-back work is poured into the dip. The final
D+1 slots of the (padded) horizon always run in flush mode so everything
released finishes by then.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .lp import solve_capacity_window
from .schedule import CapacitySchedule, CostParams
from .workload import curve_values, delayed_curve

MODE_LOPT = "LOPT"
MODE_VOPT = "VOPT"
MODE_FLUSH = "FLUSH"


@dataclass
class VfwState:
    """Rolling per-slot state of one run."""

    deadline: int
    lookahead: int
    t: int = 0
    m_prev: float = 0.0
    cum_capacity: float = 0.0   # committed m_1..m_{t-1}
    cum_released: float = 0.0   # L up to t
    cum_delayed: float = 0.0    # delta-delayed curve up to t
    cum_due: float = 0.0        # deadline curve up to t
    valley: int = 0
    history_m: list = field(default_factory=list)

    def window_length(self, horizon: int) -> int:
        return min(self.deadline, horizon - self.t) + 1


def detect_valley(released, delayed, t_s: int, lookahead: int) -> bool:
    """Decide whether the crossing at slot t_s opens a valley.

    The area of the delayed curve over [t_s, t_s + lookahead] relative to its
    level at t_s must be strictly negative; that whole segment is already
    released history, so the decision needs no future knowledge.
    """
    del released  # the crossing itself is the caller's precondition
    seg = curve_values(delayed)[t_s - 1: t_s + lookahead]
    return float((seg - seg[0]).sum()) < 0.0


def _commit(state: VfwState, params: CostParams, target: float, due_min: float,
            window: int, prefix_due=None) -> float:
    lows = np.zeros(window)
    lows[0] = max(0.0, due_min)
    if prefix_due is not None:
        # Future dues cannot demand more than this window plans in total; the
        # remainder is covered when later windows extend further out.
        for j in range(1, min(window, len(prefix_due))):
            lows[j] = min(max(0.0, prefix_due[j]), max(0.0, target))
    plan = solve_capacity_window(
        window, state.m_prev, target, params.energy_coeff, params.beta,
        params.fleet, lows,
    )
    return float(plan[0])


def lopt_step(state: VfwState, params: CostParams, window: int | None = None,
              prefix_due=None) -> float:
    """Local smoothing step: window total tracks the delayed workload."""
    window = window or state.deadline + 1
    target = state.cum_delayed - state.cum_capacity
    due_min = state.cum_due - state.cum_capacity
    return _commit(state, params, target, due_min, window, prefix_due)


def vopt_step(state: VfwState, params: CostParams, window: int | None = None,
              prefix_due=None) -> float:
    """Valley-filling step: window total covers everything released."""
    window = window or state.deadline + 1
    target = state.cum_released - state.cum_capacity
    due_min = state.cum_due - state.cum_capacity
    return _commit(state, params, target, due_min, window, prefix_due)


def run_vfw(released, deadline: int, lookahead: int, params: CostParams,
            enforce_window_deadline: bool = False) -> CapacitySchedule:
    """Run the valley-filling controller over a released-workload curve.

    The horizon is padded by `deadline` zero-release slots so all work
    finishes inside the schedule. Per-slot LP latencies are recorded in
    step_seconds; the mode trace holds LOPT / VOPT / FLUSH per slot.
    """
    if not 0 < lookahead < deadline:
        raise ValueError(f"need 0 < lookahead < deadline, got {lookahead} vs {deadline}")
    load = curve_values(released)
    if (load > params.fleet + 1e-9).any():
        t = int((load > params.fleet + 1e-9).argmax()) + 1
        raise ValueError(f"released load exceeds the fleet at slot {t}")
    if load.size == 0:
        return CapacitySchedule(np.zeros(0), np.zeros(0), "vfw")

    horizon = load.size + deadline
    padded = np.concatenate([load, np.zeros(deadline)])
    due = delayed_curve(padded, deadline)
    delayed = delayed_curve(padded, lookahead)
    cum_due_full = np.cumsum(due)

    state = VfwState(deadline, lookahead)
    flush_from = horizon - deadline  # final D+1 slots drain every release
    last_sign = 1
    modes = []
    step_seconds = np.zeros(horizon)
    backlog = np.zeros(horizon)
    m = np.zeros(horizon)

    for t in range(1, horizon + 1):
        state.t = t
        state.cum_released += padded[t - 1]
        state.cum_delayed += delayed[t - 1]
        state.cum_due += due[t - 1]

        gap = padded[t - 1] - delayed[t - 1]
        sign = 0 if gap == 0.0 else (1 if gap > 0 else -1)
        crossing = sign != 0 and sign != last_sign

        in_flush = t >= flush_from
        if not in_flush:
            if state.valley == 0:
                if crossing and detect_valley(padded, delayed, t, lookahead):
                    state.valley = 1
            elif state.valley <= lookahead:
                state.valley += 1
            else:
                state.valley = 0
        if sign != 0:
            last_sign = sign

        window = state.window_length(horizon)
        prefix_due = None
        if enforce_window_deadline:
            upto = min(t + window - 1, horizon)
            prefix_due = cum_due_full[t - 1: upto] - state.cum_capacity

        started = time.perf_counter()
        if in_flush:
            mode = MODE_FLUSH
            committed = vopt_step(state, params, window, prefix_due)
        elif state.valley > 0:
            mode = MODE_VOPT
            committed = vopt_step(state, params, window, prefix_due)
        else:
            mode = MODE_LOPT
            committed = lopt_step(state, params, window, prefix_due)
        step_seconds[t - 1] = time.perf_counter() - started

        m[t - 1] = committed
        modes.append(mode)
        state.history_m.append(committed)
        state.cum_capacity += committed
        state.m_prev = committed
        backlog[t - 1] = state.cum_released - state.cum_capacity

    return CapacitySchedule(m, m.copy(), "vfw", modes, backlog, step_seconds,
                            {"deadline": deadline, "lookahead": lookahead})
