"""Full-horizon optimal provisioning and its per-job EDF disaggregation.

The offline program chooses capacity m_t and executed work x_t to minimize

    sum_t (e0 * m_t + e1 * x_t) + beta * sum_t |m_t - m_{t-1}|,  m_0 = 0

subject to the cumulative deadline constraint (work due so far must have
run), the cumulative release constraint (work cannot run before release),
completion of everything by the end of the horizon, and 0 <= x <= m <= M.
The term m_t * C(x_t / m_t) of the affine cost model expands to exactly
e0 * m_t + e1 * x_t, which also removes the 0/0 capacity singularity.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import lp
from .schedule import CapacitySchedule, CostParams, DeadlineMissError
from .workload import DeadlineDecomposedLoad, curve_values


class InfeasibleWorkloadError(RuntimeError):
    """Cumulative deadline demand exceeds what the fleet can execute."""

    def __init__(self, slot: int, shortfall: float):
        super().__init__(
            f"demand due by slot {slot} exceeds fleet capacity by {shortfall:.6g}"
        )
        self.slot = slot
        self.shortfall = shortfall


def check_schedulable(released: np.ndarray, due: np.ndarray, fleet: float,
                      tol: float = 1e-9) -> None:
    """Raise with the first violating slot if no feasible schedule can exist.

    Work due by slot t but released after slot s must fit into running the
    whole fleet during (s, t]; the tightest s is tracked with a running
    minimum of cum_released(s) - fleet * s.
    """
    cum_due = 0.0
    cum_rel = 0.0
    best = 0.0  # min over s < t of cum_released(s) - fleet * s
    for t in range(1, released.size + 1):
        cum_due += due[t - 1]
        shortfall = cum_due - (fleet * t + best)
        if shortfall > tol:
            raise InfeasibleWorkloadError(t, shortfall)
        cum_rel += released[t - 1]
        best = min(best, cum_rel - fleet * t)


def solve_offline(released, due, params: CostParams) -> CapacitySchedule:
    """Solve the full-horizon provisioning LP.

    released and due are per-slot curves over the same (already padded)
    horizon; pad by the maximum deadline beforehand so that completing all
    released work inside the horizon is meaningful.
    """
    load = curve_values(released)
    due_arr = np.asarray(curve_values(due), dtype=float)
    horizon = load.size
    if due_arr.size < horizon:
        due_arr = np.concatenate([due_arr, np.zeros(horizon - due_arr.size)])
    due_arr = due_arr[:horizon]

    if (load > params.fleet + 1e-9).any():
        t = int((load > params.fleet + 1e-9).argmax()) + 1
        raise InfeasibleWorkloadError(t, float(load[t - 1] - params.fleet))
    cum_due = np.cumsum(due_arr)
    cum_rel = np.cumsum(load)
    if (cum_due - cum_rel > 1e-9).any():
        t = int((cum_due - cum_rel > 1e-9).argmax()) + 1
        raise ValueError(f"due-work curve overtakes releases at slot {t}")
    check_schedulable(load, due_arr, params.fleet)

    if horizon == 0:
        return CapacitySchedule(np.zeros(0), np.zeros(0), "offline")

    # Variable layout: x_1..x_T | m_1..m_T | u_1..u_T | v_1..v_T.
    T = horizon
    n = 4 * T
    objective = np.zeros(n)
    objective[0:T] = params.e1
    objective[T:2 * T] = params.e0
    objective[2 * T:] = params.beta
    bounds = [(0.0, math.inf)] * T + [(0.0, float(params.fleet))] * T + [(0.0, math.inf)] * (2 * T)
    problem = lp.LpProblem(objective, bounds=bounds)

    for t in range(1, T + 1):
        row = np.zeros(n)
        row[0:t] = 1.0
        problem.add_row(row, lp.GE, cum_due[t - 1])
        if t < T:
            row2 = np.zeros(n)
            row2[0:t] = 1.0
            problem.add_row(row2, lp.LE, cum_rel[t - 1])
    total_row = np.zeros(n)
    total_row[0:T] = 1.0
    problem.add_row(total_row, lp.EQ, cum_rel[-1])
    for t in range(T):
        row = np.zeros(n)
        row[t] = 1.0
        row[T + t] = -1.0
        problem.add_row(row, lp.LE, 0.0)
    for t in range(T):
        row = np.zeros(n)
        row[T + t] = 1.0
        if t > 0:
            row[T + t - 1] = -1.0
        row[2 * T + t] = -1.0
        row[3 * T + t] = 1.0
        problem.add_row(row, lp.EQ, 0.0)

    solution = lp.solve_lp(problem)
    if solution.status == lp.INFEASIBLE:
        # The schedulability scan above should have caught this.
        raise InfeasibleWorkloadError(-1, math.nan)
    if not solution.optimal:
        raise RuntimeError(f"offline solve ended {solution.status}")

    x = np.clip(solution.values[0:T], 0.0, None)
    m = np.clip(solution.values[T:2 * T], 0.0, params.fleet)
    x = np.minimum(x, m)
    schedule = CapacitySchedule(m, x, "offline")

    from .costs import total_cost  # local import avoids a cycle

    recomputed = total_cost(schedule, params)
    if abs(recomputed - solution.objective_value) > 1e-6 * (1.0 + abs(recomputed)):
        raise RuntimeError(
            f"objective mismatch: recomputed {recomputed} vs solver {solution.objective_value}"
        )
    return schedule


@dataclass
class Assignment:
    """One disaggregated execution record."""

    release_slot: int
    deadline_slots: int
    exec_slot: int
    amount: float


def disaggregate_edf(executed, decomp: DeadlineDecomposedLoad, tol: float = 1e-6) -> list:
    """Split an aggregate execution schedule into per-(release, deadline) runs.

    Pending work is served earliest-absolute-deadline first (ties: earlier
    release first), so any aggregate schedule satisfying the cumulative
    constraints disaggregates with zero deadline misses and unchanged
    per-slot totals.
    """
    x = curve_values(executed)
    assignments = []
    pending = []  # heap of [absolute_deadline, release_slot, deadline, remaining]
    eps = 1e-12  # serving granularity; only miss detection uses `tol`
    for t in range(1, x.size + 1):
        released = decomp.released_at(t)
        for d in np.flatnonzero(released > 0):
            heapq.heappush(pending, [t + int(d), t, int(d), float(released[d])])
        capacity = float(x[t - 1])
        if capacity < -tol:
            raise ValueError(f"negative execution {capacity} at slot {t}")
        while capacity > eps and pending:
            item = pending[0]
            take = min(capacity, item[3])
            item[3] -= take
            capacity -= take
            assignments.append(Assignment(item[1], item[2], t, take))
            if item[3] <= eps:
                heapq.heappop(pending)
        if pending and pending[0][0] <= t:
            shortfall = sum(p[3] for p in pending if p[0] <= t)
            if shortfall > tol:
                raise DeadlineMissError(t, shortfall)
        if capacity > tol and not pending:
            raise ValueError(
                f"slot {t} executes {capacity:.6g} more than the released backlog"
            )
    return assignments
