"""Shared provisioning types: cost parameters, capacity schedules, invariants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .workload import curve_values


class DeadlineMissError(RuntimeError):
    """Work was still pending after its deadline slot."""

    def __init__(self, slot: int, shortfall: float):
        super().__init__(f"deadline miss in slot {slot}: {shortfall:.6g} units unserved")
        self.slot = slot
        self.shortfall = shortfall


class ScheduleInvariantError(AssertionError):
    """A produced schedule violates the deadline/release/capacity invariants."""


@dataclass
class CostParams:
    """Energy and switching cost coefficients plus fleet geometry.

    e0 is the fixed cost per active server-slot, e1 the cost per unit of
    executed work, beta the cost per unit of capacity change between
    adjacent slots (covers both power-up and power-down).
    """

    e0: float = 1.0
    e1: float = 0.0
    beta: float = 12.0
    fleet: float = 1000.0
    slot_seconds: float = 300.0

    def __post_init__(self):
        if self.e0 < 0 or self.e1 < 0:
            raise ValueError("energy coefficients must be nonnegative")
        if self.e0 + self.e1 <= 0:
            raise ValueError("at least one energy coefficient must be positive")
        if self.beta < 0:
            raise ValueError("switching cost must be nonnegative")
        if self.fleet <= 0:
            raise ValueError("fleet size must be positive")

    @property
    def energy_coeff(self) -> float:
        return self.e0 + self.e1


@dataclass
class CapacitySchedule:
    """Per-slot capacity m and executed work x, with m_0 = 0 by convention."""

    m: np.ndarray
    x: np.ndarray
    provenance: str = "none"   # offline | vfw | gcp | follow | none
    modes: list | None = None
    backlog: np.ndarray | None = None
    step_seconds: np.ndarray | None = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.m.shape != self.x.shape:
            raise ValueError("capacity and execution vectors differ in length")

    @property
    def horizon(self) -> int:
        return int(self.m.size)

    def total_capacity(self) -> float:
        return float(self.m.sum())

    def total_executed(self) -> float:
        return float(self.x.sum())

    def switching_units(self) -> float:
        if self.m.size == 0:
            return 0.0
        return float(np.abs(np.diff(self.m, prepend=0.0)).sum())

    def padded(self, extra_slots: int) -> "CapacitySchedule":
        zeros = np.zeros(extra_slots)
        return CapacitySchedule(
            np.concatenate([self.m, zeros]),
            np.concatenate([self.x, zeros]),
            self.provenance,
            (self.modes + ["PAD"] * extra_slots) if self.modes is not None else None,
            None,
            None,
            dict(self.extras),
        )


def schedule_violations(schedule: CapacitySchedule, released, due, fleet: float,
                        tol: float = 1e-6) -> list:
    """Check capacity bounds plus the deadline (C1) and release (C2) constraints.

    released/due are per-slot curves; the schedule may be longer than either
    (trailing slots see zero arrivals). Returns human-readable violations,
    empty when the schedule is feasible.
    """
    m, x = schedule.m, schedule.x
    horizon = schedule.horizon
    rel = np.zeros(horizon)
    rel_src = curve_values(released)
    rel[: min(horizon, rel_src.size)] = rel_src[:horizon]
    due_arr = np.zeros(horizon)
    due_src = curve_values(due)
    due_arr[: min(horizon, due_src.size)] = due_src[:horizon]

    problems = []
    if (x < -tol).any():
        problems.append(f"negative execution at slot {int((x < -tol).argmax()) + 1}")
    if (x - m > tol).any():
        problems.append(f"execution exceeds capacity at slot {int((x - m > tol).argmax()) + 1}")
    if (m - fleet > tol).any():
        problems.append(f"capacity exceeds fleet at slot {int((m - fleet > tol).argmax()) + 1}")

    cum_x = np.cumsum(x)
    cum_due = np.cumsum(due_arr)
    cum_rel = np.cumsum(rel)
    c1 = cum_due - cum_x
    if (c1 > tol).any():
        t = int((c1 > tol).argmax()) + 1
        problems.append(f"deadline constraint violated at slot {t} (short {c1[t - 1]:.6g})")
    c2 = cum_x - cum_rel
    if (c2 > tol).any():
        t = int((c2 > tol).argmax()) + 1
        problems.append(f"release constraint violated at slot {t} (over {c2[t - 1]:.6g})")
    if horizon and abs(float(cum_x[-1] - cum_rel[-1])) > tol:
        problems.append(
            f"total executed {cum_x[-1]:.6g} != total released {cum_rel[-1]:.6g}"
        )
    return problems


def assert_feasible(schedule: CapacitySchedule, released, due, fleet: float,
                    tol: float = 1e-6) -> None:
    problems = schedule_violations(schedule, released, due, fleet, tol)
    if problems:
        raise ScheduleInvariantError(
            f"{schedule.provenance} schedule infeasible: " + "; ".join(problems)
        )


def round_capacity_up(schedule: CapacitySchedule, params: CostParams):
    """Integer-capacity post-pass: ceil every m_t and report the cost delta."""
    from .costs import operating_cost, switching_cost  # local import avoids a cycle

    rounded = CapacitySchedule(
        np.minimum(np.ceil(schedule.m - 1e-9), math.ceil(params.fleet)),
        schedule.x,
        schedule.provenance,
        schedule.modes,
        schedule.backlog,
        schedule.step_seconds,
        dict(schedule.extras, rounded=True),
    )
    before = operating_cost(schedule, params) + switching_cost(schedule, params)
    after = operating_cost(rounded, params) + switching_cost(rounded, params)
    return rounded, after - before
