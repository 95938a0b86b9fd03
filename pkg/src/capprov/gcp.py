"""Generalized online provisioning for per-job deadlines.

The controller keeps a backlog vector y indexed by residual deadline: y[d]
must execute within d more slots. Each slot the previous capacity is charged
against the backlog in earliest-deadline order, the remainder shifts one
residual step down, fresh releases are added, and a small LP plans capacity
over the next nu+1 slots with prefix constraints that keep every residual
class on time. Only the first planned slot is committed and executed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .lp import solve_capacity_window
from .schedule import CapacitySchedule, CostParams, DeadlineMissError
from .workload import DeadlineDecomposedLoad

_EPS = 1e-9


class UnschedulableInstanceError(RuntimeError):
    """Backlog due within j slots exceeds what the whole fleet can run."""

    def __init__(self, prefix: int, demand: float, capacity: float):
        super().__init__(
            f"work due within {prefix} slots ({demand:.6g}) exceeds fleet capacity {capacity:.6g}"
        )
        self.prefix = prefix


@dataclass
class UnassignedVector:
    """Pending load by residual deadline; values[d] is due within d slots."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @property
    def nu(self) -> int:
        return int(self.values.size) - 1

    def total(self) -> float:
        return float(self.values.sum())


def update_unassigned(vec: UnassignedVector, m_prev: float, released,
                      tol: float = 1e-6) -> UnassignedVector:
    """Charge last slot's capacity against the backlog, shift, add releases.

    Consumption is earliest-residual-deadline first; capacity beyond the
    backlog is discarded. Raises when due-now work was left unserved.
    """
    y = vec.values
    if y.size and y[0] > m_prev + tol:
        raise DeadlineMissError(-1, float(y[0] - m_prev))
    remaining = y.copy()
    unused = float(m_prev)
    for d in range(remaining.size):
        if unused <= 0:
            break
        take = min(unused, remaining[d])
        remaining[d] -= take
        unused -= take
    shifted = np.zeros_like(remaining)
    shifted[:-1] = remaining[1:]
    if released is None:
        return UnassignedVector(shifted)
    return UnassignedVector(shifted + np.asarray(released, dtype=float))


def gcp_opt_step(vec: UnassignedVector, m_prev: float, params: CostParams) -> np.ndarray:
    """Plan capacity for the next nu+1 slots against the current backlog.

    The window total equals the whole backlog and every prefix covers the
    work due inside it, so the committed first slot always clears y[0].
    Returns the full planned window; callers commit index 0 only.
    """
    y = vec.values
    prefix = np.cumsum(y)
    slack = 1e-6 * (1.0 + params.fleet)
    for j in range(y.size):
        if prefix[j] > (j + 1) * params.fleet + slack:
            raise UnschedulableInstanceError(j, float(prefix[j]), (j + 1) * params.fleet)
    return solve_capacity_window(
        y.size, m_prev, float(prefix[-1]) if y.size else 0.0,
        params.energy_coeff, params.beta, params.fleet, prefix,
    )


class _PieceLedger:
    """Piece-level twin of the backlog used when continuations are dynamic.

    Entries are [residual, remaining, chain_left, piece_load, job_id], served
    earliest residual first and FIFO within a residual class. When a piece
    with chain_left > 0 finishes in slot s, the next chain piece is released
    in slot s+1 with a zero residual deadline.
    """

    def __init__(self, nu: int):
        self.nu = nu
        self.items: list = []
        self.future: dict = {}

    def add_static(self, released: np.ndarray) -> None:
        for d in np.flatnonzero(released > 0):
            self.items.append([int(d), float(released[d]), 0, 0.0, "static"])

    def add_head(self, job: dict) -> None:
        residual = job["deadline"] - job["length"]
        self.items.append([residual, job["load"], job["length"] - 1, job["load"], job["id"]])

    def release_due(self, slot: int) -> float:
        total = 0.0
        for load, chain_left, jid in self.future.pop(slot, []):
            self.items.append([0, load, chain_left, load, jid])
            total += load
        return total

    def serve_and_shift(self, capacity: float, served_slot: int,
                        tol: float = 1e-6) -> None:
        self.items.sort(key=lambda item: item[0])
        unused = capacity
        kept = []
        for item in self.items:
            if unused > _EPS and item[1] > 0:
                take = min(unused, item[1])
                item[1] -= take
                unused -= take
            # LP-noise-sized residue counts as done so chains are not stalled.
            if item[1] <= 1e-7:
                if item[2] > 0:
                    self.future.setdefault(served_slot + 1, []).append(
                        (item[3], item[2] - 1, item[4])
                    )
                continue
            if item[0] == 0 and item[1] > tol:
                raise DeadlineMissError(served_slot, item[1])
            item[0] = max(0, item[0] - 1)
            kept.append(item)
        self.items = kept

    def vector(self) -> UnassignedVector:
        y = np.zeros(self.nu + 1)
        for residual, remaining, *_ in self.items:
            y[residual] += remaining
        return UnassignedVector(y)


def run_gcp(decomp: DeadlineDecomposedLoad, params: CostParams,
            nonpreemptive_jobs=(), nu: int | None = None) -> CapacitySchedule:
    """Run the generalized controller over per-deadline release streams.

    nonpreemptive_jobs items need release_slot, length_slots, deadline_slots
    (>= length) and optionally load; the head enters the backlog at release
    with residual deadline D - length and each continuation is released with
    a zero deadline as soon as its predecessor actually finishes. nu is
    raised to the largest deadline present; the horizon is padded by nu
    zero-release slots to drain the backlog, and the realized release
    streams are attached under extras["realized_decomp"].
    """
    if decomp.values.size and (decomp.values.sum(axis=0) > params.fleet + 1e-6).any():
        raise ValueError("a single slot's releases exceed the fleet size")

    dynamic = []
    for j in nonpreemptive_jobs:
        job = dict(
            release=int(j.release_slot), length=int(j.length_slots),
            deadline=int(j.deadline_slots), load=float(getattr(j, "load", 1.0)),
            id=getattr(j, "id", getattr(j, "parent_id", "job")),
        )
        if job["deadline"] < job["length"]:
            raise ValueError(f"job {job['id']}: deadline {job['deadline']} below length")
        if job["release"] > decomp.horizon:
            raise ValueError(f"job {job['id']}: releases after the horizon {decomp.horizon}")
        dynamic.append(job)

    nu = max(
        decomp.nu if nu is None else int(nu),
        decomp.nu,
        max((job["deadline"] for job in dynamic), default=0),
    )

    horizon = decomp.horizon + nu
    realized = np.zeros((nu + 1, horizon))
    m = np.zeros(horizon)
    backlog = np.zeros(horizon)
    step_seconds = np.zeros(horizon)

    use_ledger = bool(dynamic)
    ledger = _PieceLedger(nu)
    vec = UnassignedVector(np.zeros(nu + 1))
    m_prev = 0.0

    for t in range(1, horizon + 1):
        static_release = _released_vector(decomp, t, nu)
        released_now = static_release.copy()

        if use_ledger:
            ledger.serve_and_shift(m_prev, t - 1)
            ledger.add_static(static_release)
            for job in dynamic:
                if job["release"] == t:
                    ledger.add_head(job)
                    released_now[job["deadline"] - job["length"]] += job["load"]
            released_now[0] += ledger.release_due(t)
            vec = ledger.vector()
        else:
            vec = update_unassigned(vec, m_prev, static_release)

        realized[:, t - 1] = released_now
        started = time.perf_counter()
        plan = gcp_opt_step(vec, m_prev, params)
        step_seconds[t - 1] = time.perf_counter() - started
        m_prev = float(plan[0])
        m[t - 1] = m_prev
        backlog[t - 1] = max(0.0, vec.total() - m_prev)

    if vec.total() - m_prev > 1e-6:
        raise DeadlineMissError(horizon, vec.total() - m_prev)
    if use_ledger and ledger.future:
        raise RuntimeError(f"chain pieces left past the horizon: {sorted(ledger.future)}")

    return CapacitySchedule(
        m, m.copy(), "gcp", None, backlog, step_seconds,
        {"nu": nu, "realized_decomp": DeadlineDecomposedLoad(realized)},
    )


def _released_vector(decomp: DeadlineDecomposedLoad, slot: int, nu: int) -> np.ndarray:
    out = np.zeros(nu + 1)
    if 1 <= slot <= decomp.horizon:
        out[: decomp.nu + 1] = decomp.values[:, slot - 1]
    return out
