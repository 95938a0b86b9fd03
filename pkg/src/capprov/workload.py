"""Jobs, per-slot workload curves, and their delayed / deadline-decomposed forms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

TRACE_FIELDS = ("job_id", "release_time_s", "input_bytes", "shuffle_bytes", "output_bytes")
TRACE_HEADER = ",".join(TRACE_FIELDS)


@dataclass
class Job:
    """One released unit of work.

    Byte sizes describe the map input, intermediate shuffle and reduce output
    stages. length_slots and deadline_slots stay None until estimation and
    deadline assignment have run.
    """

    id: str
    release_time: float
    input_bytes: float
    shuffle_bytes: float
    output_bytes: float
    length_slots: int | None = None
    deadline_slots: int | None = None

    def release_slot(self, slot_seconds: float) -> int:
        # A job arriving mid-slot is first schedulable in that slot.
        return int(math.floor(self.release_time / slot_seconds)) + 1


@dataclass
class IngestResult:
    jobs: list
    rejected: list  # (line_number, reason) pairs

    def summary(self) -> str:
        return f"{len(self.jobs)} jobs ingested, {len(self.rejected)} records rejected"


def ingest_trace(source) -> IngestResult:
    """Parse a comma-separated job trace into Jobs sorted by release time.

    source may be a path or any iterable of text lines. Header line optional.
    Malformed or negative-valued records are rejected individually and
    reported with their line numbers; an empty stream is a valid empty trace.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            return ingest_trace(list(handle))

    jobs = []
    rejected = []
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if lineno == 1 and line.replace(" ", "").lower().startswith("job_id,"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(TRACE_FIELDS):
            rejected.append((lineno, f"expected {len(TRACE_FIELDS)} fields, got {len(parts)}"))
            continue
        try:
            release = float(parts[1])
            sizes = [float(p) for p in parts[2:5]]
        except ValueError as exc:
            rejected.append((lineno, f"unparsable number: {exc}"))
            continue
        if release < 0:
            rejected.append((lineno, f"negative release time {release}"))
            continue
        if min(sizes) < 0:
            rejected.append((lineno, "negative byte count"))
            continue
        jobs.append(Job(parts[0], release, sizes[0], sizes[1], sizes[2]))

    jobs.sort(key=lambda j: (j.release_time, j.id))
    if rejected:
        log.warning("trace ingestion rejected %d records: %s", len(rejected), rejected[:5])
    return IngestResult(jobs, rejected)


@dataclass
class WorkloadCurve:
    """Released load per slot, normalized to server units.

    values[t-1] is the number of servers' worth of work released in slot t.
    """

    slot_seconds: float
    values: np.ndarray
    server_capacity: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    @property
    def horizon(self) -> int:
        return int(self.values.size)

    def total(self) -> float:
        return float(self.values.sum())

    def peak(self) -> float:
        return float(self.values.max()) if self.values.size else 0.0

    def padded(self, extra_slots: int) -> "WorkloadCurve":
        return WorkloadCurve(
            self.slot_seconds,
            np.concatenate([self.values, np.zeros(extra_slots)]),
            self.server_capacity,
        )


@dataclass
class DeadlineDecomposedLoad:
    """Load indexed by (deadline d, release slot t); values has shape (nu+1, T)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("decomposed load must be a 2-d array (deadline, slot)")

    @property
    def nu(self) -> int:
        return int(self.values.shape[0]) - 1

    @property
    def horizon(self) -> int:
        return int(self.values.shape[1])

    def total_curve(self) -> np.ndarray:
        return self.values.sum(axis=0)

    def released_at(self, slot: int) -> np.ndarray:
        if 1 <= slot <= self.horizon:
            return self.values[:, slot - 1]
        return np.zeros(self.nu + 1)

    def check_consistent(self, curve_values: np.ndarray, tol: float = 1e-9) -> None:
        diff = np.abs(self.total_curve() - curve_values[: self.horizon]).max()
        if diff > tol:
            raise ValueError(f"per-deadline loads disagree with the total curve by {diff}")


def curve_values(curve) -> np.ndarray:
    """Accept a WorkloadCurve or a bare array of per-slot values."""
    if isinstance(curve, WorkloadCurve):
        return curve.values
    return np.asarray(curve, dtype=float)


def build_curves(jobs, slot_seconds: float, server_capacity: float, horizon: int):
    """Aggregate jobs into a workload curve and its per-deadline decomposition.

    Every job needs length_slots and deadline_slots assigned. A unit-length
    job contributes one normalized unit at its release slot. A longer job
    spreads one unit per covered slot (the active-job count): the first unit
    keeps deadline D - length and the remaining units are due immediately at
    their slots, mirroring a head-plus-continuations split.

    Jobs that would place load beyond the horizon are rejected with a
    diagnostic and skipped.
    """
    if server_capacity <= 0:
        raise ValueError(f"server capacity must be positive, got {server_capacity}")
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1 slot, got {horizon}")

    unit = 1.0 / server_capacity
    max_deadline = 0
    prepared = []
    rejected = []
    for job in jobs:
        if job.length_slots is None or job.deadline_slots is None:
            raise ValueError(f"job {job.id} is missing length or deadline")
        length = int(job.length_slots)
        deadline = int(job.deadline_slots)
        if length < 1:
            rejected.append((job.id, f"nonpositive length {length}"))
            continue
        if length > 1 and deadline < length:
            rejected.append((job.id, f"deadline {deadline} shorter than length {length}"))
            continue
        release = job.release_slot(slot_seconds)
        if release > horizon:
            rejected.append((job.id, f"releases in slot {release} after horizon {horizon}"))
            continue
        if release + length - 1 > horizon:
            rejected.append((job.id, f"load extends to slot {release + length - 1} past horizon"))
            continue
        prepared.append((release, length, deadline))
        max_deadline = max(max_deadline, deadline)
    if rejected:
        log.warning("build_curves skipped %d jobs: %s", len(rejected), rejected[:5])

    values = np.zeros(horizon)
    decomposed = np.zeros((max_deadline + 1, horizon))
    for release, length, deadline in prepared:
        if length == 1:
            values[release - 1] += unit
            decomposed[deadline, release - 1] += unit
        else:
            for i in range(length):
                values[release - 1 + i] += unit
            decomposed[deadline - length, release - 1] += unit
            for i in range(1, length):
                decomposed[0, release - 1 + i] += unit

    curve = WorkloadCurve(slot_seconds, values, server_capacity)
    decomp = DeadlineDecomposedLoad(decomposed)
    decomp.check_consistent(values)
    return curve, decomp


def delayed_curve(curve, delay: int, length: int | None = None) -> np.ndarray:
    """Shift a curve right by `delay` slots: out_t = L_{t-delay}, zero before.

    By default the output keeps the input length (tail truncated); pass
    `length` (for instance T + delay) to retain all mass.
    """
    values = curve_values(curve)
    if delay < 0:
        raise ValueError(f"delay must be nonnegative, got {delay}")
    out_len = values.size if length is None else int(length)
    out = np.zeros(out_len)
    src = values[: max(0, out_len - delay)]
    out[delay : delay + src.size] = src
    return out


def generalized_deadline_curve(decomp: DeadlineDecomposedLoad, length: int | None = None) -> np.ndarray:
    """Due-work curve for mixed deadlines: out_t = sum_d load[d][t - d].

    The default length T + nu keeps every unit of released work in view.
    """
    nu = decomp.nu
    horizon = decomp.horizon
    out_len = horizon + nu if length is None else int(length)
    out = np.zeros(out_len)
    for d in range(nu + 1):
        row = decomp.values[d]
        src = row[: max(0, out_len - d)]
        out[d : d + src.size] += src
    return out


def uniform_decomposition(curve, deadline: int) -> DeadlineDecomposedLoad:
    """Decomposition of a plain curve when every unit shares one deadline."""
    values = curve_values(curve)
    if deadline < 0:
        raise ValueError(f"deadline must be nonnegative, got {deadline}")
    decomposed = np.zeros((deadline + 1, values.size))
    decomposed[deadline] = values
    return DeadlineDecomposedLoad(decomposed)
