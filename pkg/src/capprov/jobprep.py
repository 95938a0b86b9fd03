"""Long-job decomposition and k-means deadline classes.

Long jobs (length > 1 slot) are split into slot-sized pieces. Preemptive jobs
get evenly staggered pieces up front; non-preemptive jobs get a head piece
whose continuations are released one per slot once the scheduler actually
executes the head. Deadline classes for mixed-deadline provisioning come from
k-means over the (input, shuffle, output) byte signature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class JobPiece:
    parent_id: str
    index: int            # 1-based within the parent
    release_slot: int
    deadline_slots: int
    load: float = 1.0


@dataclass
class NonPreemptiveDecomposition:
    """Head piece plus the rule for injecting its continuations.

    Once the head runs in slot t, piece i (2 <= i <= length) is released in
    slot t + i - 1 with deadline 0, which reserves back-to-back capacity for
    the rest of the job.
    """

    head: JobPiece
    length: int
    load: float = 1.0

    def continuations(self, executed_slot: int) -> list:
        return [
            JobPiece(self.head.parent_id, i, executed_slot + i - 1, 0, self.load)
            for i in range(2, self.length + 1)
        ]


def decompose_preemptive(job, deadline: int, length: int, slot_seconds: float | None = None,
                         load: float = 1.0) -> list:
    """Split a preemptive job into `length` staggered unit pieces.

    Pieces are released every floor(D/length) slots and each gets deadline
    floor(D/length) - 1, so the last piece still finishes within the job's
    own deadline.
    """
    _check_decomposition_args(deadline, length)
    step = deadline // length
    release = _release_slot(job, slot_seconds)
    pieces = []
    for i in range(1, length + 1):
        pieces.append(JobPiece(_job_id(job), i, release, step - 1, load))
        release += step
    return pieces


def decompose_nonpreemptive(job, deadline: int, length: int, slot_seconds: float | None = None,
                            load: float = 1.0) -> NonPreemptiveDecomposition:
    """Head piece with deadline D - length; continuations follow the schedule."""
    _check_decomposition_args(deadline, length)
    head = JobPiece(_job_id(job), 1, _release_slot(job, slot_seconds), deadline - length, load)
    return NonPreemptiveDecomposition(head, length, load)


def _check_decomposition_args(deadline: int, length: int) -> None:
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if deadline < length:
        raise ValueError(
            f"deadline {deadline} below length {length}; raise the deadline to the length first"
        )


def _job_id(job) -> str:
    return getattr(job, "id", None) or getattr(job, "parent_id", "job")


def _release_slot(job, slot_seconds: float | None) -> int:
    slot = getattr(job, "release_slot", None)
    if callable(slot):
        if slot_seconds is None:
            raise ValueError("slot_seconds is required to place a raw job on the slot grid")
        return int(slot(slot_seconds))
    if slot is None:
        raise ValueError("job carries no release slot")
    return int(slot)


@dataclass
class ClusterModel:
    """k-means result over job byte signatures with per-cluster deadlines."""

    k: int
    centroids: np.ndarray          # standardized log-byte space
    feature_mean: np.ndarray
    feature_std: np.ndarray
    assignment: dict               # job id -> cluster index
    deadline_of_cluster: list
    counts: list
    inertia_path: list = field(default_factory=list)

    def deadline_for(self, job) -> int:
        return int(self.deadline_of_cluster[self.assignment[job.id]])

    def table_rows(self, jobs) -> list:
        """Per-cluster summary rows: count, share, byte medians (MB), deadline."""
        by_cluster = {c: [] for c in range(self.k)}
        for job in jobs:
            by_cluster[self.assignment[job.id]].append(job)
        total = max(1, len(jobs))
        rows = []
        order = sorted(range(self.k), key=lambda c: self.deadline_of_cluster[c])
        for rank, c in enumerate(order, start=1):
            members = by_cluster[c]
            med = lambda attr: float(np.median([getattr(j, attr) for j in members])) if members else 0.0
            rows.append({
                "cluster": rank,
                "jobs": len(members),
                "pct_jobs": 100.0 * len(members) / total,
                "input_mb": med("input_bytes") / float(1 << 20),
                "shuffle_mb": med("shuffle_bytes") / float(1 << 20),
                "output_mb": med("output_bytes") / float(1 << 20),
                "deadline_slots": int(self.deadline_of_cluster[c]),
            })
        return rows


def _features(jobs) -> np.ndarray:
    # Byte sizes span KB to TB; log damping keeps the tiny-job mass from
    # collapsing into the giants.
    raw = np.array(
        [[job.input_bytes, job.shuffle_bytes, job.output_bytes] for job in jobs],
        dtype=float,
    )
    return np.log1p(raw)


def classify_kmeans(jobs, k: int, deadline_pool, seed: int = 0, max_iter: int = 100) -> ClusterModel:
    """Cluster jobs by byte signature and hand out deadlines by cluster size.

    The most populous cluster receives the smallest deadline in the pool and
    so on upward, so the dominant small-job class stays the most responsive.
    Per-job deadlines are then raised to the job length where needed.
    Deterministic for a fixed seed. If the jobs have fewer distinct byte
    signatures than k, k is reduced with a warning.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    pool = sorted(int(d) for d in deadline_pool)
    if len(pool) != k or len(set(pool)) != k:
        raise ValueError(f"deadline pool must hold {k} distinct values, got {deadline_pool}")
    if len(jobs) < k:
        raise ValueError(f"need at least k={k} jobs, got {len(jobs)}")

    feats = _features(jobs)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0] = 1.0
    pts = (feats - mean) / std

    distinct = np.unique(pts, axis=0)
    if distinct.shape[0] < k:
        log.warning("only %d distinct job signatures; reducing k from %d", distinct.shape[0], k)
        k = distinct.shape[0]
        pool = pool[:k]

    rng = np.random.default_rng(seed)
    centroids = _farthest_point_seed(pts, k, rng)

    labels = np.zeros(len(jobs), dtype=int)
    inertia_path = []
    for _ in range(max_iter):
        dist = ((pts[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist.argmin(axis=1)
        inertia_path.append(float(dist[np.arange(len(jobs)), new_labels].sum()))
        moved = not np.array_equal(new_labels, labels)
        labels = new_labels
        for c in range(k):
            members = pts[labels == c]
            if members.size:
                centroids[c] = members.mean(axis=0)
        if not moved and len(inertia_path) > 1:
            break

    counts = [int((labels == c).sum()) for c in range(k)]
    # Population first; among equally sized clusters the byte-heavier one can
    # wait longer, which also reproduces the tail ordering of public traces.
    byte_mass = np.array([job.input_bytes + job.shuffle_bytes + job.output_bytes
                          for job in jobs])
    mean_mass = [float(byte_mass[labels == c].mean()) if counts[c] else 0.0 for c in range(k)]
    order = sorted(range(k), key=lambda c: (-counts[c], mean_mass[c], c))
    deadline_of_cluster = [0] * k
    for rank, c in enumerate(order):
        deadline_of_cluster[c] = pool[rank]

    assignment = {}
    for job, label in zip(jobs, labels):
        assignment[job.id] = int(label)
        deadline = deadline_of_cluster[label]
        if job.length_slots is not None and deadline < job.length_slots:
            deadline = int(job.length_slots)
        job.deadline_slots = deadline

    return ClusterModel(k, centroids, mean, std, assignment, deadline_of_cluster, counts, inertia_path)


def _farthest_point_seed(pts: np.ndarray, k: int, rng) -> np.ndarray:
    first = int(rng.integers(len(pts)))
    chosen = [first]
    dist = ((pts - pts[first]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(dist.argmax())  # argmax ties resolve to the lowest index
        chosen.append(nxt)
        dist = np.minimum(dist, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def assign_uniform_deadline(jobs, deadline: int) -> None:
    """Give every job one deadline, raised to its length where necessary."""
    for job in jobs:
        length = job.length_slots or 1
        job.deadline_slots = max(int(deadline), int(length)) if length > 1 else int(deadline)
