import numpy as np
import pytest

from capprov.jobprep import (
    JobPiece,
    assign_uniform_deadline,
    classify_kmeans,
    decompose_nonpreemptive,
    decompose_preemptive,
)
from capprov.workload import Job


def _piece_job(jid="p", release=5):
    return JobPiece(jid, 1, release, 0)


class TestPreemptiveDecomposition:
    def test_four_pieces_deadline_twelve(self):
        pieces = decompose_preemptive(_piece_job(release=7), 12, 4)
        assert [p.release_slot for p in pieces] == [7, 10, 13, 16]
        assert all(p.deadline_slots == 2 for p in pieces)

    def test_single_piece(self):
        pieces = decompose_preemptive(_piece_job(release=3), 5, 1)
        assert len(pieces) == 1
        assert pieces[0].release_slot == 3
        assert pieces[0].deadline_slots == 4

    def test_deadline_equal_to_length(self):
        pieces = decompose_preemptive(_piece_job(release=1), 3, 3)
        assert [p.release_slot for p in pieces] == [1, 2, 3]
        assert all(p.deadline_slots == 0 for p in pieces)

    def test_deadline_below_length_rejected(self):
        with pytest.raises(ValueError):
            decompose_preemptive(_piece_job(), 2, 3)

    def test_never_extends_the_sla(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            length = int(rng.integers(1, 9))
            deadline = int(rng.integers(length, length + 15))
            release = int(rng.integers(1, 50))
            pieces = decompose_preemptive(_piece_job(release=release), deadline, length)
            assert len(pieces) == length
            last = pieces[-1]
            assert last.release_slot + last.deadline_slots <= release + deadline
            for earlier, later in zip(pieces, pieces[1:]):
                assert later.release_slot >= earlier.release_slot

    def test_raw_jobs_need_slot_seconds(self):
        job = Job("raw", 720.0, 1, 1, 1)
        pieces = decompose_preemptive(job, 4, 2, slot_seconds=300)
        assert pieces[0].release_slot == 3


class TestNonPreemptiveDecomposition:
    def test_head_and_continuations(self):
        decomposition = decompose_nonpreemptive(_piece_job(release=2), 5, 3)
        assert decomposition.head.deadline_slots == 2
        continuations = decomposition.continuations(executed_slot=9)
        assert [p.release_slot for p in continuations] == [10, 11]
        assert all(p.deadline_slots == 0 for p in continuations)

    def test_single_piece_job_has_no_continuations(self):
        decomposition = decompose_nonpreemptive(_piece_job(release=2), 2, 1)
        assert decomposition.head.deadline_slots == 1
        assert decomposition.continuations(4) == []

    def test_boundary_deadline_equals_length(self):
        decomposition = decompose_nonpreemptive(_piece_job(release=1), 2, 2)
        assert decomposition.head.deadline_slots == 0
        conts = decomposition.continuations(executed_slot=1)
        assert [p.release_slot for p in conts] == [2]
        assert conts[0].deadline_slots == 0

    def test_deadline_below_length_rejected(self):
        with pytest.raises(ValueError):
            decompose_nonpreemptive(_piece_job(), 1, 2)

    def test_back_to_back_releases(self):
        decomposition = decompose_nonpreemptive(_piece_job(release=1), 9, 5)
        conts = decomposition.continuations(executed_slot=4)
        assert [p.release_slot for p in conts] == [5, 6, 7, 8]


def _byte_job(jid, sizes, length=1):
    job = Job(jid, 0.0, *sizes)
    job.length_slots = length
    return job


# Rough shape of the public trace's cluster table: dominant tiny jobs plus a
# tail of ever larger, ever rarer classes.
_TRACE_SHAPE = [
    (569, (15_000, 0, 700_000)),
    (12, (44e9, 15e9, 84e6)),
    (3, (56e9, 145e9, 16e9)),
    (2, (123e9, 0, 52e6)),
    (2, (339_000, 0, 48e9)),
    (1, (203e9, 404e9, 3e9)),
    (1, (529e9, 0, 53_000)),
    (1, (46_000, 0, 199e9)),
    (1, (7e12, 48e9, 101e9)),
    (1, (913e9, 8e12, 61_000)),
]


def _trace_shaped_jobs(rng):
    jobs = []
    for group, (count, sizes) in enumerate(_TRACE_SHAPE):
        for i in range(count):
            jitter = rng.uniform(0.9, 1.1, 3)
            jobs.append(_byte_job(f"g{group}_{i}", tuple(s * j for s, j in zip(sizes, jitter))))
    return jobs


class TestClassifyKmeans:
    def test_population_ordering_two_clusters(self):
        rng = np.random.default_rng(41)
        jobs = [_byte_job(f"small{i}", rng.uniform(1e3, 5e3, 3)) for i in range(90)]
        jobs += [_byte_job(f"big{i}", rng.uniform(1e11, 5e11, 3)) for i in range(10)]
        model = classify_kmeans(jobs, 2, [1, 2], seed=0)
        smalls = {model.assignment[f"small{i}"] for i in range(90)}
        bigs = {model.assignment[f"big{i}"] for i in range(10)}
        assert len(smalls) == 1 and len(bigs) == 1
        assert model.deadline_of_cluster[smalls.pop()] == 1
        assert model.deadline_of_cluster[bigs.pop()] == 2

    def test_identical_jobs_collapse_to_one_cluster(self, caplog):
        jobs = [_byte_job(f"j{i}", (100, 0, 100)) for i in range(12)]
        with caplog.at_level("WARNING"):
            model = classify_kmeans(jobs, 3, [1, 2, 3], seed=0)
        assert model.k == 1
        assert all(job.deadline_slots == 1 for job in jobs)

    def test_trace_shaped_mix(self):
        rng = np.random.default_rng(42)
        jobs = _trace_shaped_jobs(rng)
        model = classify_kmeans(jobs, 10, list(range(1, 11)), seed=1)
        tiny = [model.assignment[j.id] for j in jobs if j.id.startswith("g0_")]
        assert len(set(tiny)) == 1
        assert model.deadline_of_cluster[tiny[0]] == 1
        giants = {model.deadline_of_cluster[model.assignment["g8_0"]],
                  model.deadline_of_cluster[model.assignment["g9_0"]]}
        assert giants == {9, 10}
        rows = model.table_rows(jobs)
        assert rows[0]["jobs"] == 569 and rows[0]["deadline_slots"] == 1
        assert abs(sum(r["pct_jobs"] for r in rows) - 100.0) < 1e-9

    def test_deterministic_for_fixed_seed(self):
        rng = np.random.default_rng(43)
        jobs_a = _trace_shaped_jobs(rng)
        jobs_b = [Job(j.id, j.release_time, j.input_bytes, j.shuffle_bytes, j.output_bytes,
                      j.length_slots) for j in jobs_a]
        model_a = classify_kmeans(jobs_a, 5, [1, 2, 3, 4, 5], seed=9)
        model_b = classify_kmeans(jobs_b, 5, [1, 2, 3, 4, 5], seed=9)
        assert model_a.assignment == model_b.assignment
        assert model_a.deadline_of_cluster == model_b.deadline_of_cluster
        assert np.allclose(model_a.centroids, model_b.centroids)

    def test_objective_nonincreasing(self):
        rng = np.random.default_rng(44)
        jobs = _trace_shaped_jobs(rng)
        model = classify_kmeans(jobs, 6, [1, 2, 3, 4, 5, 6], seed=2)
        path = model.inertia_path
        assert len(path) >= 1
        assert all(a >= b - 1e-9 for a, b in zip(path, path[1:]))

    def test_deadline_raised_to_job_length(self):
        rng = np.random.default_rng(45)
        jobs = [_byte_job(f"s{i}", rng.uniform(1e3, 2e3, 3)) for i in range(20)]
        long_job = _byte_job("long", (5e12, 5e12, 5e12), length=7)
        model = classify_kmeans(jobs + [long_job], 2, [1, 2], seed=0)
        assert long_job.deadline_slots == 7
        assert model.deadline_for(long_job) in (1, 2)

    def test_pool_must_match_k(self):
        jobs = [_byte_job(f"j{i}", (i, i, i)) for i in range(5)]
        with pytest.raises(ValueError):
            classify_kmeans(jobs, 3, [1, 2], seed=0)

    def test_needs_at_least_k_jobs(self):
        with pytest.raises(ValueError):
            classify_kmeans([_byte_job("a", (1, 2, 3))], 2, [1, 2], seed=0)


def test_assign_uniform_deadline_respects_lengths():
    short = _byte_job("s", (1, 1, 1))
    long_job = _byte_job("l", (1, 1, 1), length=5)
    assign_uniform_deadline([short, long_job], 2)
    assert short.deadline_slots == 2
    assert long_job.deadline_slots == 5
