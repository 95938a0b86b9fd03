"""Execution-time estimation for map/shuffle/reduce jobs from their byte sizes.

A job is characterized by input, shuffle and output bytes. With X mappers and
Y reducers (one wave per block of 128 MB unless capped by slot counts):

    map      t_map = S/(X*Vi) + a1*S/X + S'/(X*Vo)
    shuffle  t_shf = S'/(X*Y*Vn)
    reduce   t_red = a2*S'/Y + S''/(Y*Vo)

and the job finishes after t_map + ceil(Y/R)*(X*t_shf + t_red) when shuffles
outlast the map wave (t_map < Mm*t_shf), otherwise after
ceil(X/Mm)*t_map + Mm*t_shf + ceil(Y/R)*(X*t_shf + t_red).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MEGABYTE = float(1 << 20)  # byte sizes in traces are binary multiples


@dataclass
class EstimationParams:
    """Cluster rates for the runtime model.

    Rates are MB/s, compute slopes s/MB, block size MB. max_map_slots and
    max_reduce_slots bound how many tasks run concurrently; the defaults make
    every stage finish in a single wave.
    """

    read_rate: float = 100.0      # Vi
    output_rate: float = 100.0    # Vo
    network_rate: float = 10.0    # Vn
    map_slope: float = 0.8        # a1
    reduce_slope: float = 0.9     # a2
    block_size_mb: float = 128.0
    max_map_slots: int = 10**9
    max_reduce_slots: int = 10**9

    def validate(self) -> None:
        positives = {
            "read_rate": self.read_rate,
            "output_rate": self.output_rate,
            "network_rate": self.network_rate,
            "map_slope": self.map_slope,
            "reduce_slope": self.reduce_slope,
            "block_size_mb": self.block_size_mb,
            "max_map_slots": self.max_map_slots,
            "max_reduce_slots": self.max_reduce_slots,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ValueError(f"{name} must be positive, got {value}")


def stage_times(input_mb: float, shuffle_mb: float, output_mb: float, p: EstimationParams):
    """Per-stage times (map, shuffle, reduce) and the wave counts (X, Y)."""
    # A stage with zero bytes still counts one formal task; avoids 0/0.
    mappers = max(1, math.ceil(input_mb / p.block_size_mb))
    reducers = max(1, math.ceil(output_mb / p.block_size_mb))
    t_map = input_mb / (mappers * p.read_rate) + p.map_slope * input_mb / mappers \
        + shuffle_mb / (mappers * p.output_rate)
    t_shuffle = shuffle_mb / (mappers * reducers * p.network_rate)
    t_reduce = p.reduce_slope * shuffle_mb / reducers + output_mb / (reducers * p.output_rate)
    return t_map, t_shuffle, t_reduce, mappers, reducers


def estimate_job_time(job, p: EstimationParams | None = None) -> float:
    """Estimated execution time of one job in seconds."""
    p = p or EstimationParams()
    p.validate()
    if job.input_bytes < 0 or job.shuffle_bytes < 0 or job.output_bytes < 0:
        raise ValueError(f"job {job.id} has negative byte sizes")
    t_map, t_shuffle, t_reduce, mappers, reducers = stage_times(
        job.input_bytes / MEGABYTE,
        job.shuffle_bytes / MEGABYTE,
        job.output_bytes / MEGABYTE,
        p,
    )
    map_rounds = math.ceil(mappers / p.max_map_slots)
    reduce_rounds = math.ceil(reducers / p.max_reduce_slots)
    tail = reduce_rounds * (mappers * t_shuffle + t_reduce)
    if t_map < p.max_map_slots * t_shuffle:
        return t_map + tail
    return map_rounds * t_map + p.max_map_slots * t_shuffle + tail


def length_in_slots(seconds: float, slot_seconds: float) -> int:
    """Ceiling of seconds / slot length, at least one slot."""
    if seconds < 0:
        raise ValueError(f"duration must be nonnegative, got {seconds}")
    if slot_seconds <= 0:
        raise ValueError(f"slot length must be positive, got {slot_seconds}")
    # Round first so durations sitting on a slot boundary do not spill over.
    return max(1, math.ceil(round(seconds / slot_seconds, 9)))


def estimate_lengths(jobs, slot_seconds: float, p: EstimationParams | None = None) -> None:
    """Fill length_slots on every job in place."""
    p = p or EstimationParams()
    for job in jobs:
        job.length_slots = length_in_slots(estimate_job_time(job, p), slot_seconds)
