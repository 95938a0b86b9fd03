"""Experiment driver: configuration, baselines, synthetic workloads, pipelines."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .costs import cost_report
from .estimation import EstimationParams, estimate_lengths
from .gcp import run_gcp
from .jobprep import assign_uniform_deadline, classify_kmeans
from .offline import solve_offline
from .schedule import CapacitySchedule, CostParams, assert_feasible
from .vfw import run_vfw
from .workload import (
    DeadlineDecomposedLoad,
    WorkloadCurve,
    build_curves,
    curve_values,
    delayed_curve,
    generalized_deadline_curve,
    ingest_trace,
    uniform_decomposition,
)

ALGORITHMS = ("offline", "vfw", "gcp", "follow", "none")


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class SyntheticSpec:
    """Recipe for a generated workload curve."""

    kind: str = "sinusoid"          # sinusoid | bursty | step
    mean: float = 10.0
    pmr: float = 3.0                # peak-to-mean ratio
    period: int = 288
    slots: int = 288
    seed: int = 0
    noise: float = 0.0              # multiplicative jitter amplitude

    @classmethod
    def parse(cls, text: str) -> "SyntheticSpec":
        """Parse `kind:key=value,key=value` (for instance sinusoid:mean=10,pmr=3)."""
        kind, _, rest = text.partition(":")
        spec = cls(kind=kind.strip() or "sinusoid")
        if rest.strip():
            for pair in rest.split(","):
                key, _, value = pair.partition("=")
                key = key.strip()
                if key not in ("mean", "pmr", "period", "slots", "seed", "noise"):
                    raise ValueError(f"unknown synthetic key {key!r}")
                cast = int if key in ("period", "slots", "seed") else float
                setattr(spec, key, cast(value.strip()))
        return spec


def synth_workload(spec: SyntheticSpec, slot_seconds: float = 300.0,
                   server_capacity: float = 1.0) -> WorkloadCurve:
    """Generate a nonnegative curve with the requested mean and peak-to-mean ratio.

    The realized ratio lands within 5% of the request (exactly, for the
    noiseless kinds); identical specs produce bit-identical curves.
    """
    if spec.mean <= 0:
        raise ValueError(f"mean must be positive, got {spec.mean}")
    if spec.pmr < 1:
        raise ValueError(f"peak-to-mean ratio must be >= 1, got {spec.pmr}")
    if spec.slots < 1:
        raise ValueError(f"need at least one slot, got {spec.slots}")

    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.slots)
    if spec.pmr == 1.0:
        values = np.full(spec.slots, spec.mean)
    elif spec.kind == "sinusoid":
        base = (1.0 + np.sin(2.0 * math.pi * t / max(1, spec.period) - math.pi / 2.0)) / 2.0
        gamma = _solve_shape_exponent(base, spec.pmr)
        values = base ** gamma
        values = values * (spec.mean / values.mean())
    elif spec.kind == "bursty":
        frac = min(0.08, 0.8 / spec.pmr)
        n_bursts = max(1, round(frac * spec.slots))
        f = n_bursts / spec.slots
        floor = spec.mean * (1.0 - f * spec.pmr) / (1.0 - f)
        values = np.full(spec.slots, floor)
        burst_slots = rng.choice(spec.slots, size=n_bursts, replace=False)
        values[burst_slots] = spec.pmr * spec.mean
    elif spec.kind == "step":
        duty = min(0.5, 1.0 / spec.pmr)
        period = max(2, spec.period)
        high = spec.pmr * spec.mean
        pattern = np.zeros(period, dtype=bool)
        pattern[: max(1, round(duty * period))] = True
        mask = np.resize(pattern, spec.slots)
        n_high = int(mask.sum())
        if n_high in (0, spec.slots):
            values = np.full(spec.slots, spec.mean)
        else:
            low = (spec.mean * spec.slots - high * n_high) / (spec.slots - n_high)
            values = np.where(mask, high, max(0.0, low))
    else:
        raise ValueError(f"unknown synthetic kind {spec.kind!r}")

    if spec.noise > 0 and spec.pmr > 1.0:
        jitter = 1.0 + spec.noise * (2.0 * rng.random(spec.slots) - 1.0)
        values = np.maximum(values * jitter, 0.0)
    if spec.pmr > 1.0:
        values = _enforce_mean_peak(values, spec.mean, spec.pmr)

    realized = values.max() / values.mean()
    if abs(realized - spec.pmr) > 0.05 * spec.pmr:
        raise RuntimeError(f"synthetic curve missed the ratio: {realized} vs {spec.pmr}")
    return WorkloadCurve(slot_seconds, values, server_capacity)


def _solve_shape_exponent(base: np.ndarray, pmr: float) -> float:
    """Bisection for the exponent that sets peak/mean of base**gamma to pmr."""
    lo, hi = 0.0, 1.0
    ratio = lambda g: base.max() ** g / np.mean(base ** g)
    while ratio(hi) < pmr and hi < 512:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ratio(mid) < pmr:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _enforce_mean_peak(values: np.ndarray, mean: float, pmr: float) -> np.ndarray:
    """Pin the mean exactly and the maximum to pmr * mean."""
    out = values * (mean / values.mean())
    cap = pmr * mean
    # Shave everything above the cap, pushing the excess onto the rest
    # proportionally; redistribution can overshoot, so iterate.
    for _ in range(100):
        over = out > cap
        if not over.any():
            break
        excess = float((out[over] - cap).sum())
        out[over] = cap
        under = ~over
        if out[under].sum() <= 0:
            out[under] += excess / max(1, int(under.sum()))
        else:
            out[under] += excess * out[under] / out[under].sum()
    # Raise the argmax to the cap exactly, shrinking the rest to keep the mean.
    idx = int(out.argmax())
    diff = cap - out[idx]
    rest = np.arange(out.size) != idx
    rest_sum = float(out[rest].sum())
    if rest_sum > 0:
        out[rest] *= 1.0 - diff / rest_sum
    out[idx] = cap
    return np.maximum(out, 0.0)


def run_follow_baseline(curve) -> CapacitySchedule:
    """Provision exactly the released workload each slot (m = x = L)."""
    values = curve_values(curve)
    return CapacitySchedule(values.copy(), values.copy(), "follow")


def run_no_provisioning(curve, fleet: float) -> CapacitySchedule:
    """Keep the whole fleet on for every slot; execute the released workload."""
    values = curve_values(curve)
    if (values > fleet + 1e-9).any():
        t = int((values > fleet + 1e-9).argmax()) + 1
        raise ValueError(f"released load exceeds the fleet at slot {t}")
    return CapacitySchedule(np.full(values.size, float(fleet)), values.copy(), "none")


@dataclass
class ExperimentConfig:
    slot_seconds: float = 300.0
    horizon: int | None = None
    fleet: float | None = None
    e0: float = 1.0
    e1: float = 0.0
    beta: float = 12.0
    algorithm: str = "offline"
    deadline: int = 2
    delta: int | None = None          # defaults to deadline // 2
    k: int = 10
    deadline_pool: list = field(default_factory=list)   # defaults to 1..k
    seed: int = 0
    trace: str | None = None
    synthetic: str | None = None
    out_dir: str | None = None
    server_capacity: float = 1.0
    gcp_uniform: bool = False
    dynamic_continuations: bool = False
    estimation: EstimationParams = field(default_factory=EstimationParams)

    def resolved_delta(self) -> int:
        if self.delta is not None:
            return int(self.delta)
        return max(1, self.deadline // 2)

    def resolved_pool(self) -> list:
        return list(self.deadline_pool) if self.deadline_pool else list(range(1, self.k + 1))

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.algorithm == "vfw":
            if self.deadline < 2:
                raise ValueError("valley filling needs a deadline of at least 2 slots")
            if not 0 < self.resolved_delta() < self.deadline:
                raise ValueError(
                    f"need 0 < delta < deadline, got {self.resolved_delta()} vs {self.deadline}"
                )
        if len(self.resolved_pool()) != self.k:
            raise ValueError(f"deadline pool must hold k={self.k} values")
        if self.trace is None and self.synthetic is None:
            raise ValueError("provide a trace path or a synthetic workload spec")

    def as_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["estimation"] = dataclasses.asdict(self.estimation)
        return data


_CONFIG_CASTS = {
    "slot_seconds": float, "horizon": int, "fleet": float, "e0": float, "e1": float,
    "beta": float, "algorithm": str, "deadline": int, "delta": int, "k": int,
    "seed": int, "trace": str, "synthetic": str, "out_dir": str,
    "server_capacity": float, "gcp_uniform": lambda v: v.lower() in ("1", "true", "yes"),
    "dynamic_continuations": lambda v: v.lower() in ("1", "true", "yes"),
}


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat `key = value` config file; overrides win over file values."""
    config = ExperimentConfig()
    if path is not None:
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key = key.strip()
            value = value.strip()
            if key == "deadline_pool":
                config.deadline_pool = [int(v) for v in value.split(",") if v.strip()]
            elif key in _CONFIG_CASTS:
                setattr(config, key, _CONFIG_CASTS[key](value))
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(config, key, value)
    return config


@dataclass
class PreparedInstance:
    curve: WorkloadCurve
    decomp: DeadlineDecomposedLoad | None           # static placement, every job
    decomp_online: DeadlineDecomposedLoad | None    # feed for the online controller
    jobs: list | None
    dynamic_jobs: list
    cluster_model: object | None
    max_deadline: int


def prepare_instance(config: ExperimentConfig) -> PreparedInstance:
    """Input stage: ingest or synthesize, estimate, assign deadlines, build curves."""
    if config.synthetic is not None:
        spec = SyntheticSpec.parse(config.synthetic)
        if config.seed:
            spec.seed = config.seed
        if config.horizon:
            spec.slots = config.horizon
        curve = synth_workload(spec, config.slot_seconds, config.server_capacity)
        decomp = uniform_decomposition(curve, config.deadline)
        return PreparedInstance(curve, decomp, decomp, None, [], None, config.deadline)

    result = ingest_trace(config.trace)
    if not result.jobs:
        raise StageError("ingest", f"no usable jobs in {config.trace} ({result.summary()})")
    jobs = result.jobs
    estimate_lengths(jobs, config.slot_seconds, config.estimation)

    cluster_model = None
    if config.algorithm == "gcp" and not config.gcp_uniform:
        pool = config.resolved_pool()
        cluster_model = classify_kmeans(jobs, config.k, pool, config.seed)
    else:
        assign_uniform_deadline(jobs, config.deadline)

    horizon = config.horizon or max(j.release_slot(config.slot_seconds) + (j.length_slots or 1) - 1
                                    for j in jobs)
    curve, decomp = build_curves(jobs, config.slot_seconds, config.server_capacity, horizon)

    dynamic_jobs = []
    decomp_online = decomp
    if config.dynamic_continuations and config.algorithm == "gcp":
        short = [j for j in jobs if (j.length_slots or 1) == 1]
        dynamic_jobs = [SimpleNamespace(
            release_slot=j.release_slot(config.slot_seconds),
            length_slots=j.length_slots,
            deadline_slots=j.deadline_slots,
            load=1.0 / config.server_capacity,
            id=j.id,
        ) for j in jobs if (j.length_slots or 1) > 1]
        if dynamic_jobs:
            _, decomp_online = build_curves(short, config.slot_seconds,
                                            config.server_capacity, horizon)

    max_deadline = max(decomp.nu, max((j.deadline_slots or 0) for j in jobs))
    return PreparedInstance(curve, decomp, decomp_online, jobs, dynamic_jobs,
                            cluster_model, max_deadline)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    curve: WorkloadCurve
    schedules: dict
    reports: dict
    files: list = field(default_factory=list)


def run_algorithm(name: str, instance: PreparedInstance, params: CostParams,
                  config: ExperimentConfig) -> tuple:
    """Run one provisioning strategy; returns (schedule, due-curve) on the padded horizon."""
    curve = instance.curve
    load = curve.values
    deadline = config.deadline

    if name == "follow":
        padded = np.concatenate([load, np.zeros(deadline)])
        due = delayed_curve(padded, deadline)
        return run_follow_baseline(padded), due
    if name == "none":
        padded = np.concatenate([load, np.zeros(deadline)])
        due = delayed_curve(padded, deadline)
        return run_no_provisioning(padded, params.fleet), due
    if name == "vfw":
        schedule = run_vfw(load, deadline, config.resolved_delta(), params)
        due = delayed_curve(np.concatenate([load, np.zeros(deadline)]), deadline)
        return schedule, due
    if name == "gcp":
        decomp = instance.decomp_online
        if decomp is None:
            decomp = uniform_decomposition(curve, deadline)
        nu = max(instance.max_deadline, decomp.nu)
        schedule = run_gcp(decomp, params, instance.dynamic_jobs, nu)
        realized = schedule.extras["realized_decomp"]
        due = generalized_deadline_curve(realized, realized.horizon)
        return schedule, due
    if name == "offline":
        if instance.decomp is not None and instance.decomp.nu != config.deadline:
            # Mixed deadlines: optimize against the generalized due curve.
            nu = instance.max_deadline
            padded = np.concatenate([load, np.zeros(nu)])
            due = generalized_deadline_curve(instance.decomp, padded.size)
        else:
            padded = np.concatenate([load, np.zeros(deadline)])
            due = delayed_curve(padded, deadline)
        return solve_offline(padded, due, params), due
    raise StageError("provision", f"unknown algorithm {name!r}")


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Full pipeline: prepare, provision, account, and (optionally) write reports."""
    config.validate()
    try:
        instance = prepare_instance(config)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("prepare", str(exc)) from exc

    fleet = config.fleet if config.fleet is not None else float(math.ceil(instance.curve.peak()))
    fleet = max(fleet, 1.0)
    if instance.curve.peak() > fleet + 1e-9:
        raise StageError("prepare", f"workload peak {instance.curve.peak()} exceeds fleet {fleet}")
    params = CostParams(config.e0, config.e1, config.beta, fleet, config.slot_seconds)

    schedules = {}
    dues = {}
    names = [config.algorithm] if config.algorithm == "follow" else [config.algorithm, "follow"]
    for name in names:
        try:
            schedules[name], dues[name] = run_algorithm(name, instance, params, config)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(f"provision:{name}", str(exc)) from exc

    horizon = max(s.horizon for s in schedules.values())
    for name, schedule in schedules.items():
        if schedule.horizon < horizon:
            schedules[name] = schedule.padded(horizon - schedule.horizon)

    padded_load = np.concatenate([instance.curve.values,
                                  np.zeros(horizon - instance.curve.horizon)])
    try:
        for name, schedule in schedules.items():
            assert_feasible(schedule, padded_load, dues[name], fleet)
    except Exception as exc:
        raise StageError("verify", str(exc)) from exc

    baseline = schedules["follow"]
    reports = {
        name: cost_report(schedule, padded_load, params, baseline)
        for name, schedule in schedules.items()
    }

    result = ExperimentResult(config, instance.curve, schedules, reports)
    if config.out_dir:
        from . import reporting
        try:
            result.files = reporting.write_experiment_outputs(result, padded_load, instance)
        except Exception as exc:
            raise StageError("report", str(exc)) from exc
    return result


def sweep_deadline(config: ExperimentConfig, deadlines=range(1, 13)) -> list:
    """Cost of offline / valley-filling / generalized provisioning per deadline."""
    rows = []
    for deadline in deadlines:
        for name in ("offline", "gcp", "vfw", "follow"):
            if name == "vfw" and deadline < 2:
                continue
            sub = dataclasses.replace(config, algorithm=name, deadline=int(deadline),
                                      delta=None, out_dir=None, gcp_uniform=True)
            outcome = run_experiment(sub)
            report = outcome.reports[name]
            rows.append({
                "deadline": int(deadline),
                "delta": sub.resolved_delta() if name == "vfw" else "",
                "algorithm": name,
                "operating_cost": report.operating_cost,
                "switching_cost": report.switching_cost,
                "total_cost": report.total_cost,
                "savings_vs_follow": report.savings_vs_baseline,
            })
    return rows


def sweep_lookahead(config: ExperimentConfig, deltas=None) -> list:
    """Valley-filling cost across lookahead values at a fixed deadline."""
    deltas = list(deltas) if deltas is not None else list(range(1, config.deadline))
    rows = []
    for delta in deltas:
        sub = dataclasses.replace(config, algorithm="vfw", delta=int(delta), out_dir=None)
        outcome = run_experiment(sub)
        report = outcome.reports["vfw"]
        rows.append({
            "deadline": config.deadline,
            "delta": int(delta),
            "algorithm": "vfw",
            "operating_cost": report.operating_cost,
            "switching_cost": report.switching_cost,
            "total_cost": report.total_cost,
            "savings_vs_follow": report.savings_vs_baseline,
        })
    return rows
