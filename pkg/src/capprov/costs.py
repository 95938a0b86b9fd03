"""Cost accounting, competitive-bound checks, and the machine power model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .schedule import CapacitySchedule, CostParams
from .workload import curve_values


def operating_cost(schedule: CapacitySchedule, params: CostParams) -> float:
    return float(params.e0 * schedule.m.sum() + params.e1 * schedule.x.sum())


def switching_cost(schedule: CapacitySchedule, params: CostParams) -> float:
    return float(params.beta * schedule.switching_units())


def total_cost(schedule: CapacitySchedule, params: CostParams) -> float:
    return operating_cost(schedule, params) + switching_cost(schedule, params)


@dataclass
class CostReport:
    operating_cost: float
    switching_cost: float
    total_cost: float
    total_workload: float
    savings_vs_baseline: float | None
    bound_ratio: float
    bound_limit: float
    provenance: str = "none"

    def as_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "operating_cost": self.operating_cost,
            "switching_cost": self.switching_cost,
            "total_cost": self.total_cost,
            "total_workload": self.total_workload,
            "savings_vs_baseline": self.savings_vs_baseline,
            "bound_ratio": self.bound_ratio,
            "bound_limit": self.bound_limit,
        }


def cost_report(schedule: CapacitySchedule, released, params: CostParams,
                baseline: CapacitySchedule | None = None) -> CostReport:
    """Account a schedule: operating + switching, savings, bound ratio.

    The baseline (usually follow-the-workload) must span the same horizon.
    bound_ratio is total cost over the (e0+e1)*sum(L) floor that any
    completing schedule must pay; bound_limit is the competitive-ratio cap
    (e0+e1+2*beta)/(e0+e1).
    """
    if baseline is not None and baseline.horizon != schedule.horizon:
        raise ValueError(
            f"baseline horizon {baseline.horizon} != schedule horizon {schedule.horizon}"
        )
    operating = operating_cost(schedule, params)
    switching = switching_cost(schedule, params)
    total = operating + switching
    workload = float(curve_values(released).sum())

    savings = None
    if baseline is not None:
        base_total = total_cost(baseline, params)
        if base_total > 0:
            savings = 1.0 - total / base_total
        else:
            savings = 0.0 if total == 0 else -math.inf
    floor = params.energy_coeff * workload
    ratio = total / floor if floor > 0 else (0.0 if total == 0 else math.inf)
    limit = (params.energy_coeff + 2.0 * params.beta) / params.energy_coeff
    return CostReport(operating, switching, total, workload, savings, ratio, limit,
                      schedule.provenance)


def check_competitive_bound(report: CostReport):
    """Pass iff total cost stays within (e0+e1+2*beta) * total workload."""
    if report.total_workload <= 0:
        raise ValueError("competitive bound needs a positive total workload")
    return report.bound_ratio <= report.bound_limit + 1e-9, report.bound_ratio


@dataclass
class PowerParams:
    """Per-component power scaling and idle terms (Watts)."""

    cpu_scale: float = 25.70
    disk_scale: float = 7.21
    dops_scale: float = 0.0
    net_scale: float = 0.66
    cpu_idle: float = 60.30
    disk_idle: float = 0.0
    dops_idle: float = 0.0
    net_idle: float = 0.0

    def validate(self) -> None:
        for name, value in vars(self).items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


@dataclass
class MachineMetrics:
    """One machine-slot measurement row."""

    slot: int
    machine_id: str
    cpu_util: float
    disk_bytes: float
    disk_ops: float
    net_bytes: float

    def validate(self) -> None:
        if not 0.0 <= self.cpu_util <= 1.0:
            raise ValueError(f"cpu utilization {self.cpu_util} outside [0, 1]")
        if min(self.disk_bytes, self.disk_ops, self.net_bytes) < 0:
            raise ValueError("metric counters must be nonnegative")


@dataclass
class EnergyReport:
    total_wh: float
    per_slot_wh: np.ndarray
    counter_maxima: dict
    machine_slots: int
    totals: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "total_wh": self.total_wh,
            "machine_slots": self.machine_slots,
            "counter_maxima": self.counter_maxima,
            "totals": self.totals,
            "per_slot_wh": [float(v) for v in self.per_slot_wh],
        }


def energy_from_metrics(metrics, power: PowerParams | None = None,
                        slot_seconds: float = 300.0) -> EnergyReport:
    """Total and per-slot energy from per-machine-slot measurements.

    Disk byte, disk op and network counters are normalized by their maxima
    over the whole ingested interval (an all-zero family normalizes to zero),
    then each active machine-slot draws

        cpu_scale*u_cpu + cpu_idle + disk_scale*u_disk + disk_idle
        + dops_scale*u_dops + dops_idle + net_scale*u_net + net_idle

    Watts, converted to Watt-hours over the slot length. No machines, no
    energy.
    """
    power = power or PowerParams()
    power.validate()
    if slot_seconds <= 0:
        raise ValueError(f"slot length must be positive, got {slot_seconds}")
    rows = list(metrics)
    if not rows:
        return EnergyReport(0.0, np.zeros(0), {}, 0)
    for row in rows:
        row.validate()

    disk_max = max(r.disk_bytes for r in rows)
    dops_max = max(r.disk_ops for r in rows)
    net_max = max(r.net_bytes for r in rows)
    maxima = {"disk_bytes": disk_max, "disk_ops": dops_max, "net_bytes": net_max}

    def norm(value, peak):
        return value / peak if peak > 0 else 0.0

    max_slot = max(r.slot for r in rows)
    per_slot = np.zeros(max_slot)
    total = 0.0
    for r in rows:
        watts = (
            power.cpu_scale * r.cpu_util + power.cpu_idle
            + power.disk_scale * norm(r.disk_bytes, disk_max) + power.disk_idle
            + power.dops_scale * norm(r.disk_ops, dops_max) + power.dops_idle
            + power.net_scale * norm(r.net_bytes, net_max) + power.net_idle
        )
        wh = watts * slot_seconds / 3600.0
        per_slot[r.slot - 1] += wh
        total += wh

    totals = {
        "cpu_util_sum": float(sum(r.cpu_util for r in rows)),
        "disk_bytes": float(sum(r.disk_bytes for r in rows)),
        "disk_ops": float(sum(r.disk_ops for r in rows)),
        "net_bytes": float(sum(r.net_bytes for r in rows)),
    }
    return EnergyReport(total, per_slot, maxima, len(rows), totals)


def read_metrics_csv(path) -> list:
    """Load `slot,machine_id,u_cpu,disk_bytes,disk_ops,net_bytes` rows."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if lineno == 1 and line.lower().startswith("slot,"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
            rows.append(MachineMetrics(
                int(parts[0]), parts[1], float(parts[2]),
                float(parts[3]), float(parts[4]), float(parts[5]),
            ))
    return rows
