"""Delimited and JSON output writers. Byte-identical for identical inputs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .schedule import CapacitySchedule


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8", newline="\n")
    return path


def write_curve_csv(path, values) -> Path:
    return write_csv(path, ["slot", "load"],
                     [(t + 1, v) for t, v in enumerate(np.asarray(values, dtype=float))])


def write_schedule_csv(path, schedule: CapacitySchedule) -> Path:
    header = ["slot", "capacity", "executed"]
    with_modes = schedule.modes is not None
    with_backlog = schedule.backlog is not None
    if with_modes:
        header.append("mode")
    if with_backlog:
        header.append("backlog")
    rows = []
    for t in range(schedule.horizon):
        row = [t + 1, schedule.m[t], schedule.x[t]]
        if with_modes:
            row.append(schedule.modes[t])
        if with_backlog:
            row.append(schedule.backlog[t])
        rows.append(row)
    return write_csv(path, header, rows)


def write_sweep_csv(path, rows) -> Path:
    header = ["deadline", "delta", "algorithm", "operating_cost", "switching_cost",
              "total_cost", "savings_vs_follow"]
    return write_csv(path, header, [[row.get(k, "") for k in header] for row in rows])


def write_cluster_csv(path, table_rows) -> Path:
    header = ["cluster", "jobs", "pct_jobs", "input_mb", "shuffle_mb", "output_mb",
              "deadline_slots"]
    return write_csv(path, header, [[row[k] for k in header] for row in table_rows])


def write_energy_outputs(out_dir, name_reports, baseline_name) -> list:
    """Energy/metric comparison table plus per-slot profiles and a JSON dump.

    name_reports maps schedule name -> EnergyReport; percentage reductions are
    relative to the baseline column.
    """
    out_dir = Path(out_dir)
    files = []
    names = list(name_reports)
    metrics = [("energy_wh", lambda r: r.total_wh),
               ("cpu_util_sum", lambda r: r.totals.get("cpu_util_sum", 0.0)),
               ("disk_bytes", lambda r: r.totals.get("disk_bytes", 0.0)),
               ("disk_ops", lambda r: r.totals.get("disk_ops", 0.0)),
               ("net_bytes", lambda r: r.totals.get("net_bytes", 0.0))]
    header = ["metric"]
    for name in names:
        header.append(name)
        if name != baseline_name:
            header.append(f"{name}_pct_reduction")
    rows = []
    base = name_reports[baseline_name]
    for label, getter in metrics:
        row = [label]
        base_value = getter(base)
        for name in names:
            value = getter(name_reports[name])
            row.append(value)
            if name != baseline_name:
                row.append(100.0 * (1.0 - value / base_value) if base_value else 0.0)
        rows.append(row)
    files.append(write_csv(out_dir / "energy_comparison.csv", header, rows))

    for name, report in name_reports.items():
        files.append(write_csv(
            out_dir / f"energy_per_slot_{name}.csv", ["slot", "wh"],
            [(t + 1, v) for t, v in enumerate(report.per_slot_wh)],
        ))
    files.append(write_json(out_dir / "energy.json",
                            {name: report.as_dict() for name, report in name_reports.items()}))
    return files


def write_experiment_outputs(result, padded_load, instance) -> list:
    """Write curves, schedules, reports and figures for one experiment run."""
    from . import plots

    out_dir = Path(result.config.out_dir)
    files = [write_curve_csv(out_dir / "workload.csv", padded_load)]
    for name, schedule in result.schedules.items():
        files.append(write_schedule_csv(out_dir / f"schedule_{name}.csv", schedule))
    payload = {
        "config": result.config.as_dict(),
        "reports": {name: report.as_dict() for name, report in result.reports.items()},
    }
    files.append(write_json(out_dir / "report.json", payload))
    if instance.cluster_model is not None and instance.jobs:
        files.append(write_cluster_csv(out_dir / "clusters.csv",
                                       instance.cluster_model.table_rows(instance.jobs)))
    files.append(plots.plot_schedules(out_dir / "schedule.png", padded_load, result.schedules))
    return files
