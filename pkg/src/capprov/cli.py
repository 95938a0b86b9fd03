"""Command-line experiment harness.

Subcommands: simulate, sweep, estimate, classify, energy. Flags override
config-file values; exit status is nonzero with a stage-tagged message on
any pipeline failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import plots, reporting
from .costs import PowerParams, energy_from_metrics, read_metrics_csv
from .estimation import estimate_job_time, estimate_lengths, length_in_slots
from .experiment import (
    ExperimentConfig,
    StageError,
    load_config,
    run_experiment,
    sweep_deadline,
    sweep_lookahead,
)
from .jobprep import classify_kmeans
from .workload import ingest_trace


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--trace", help="job trace CSV")
    parser.add_argument("--synthetic", help="synthetic spec, e.g. sinusoid:mean=10,pmr=3")
    parser.add_argument("--algorithm", choices=("offline", "vfw", "gcp", "follow", "none"))
    parser.add_argument("--deadline", type=int)
    parser.add_argument("--delta", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--e0", type=float)
    parser.add_argument("--e1", type=float)
    parser.add_argument("--fleet", type=float)
    parser.add_argument("--slot-seconds", type=float, dest="slot_seconds")
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--gcp-uniform", action="store_true", default=None,
                        help="one uniform deadline for gcp instead of k-means classes")
    parser.add_argument("--dynamic-continuations", action="store_true", default=None,
                        help="release long-job continuations as heads actually finish")


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        key: getattr(args, key)
        for key in ("trace", "synthetic", "algorithm", "deadline", "delta", "beta",
                    "e0", "e1", "fleet", "slot_seconds", "horizon", "seed", "out_dir",
                    "gcp_uniform", "dynamic_continuations")
        if hasattr(args, key)
    }
    return load_config(args.config, overrides)


def _cmd_simulate(args) -> int:
    config = _config_from_args(args)
    result = run_experiment(config)
    for name, report in sorted(result.reports.items()):
        savings = report.savings_vs_baseline
        extra = f", savings {100 * savings:.2f}%" if savings is not None else ""
        print(f"{name}: total cost {report.total_cost:.4f} "
              f"(operating {report.operating_cost:.4f}, switching {report.switching_cost:.4f}"
              f"{extra})")
    for path in result.files:
        print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    config = _config_from_args(args)
    config.validate()
    out_dir = Path(config.out_dir) if config.out_dir else None
    if args.param == "deadline":
        rows = sweep_deadline(config, range(args.start, args.stop + 1))
        figure = plots.plot_savings_vs_deadline
        name = "sweep_deadline"
    else:
        rows = sweep_lookahead(config)
        figure = plots.plot_savings_vs_delta
        name = "sweep_delta"
    for row in rows:
        savings = row["savings_vs_follow"]
        pct = f"{100 * savings:.2f}%" if savings is not None else "n/a"
        print(f"D={row['deadline']} {row['algorithm']}: cost {row['total_cost']:.4f}, "
              f"savings {pct}")
    if out_dir:
        print(f"wrote {reporting.write_sweep_csv(out_dir / (name + '.csv'), rows)}")
        print(f"wrote {figure(out_dir / (name + '.png'), rows)}")
    return 0


def _cmd_estimate(args) -> int:
    config = _config_from_args(args)
    if not config.trace:
        raise StageError("ingest", "estimate needs --trace")
    result = ingest_trace(config.trace)
    rows = []
    for job in result.jobs:
        seconds = estimate_job_time(job, config.estimation)
        rows.append((job.id, seconds, length_in_slots(seconds, config.slot_seconds)))
    for job_id, seconds, slots in rows:
        print(f"{job_id}: {seconds:.3f} s, {slots} slot(s)")
    if result.rejected:
        print(f"rejected {len(result.rejected)} records", file=sys.stderr)
    if config.out_dir:
        path = reporting.write_csv(Path(config.out_dir) / "estimates.csv",
                                   ["job_id", "seconds", "length_slots"], rows)
        print(f"wrote {path}")
    return 0


def _cmd_classify(args) -> int:
    config = _config_from_args(args)
    if args.k is not None:
        config.k = args.k
        config.deadline_pool = []
    if not config.trace:
        raise StageError("ingest", "classify needs --trace")
    result = ingest_trace(config.trace)
    if not result.jobs:
        raise StageError("ingest", "no usable jobs in the trace")
    estimate_lengths(result.jobs, config.slot_seconds, config.estimation)
    model = classify_kmeans(result.jobs, config.k, config.resolved_pool(), config.seed)
    table = model.table_rows(result.jobs)
    for row in table:
        print(f"cluster {row['cluster']}: {row['jobs']} jobs ({row['pct_jobs']:.2f}%), "
              f"deadline {row['deadline_slots']}")
    if config.out_dir:
        out_dir = Path(config.out_dir)
        print(f"wrote {reporting.write_cluster_csv(out_dir / 'clusters.csv', table)}")
        assignments = [(j.id, model.assignment[j.id], j.deadline_slots) for j in result.jobs]
        print(f"wrote {reporting.write_csv(out_dir / 'assignments.csv', ['job_id', 'cluster', 'deadline_slots'], assignments)}")
    return 0


def _cmd_energy(args) -> int:
    config = _config_from_args(args)
    labelled = {}
    for item in args.metrics:
        name, _, path = item.partition("=")
        if not path:
            name, path = Path(name).stem, name
        labelled[name] = read_metrics_csv(path)
    if not labelled:
        raise StageError("ingest", "energy needs at least one --metrics file")
    baseline = args.baseline or next(iter(labelled))
    if baseline not in labelled:
        raise StageError("ingest", f"baseline {baseline!r} not among {sorted(labelled)}")
    reports = {
        name: energy_from_metrics(rows, PowerParams(), config.slot_seconds)
        for name, rows in labelled.items()
    }
    for name, report in reports.items():
        print(f"{name}: {report.total_wh:.4f} Wh over {report.machine_slots} machine-slots")
    if config.out_dir:
        for path in reporting.write_energy_outputs(config.out_dir, reports, baseline):
            print(f"wrote {path}")
        print(f"wrote {plots.plot_energy_per_slot(Path(config.out_dir) / 'energy_per_slot.png', reports)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capprov",
                                     description="Deadline-aware capacity provisioning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one provisioning algorithm and report costs")
    _add_common(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="sweep the deadline or the lookahead")
    _add_common(p_sweep)
    p_sweep.add_argument("--param", choices=("deadline", "delta"), default="deadline")
    p_sweep.add_argument("--start", type=int, default=1)
    p_sweep.add_argument("--stop", type=int, default=12)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_est = sub.add_parser("estimate", help="estimate job execution times from a trace")
    _add_common(p_est)
    p_est.set_defaults(func=_cmd_estimate)

    p_cls = sub.add_parser("classify", help="k-means deadline classes for a trace")
    _add_common(p_cls)
    p_cls.add_argument("--k", type=int, default=None)
    p_cls.set_defaults(func=_cmd_classify)

    p_energy = sub.add_parser("energy", help="energy totals from machine metrics files")
    _add_common(p_energy)
    p_energy.add_argument("--metrics", action="append", default=[],
                          help="name=metrics.csv (repeatable)")
    p_energy.add_argument("--baseline", help="name used for percentage reductions")
    p_energy.set_defaults(func=_cmd_energy)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"[error] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
