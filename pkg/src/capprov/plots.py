"""Figure rendering for the report path. Files only, no interactive backends."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

plt.rcParams.update({
    "figure.figsize": (7.0, 4.0),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
})

_COLORS = {
    "offline": "tab:green",
    "vfw": "tab:orange",
    "gcp": "tab:red",
    "follow": "tab:blue",
    "none": "tab:gray",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_schedules(path, load, schedules: dict) -> Path:
    """Released workload against each schedule's provisioned capacity."""
    fig, ax = plt.subplots()
    slots = np.arange(1, np.asarray(load).size + 1)
    ax.step(slots, load, where="mid", color="0.4", lw=0.9, label="released load")
    for name, schedule in schedules.items():
        ax.step(np.arange(1, schedule.horizon + 1), schedule.m, where="mid",
                lw=1.2, color=_COLORS.get(name), label=f"{name} capacity")
    ax.set_xlabel("slot")
    ax.set_ylabel("servers")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)


def plot_savings_vs_deadline(path, rows) -> Path:
    """Savings against the follow baseline as the deadline grows."""
    fig, ax = plt.subplots()
    by_alg: dict = {}
    for row in rows:
        if row["algorithm"] == "follow":
            continue
        by_alg.setdefault(row["algorithm"], []).append(
            (row["deadline"], 100.0 * (row["savings_vs_follow"] or 0.0)))
    for name, points in by_alg.items():
        points.sort()
        ax.plot([p[0] for p in points], [p[1] for p in points], marker="o",
                color=_COLORS.get(name), label=name)
    ax.set_xlabel("deadline (slots)")
    ax.set_ylabel("cost savings vs follow (%)")
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)


def plot_savings_vs_delta(path, rows) -> Path:
    """Valley-filling savings across lookahead choices at a fixed deadline."""
    fig, ax = plt.subplots()
    points = sorted((row["delta"], 100.0 * (row["savings_vs_follow"] or 0.0)) for row in rows)
    ax.plot([p[0] for p in points], [p[1] for p in points], marker="o",
            color=_COLORS["vfw"], label="vfw")
    ax.set_xlabel("lookahead (slots)")
    ax.set_ylabel("cost savings vs follow (%)")
    ax.legend(loc="lower right", fontsize=8)
    return _save(fig, path)


def plot_energy_per_slot(path, name_reports: dict) -> Path:
    """Per-slot energy profile for each ingested metrics file."""
    fig, ax = plt.subplots()
    for name, report in name_reports.items():
        slots = np.arange(1, report.per_slot_wh.size + 1)
        ax.plot(slots, report.per_slot_wh, lw=1.1, color=_COLORS.get(name), label=name)
    ax.set_xlabel("slot")
    ax.set_ylabel("energy (Wh)")
    ax.legend(loc="upper right", fontsize=8)
    return _save(fig, path)
