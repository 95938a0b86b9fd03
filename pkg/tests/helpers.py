"""Shared test fixtures: workload generators and independent oracles."""

from __future__ import annotations

import itertools
import math

import numpy as np

from capprov.lp import EQ, GE, LE, LpProblem
from capprov.workload import DeadlineDecomposedLoad


def random_curve(rng, slots: int, fleet: float) -> np.ndarray:
    """Nonnegative per-slot load below the fleet size, mixed shapes."""
    kind = rng.integers(4)
    if kind == 0:
        values = rng.uniform(0, fleet, slots)
    elif kind == 1:
        base = (1 + np.sin(2 * np.pi * np.arange(slots) / max(4, slots // 2))) / 2
        values = fleet * base * rng.uniform(0.3, 1.0)
        values *= rng.uniform(0.6, 1.4, slots)
    elif kind == 2:
        values = np.full(slots, rng.uniform(0.1, 0.5) * fleet)
        bursts = rng.choice(slots, size=max(1, slots // 10), replace=False)
        values[bursts] = rng.uniform(0.8, 1.0) * fleet
    else:
        values = np.repeat(rng.uniform(0, fleet, max(1, slots // 6 + 1)), 6)[:slots]
    return np.clip(values, 0.0, fleet)


def random_decomposition(rng, slots: int, nu: int, fleet: float,
                         min_deadline: int = 0) -> DeadlineDecomposedLoad:
    """Per-(deadline, slot) releases whose slot totals stay below the fleet.

    min_deadline=1 mirrors production deadline pools, where nothing is due in
    its own release slot; bulk due-now releases can make an online controller
    that deferred earlier work provably stuck, whatever it decides.
    """
    values = rng.uniform(0, 1, (nu + 1, slots))
    values[rng.uniform(size=values.shape) < 0.5] = 0.0
    values[:min(min_deadline, nu)] = 0.0
    totals = values.sum(axis=0)
    scale = rng.uniform(0.2, 0.95) * fleet
    busy = totals > 0
    values[:, busy] *= scale * rng.uniform(0.2, 1.0, int(busy.sum())) / totals[busy]
    return DeadlineDecomposedLoad(values)


def random_feasible_assignment(rng, decomp: DeadlineDecomposedLoad):
    """Place every release inside its own deadline window, at random.

    Returns the per-slot execution totals of a feasible (generally non-EDF)
    assignment over the padded horizon.
    """
    horizon = decomp.horizon + decomp.nu
    x = np.zeros(horizon)
    for d in range(decomp.nu + 1):
        for t in range(1, decomp.horizon + 1):
            amount = decomp.values[d, t - 1]
            if amount <= 0:
                continue
            slots = np.arange(t, t + d + 1)
            weights = rng.uniform(0, 1, slots.size)
            weights /= weights.sum()
            for slot, w in zip(slots, weights):
                x[slot - 1] += amount * w
    return x


def enumerate_lp_vertices(problem: LpProblem):
    """Brute-force oracle: enumerate basic points from every n-subset of
    active constraints (rows as equalities plus bounds), keep the feasible
    ones, and minimize the objective directly.
    """
    n = problem.num_vars
    eqs = []
    for coeffs, _, rhs in problem.rows:
        eqs.append((np.asarray(coeffs, dtype=float), float(rhs)))
    for j, (lo, hi) in enumerate(problem.bounds):
        e = np.zeros(n)
        e[j] = 1.0
        eqs.append((e, float(lo)))
        if math.isfinite(hi):
            eqs.append((e, float(hi)))

    best = None
    feasible_found = False
    for combo in itertools.combinations(range(len(eqs)), n):
        a_mat = np.vstack([eqs[i][0] for i in combo])
        rhs = np.array([eqs[i][1] for i in combo])
        if abs(np.linalg.det(a_mat)) < 1e-10:
            continue
        point = np.linalg.solve(a_mat, rhs)
        if not _lp_point_feasible(problem, point):
            continue
        feasible_found = True
        value = float(problem.objective @ point)
        if best is None or value < best:
            best = value
    return feasible_found, best


def _lp_point_feasible(problem: LpProblem, point: np.ndarray, tol: float = 1e-7) -> bool:
    for coeffs, relation, rhs in problem.rows:
        lhs = float(np.asarray(coeffs) @ point)
        if relation == LE and lhs > rhs + tol:
            return False
        if relation == GE and lhs < rhs - tol:
            return False
        if relation == EQ and abs(lhs - rhs) > tol:
            return False
    for j, (lo, hi) in enumerate(problem.bounds):
        if point[j] < lo - tol or point[j] > hi + tol:
            return False
    return True


def grid_offline_oracle(load: np.ndarray, due: np.ndarray, e0: float, e1: float,
                        beta: float, fleet: float, step: float = 0.05) -> float:
    """Exact optimum of the offline program restricted to a capacity/execution grid.

    Dynamic program over per-slot states (capacity index, cumulative-executed
    index). Returns the minimal total cost; load, due and the fleet size must
    be multiples of the step so the cumulative targets stay on the grid.
    """
    T = load.size
    cum_rel = np.cumsum(load)
    cum_due = np.cumsum(due)
    m_levels = int(round(fleet / step))
    w_levels = int(round(cum_rel[-1] / step))
    inf = math.inf

    # cost[m, w]; m_0 = 0 so only the w = 0 column of a virtual slot 0 is live.
    cost = np.full((m_levels + 1, w_levels + 1), inf)
    cost[0, 0] = 0.0
    switch_step = beta * step
    for t in range(1, T + 1):
        # Capacity change: 1-d distance transform along the m axis.
        a = cost.copy()
        for i in range(1, m_levels + 1):
            np.minimum(a[i], a[i - 1] + switch_step, out=a[i])
        for i in range(m_levels - 1, -1, -1):
            np.minimum(a[i], a[i + 1] + switch_step, out=a[i])
        # Execution: w may grow by at most the new capacity.
        new = np.full_like(cost, inf)
        for i in range(m_levels + 1):
            window = i + 1
            padded = np.concatenate([np.full(window - 1, inf), a[i]])
            swv = np.lib.stride_tricks.sliding_window_view(padded, window)
            new[i] = swv.min(axis=1) + e0 * i * step
        lo = int(math.ceil(round(cum_due[t - 1] / step, 9)))
        hi = int(math.floor(round(cum_rel[t - 1] / step, 9)))
        if lo > 0:
            new[:, :lo] = inf
        if hi < w_levels:
            new[:, hi + 1:] = inf
        cost = new

    best = float(cost[:, w_levels].min())
    return best + e1 * float(cum_rel[-1])


def naive_offline_oracle(load: np.ndarray, due: np.ndarray, e0: float, e1: float,
                         beta: float, fleet: float, step: float) -> float:
    """Literal enumeration over capacity grids (tiny horizons only).

    For each capacity path, executing as much as possible as early as
    possible dominates; any leftover at the end means no execution plan fits.
    """
    T = load.size
    cum_rel = np.cumsum(load)
    cum_due = np.cumsum(due)
    levels = np.arange(0.0, fleet + step / 2, step)
    best = math.inf
    for path in itertools.product(levels, repeat=T):
        cum_x = 0.0
        feasible = True
        for t in range(T):
            cum_x = min(cum_rel[t], cum_x + path[t])
            if cum_x < cum_due[t] - 1e-9:
                feasible = False
                break
        if not feasible or cum_x < cum_rel[-1] - 1e-9:
            continue
        switching = beta * float(np.abs(np.diff(np.array(path), prepend=0.0)).sum())
        value = e0 * float(sum(path)) + switching
        best = min(best, value)
    return best + e1 * float(cum_rel[-1])
