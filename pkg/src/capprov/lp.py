"""Dense linear programming: a small two-phase simplex solver plus the
capacity-window program builders shared by the offline and per-slot
online optimizations.

Every LP in this package is tiny (tens to a few thousand variables), so a
dense tableau with vectorized pivots is entirely adequate and keeps the
solver dependency-free and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LE = "<="
EQ = "="
GE = ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

# Pivot / feasibility threshold; callers compare results at 1e-6.
PIVOT_TOL = 1e-9

# Consecutive non-improving pivots tolerated before switching to Bland's rule.
_STALL_LIMIT = 40


class LpFormatError(ValueError):
    """Structurally malformed problem (arity mismatch, bad bounds or relation).

    Distinct from infeasibility, which is a valid solver outcome.
    """


@dataclass
class LpProblem:
    """min objective . x  subject to rows (a . x {<=,=,>=} b) and variable bounds.

    bounds holds one (lower, upper) pair per variable; upper may be +inf,
    lower must be finite. Finite upper bounds are handled as explicit rows
    inside the solver.
    """

    objective: np.ndarray
    rows: list = field(default_factory=list)
    bounds: list = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if not self.bounds:
            self.bounds = [(0.0, math.inf)] * self.objective.size

    @property
    def num_vars(self) -> int:
        return int(self.objective.size)

    def add_row(self, coeffs, relation: str, rhs: float) -> None:
        self.rows.append((np.asarray(coeffs, dtype=float), relation, float(rhs)))

    def validate(self) -> None:
        n = self.num_vars
        if n == 0:
            raise LpFormatError("problem has no variables")
        if len(self.bounds) != n:
            raise LpFormatError(f"{len(self.bounds)} bounds for {n} variables")
        for i, (coeffs, relation, rhs) in enumerate(self.rows):
            if coeffs.shape != (n,):
                raise LpFormatError(f"row {i} has arity {coeffs.size}, expected {n}")
            if relation not in (LE, EQ, GE):
                raise LpFormatError(f"row {i} has unknown relation {relation!r}")
            if not math.isfinite(rhs):
                raise LpFormatError(f"row {i} has non-finite rhs {rhs!r}")
        for j, (lo, hi) in enumerate(self.bounds):
            if not math.isfinite(lo):
                raise LpFormatError(f"variable {j} needs a finite lower bound")
            if lo > hi:
                raise LpFormatError(f"variable {j} has lower bound {lo} > upper bound {hi}")


@dataclass
class LpSolution:
    status: str
    values: np.ndarray | None
    objective_value: float

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve a dense LP by two-phase simplex.

    Returns an LpSolution whose objective_value is recomputed as c . x from
    the returned point, so the reported optimum is always attained by the
    reported vertex. Deterministic for a fixed problem.
    """
    problem.validate()
    c = problem.objective
    n = problem.num_vars
    lower = np.array([b[0] for b in problem.bounds], dtype=float)
    upper = np.array([b[1] for b in problem.bounds], dtype=float)

    # Shift x = y + lower so every variable has lower bound 0.
    rows = []
    for coeffs, relation, rhs in problem.rows:
        rows.append((coeffs, relation, rhs - float(coeffs @ lower)))
    for j in np.flatnonzero(np.isfinite(upper)):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((e, LE, upper[j] - lower[j]))

    status, y = _two_phase(c, rows, n)
    if status != OPTIMAL:
        return LpSolution(status, None, math.nan)
    x = y + lower
    _check_point(problem, x)
    return LpSolution(OPTIMAL, x, float(c @ x))


def _check_point(problem: LpProblem, x: np.ndarray, tol: float = 1e-6) -> None:
    for i, (coeffs, relation, rhs) in enumerate(problem.rows):
        lhs = float(coeffs @ x)
        scale = 1.0 + abs(rhs)
        if relation == LE and lhs > rhs + tol * scale:
            raise RuntimeError(f"solver returned point violating row {i}: {lhs} </= {rhs}")
        if relation == GE and lhs < rhs - tol * scale:
            raise RuntimeError(f"solver returned point violating row {i}: {lhs} >/= {rhs}")
        if relation == EQ and abs(lhs - rhs) > tol * scale:
            raise RuntimeError(f"solver returned point violating row {i}: {lhs} != {rhs}")


def _two_phase(c: np.ndarray, rows: list, n: int):
    m = len(rows)
    if m == 0:
        # Bounded below only at the lower bounds (all-zero shifted point)
        # unless some cost is negative, in which case the LP is unbounded.
        if np.any(c < -PIVOT_TOL):
            return UNBOUNDED, None
        return OPTIMAL, np.zeros(n)

    a_mat = np.vstack([r[0] for r in rows]).astype(float)
    b = np.array([r[2] for r in rows], dtype=float)
    relations = [r[1] for r in rows]

    flip = b < 0
    a_mat[flip] *= -1.0
    b[flip] *= -1.0
    relations = [_flip_relation(rel) if fl else rel for rel, fl in zip(relations, flip)]

    n_le = sum(1 for r in relations if r == LE)
    n_ge = sum(1 for r in relations if r == GE)
    n_art = sum(1 for r in relations if r in (GE, EQ))
    total = n + n_le + n_ge + n_art
    art_start = n + n_le + n_ge

    tableau = np.zeros((m + 1, total + 1))
    tableau[:m, :n] = a_mat
    tableau[:m, -1] = b
    basis = np.empty(m, dtype=int)
    si = n
    ti = n + n_le
    ai = art_start
    for i, relation in enumerate(relations):
        if relation == LE:
            tableau[i, si] = 1.0
            basis[i] = si
            si += 1
        elif relation == GE:
            tableau[i, ti] = -1.0
            tableau[i, ai] = 1.0
            basis[i] = ai
            ti += 1
            ai += 1
        else:
            tableau[i, ai] = 1.0
            basis[i] = ai
            ai += 1

    # Phase 1: minimize the sum of artificials.
    cost1 = np.zeros(total)
    cost1[art_start:] = 1.0
    _install_objective(tableau, basis, cost1)
    status = _simplex(tableau, basis)
    if status != OPTIMAL:
        raise RuntimeError("phase-1 simplex cannot be unbounded")
    if -tableau[-1, -1] > 1e-7:
        return INFEASIBLE, None

    # Drive leftover artificials out of the basis; drop redundant rows.
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= art_start:
            pivot_col = -1
            for j in range(art_start):
                if abs(tableau[i, j]) > PIVOT_TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                _pivot(tableau, i, pivot_col)
                basis[i] = pivot_col
            else:
                keep[i] = False
    if not keep.all():
        tableau = np.vstack([tableau[:m][keep], tableau[-1:]])
        basis = basis[keep]
        m = int(keep.sum())

    # Remove artificial columns (they are the last block before the rhs).
    tableau = np.hstack([tableau[:, :art_start], tableau[:, -1:]])

    # Phase 2 with the real objective.
    cost2 = np.zeros(art_start)
    cost2[:n] = c
    _install_objective(tableau, basis, cost2)
    status = _simplex(tableau, basis)
    if status != OPTIMAL:
        return status, None

    y = np.zeros(art_start)
    y[basis] = tableau[:m, -1]
    return OPTIMAL, y[:n]


def _flip_relation(relation: str) -> str:
    if relation == LE:
        return GE
    if relation == GE:
        return LE
    return EQ


def _install_objective(tableau: np.ndarray, basis: np.ndarray, cost: np.ndarray) -> None:
    zrow = np.zeros(tableau.shape[1])
    zrow[: cost.size] = cost
    for i, bv in enumerate(basis):
        cb = cost[bv]
        if cb != 0.0:
            zrow -= cb * tableau[i]
    tableau[-1] = zrow


def _pivot(tableau: np.ndarray, row: int, col: int, buf: np.ndarray | None = None) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    nonzero = np.flatnonzero(np.abs(factors) > 1e-13)
    if nonzero.size < tableau.shape[0] // 2 or buf is None:
        # Sparse update: touch only the rows that actually change.
        tableau[nonzero] -= np.multiply.outer(factors[nonzero], tableau[row])
    else:
        np.multiply(factors[:, None], tableau[row][None, :], out=buf)
        np.subtract(tableau, buf, out=tableau)
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0


def _simplex(tableau: np.ndarray, basis: np.ndarray) -> str:
    m = basis.size
    max_iter = 200 * (tableau.shape[0] + tableau.shape[1]) + 1000
    bland = False
    stall = 0
    last_obj = -tableau[-1, -1]
    buf = np.empty_like(tableau) if tableau.size > 200_000 else None
    for _ in range(max_iter):
        zrow = tableau[-1, :-1]
        if bland:
            improving = np.flatnonzero(zrow < -PIVOT_TOL)
            if improving.size == 0:
                return OPTIMAL
            col = int(improving[0])
        else:
            col = int(np.argmin(zrow))  # ties resolve to the lowest index
            if zrow[col] >= -PIVOT_TOL:
                return OPTIMAL
        column = tableau[:m, col]
        positive = column > PIVOT_TOL
        if not positive.any():
            return UNBOUNDED
        ratios = np.full(m, math.inf)
        ratios[positive] = tableau[:m, -1][positive] / column[positive]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + PIVOT_TOL * (1.0 + abs(best)))
        row = int(ties[np.argmin(basis[ties])]) if ties.size > 1 else int(ties[0])
        _pivot(tableau, row, col, buf)
        basis[row] = col
        obj = -tableau[-1, -1]
        if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
            last_obj = obj
        else:
            stall += 1
            if stall > _STALL_LIMIT:
                bland = True
    raise RuntimeError("simplex failed to terminate within the iteration limit")


@dataclass
class CapacityWindowLp:
    """An LP fragment over a window of capacity decisions m_0..m_{W-1}.

    The switching term beta * sum |m_j - m_{j-1}| is linearized through
    auxiliary pairs (u_j, v_j >= 0) with m_j - m_{j-1} = u_j - v_j; at any
    optimal vertex sum(u_j + v_j) equals the sum of absolute differences.
    Callers append their own coupling rows (window totals, prefix demands)
    before solving.
    """

    problem: LpProblem
    m_vars: list
    u_vars: list
    v_vars: list

    def capacity_values(self, solution: LpSolution) -> np.ndarray:
        return solution.values[self.m_vars]

    def switch_total(self, solution: LpSolution) -> float:
        return float(solution.values[self.u_vars].sum() + solution.values[self.v_vars].sum())


def linearize_abs_objective(
    window_len: int,
    prev_capacity: float,
    energy_coeff: float,
    switch_coeff: float,
    max_capacity: float = math.inf,
) -> CapacityWindowLp:
    """Build the capacity-window fragment with a linearized switching objective."""
    if window_len < 1:
        raise ValueError(f"window length must be >= 1, got {window_len}")
    if prev_capacity < 0:
        raise ValueError(f"previous capacity must be >= 0, got {prev_capacity}")
    if switch_coeff < 0:
        raise ValueError("absolute-value linearization requires a nonnegative switch cost")

    w = window_len
    objective = np.concatenate([
        np.full(w, float(energy_coeff)),
        np.full(2 * w, float(switch_coeff)),
    ])
    bounds = [(0.0, float(max_capacity))] * w + [(0.0, math.inf)] * (2 * w)
    lp = LpProblem(objective, bounds=bounds)
    for j in range(w):
        coeffs = np.zeros(3 * w)
        coeffs[j] = 1.0
        if j > 0:
            coeffs[j - 1] = -1.0
        coeffs[w + j] = -1.0
        coeffs[2 * w + j] = 1.0
        lp.add_row(coeffs, EQ, prev_capacity if j == 0 else 0.0)
    return CapacityWindowLp(lp, list(range(w)), list(range(w, 2 * w)), list(range(2 * w, 3 * w)))


def solve_capacity_window(
    window_len: int,
    prev_capacity: float,
    total: float,
    energy_coeff: float,
    switch_coeff: float,
    max_capacity: float,
    prefix_lower=None,
) -> np.ndarray:
    """Optimize one planning window: minimize energy + switching subject to a
    window-total equality and optional prefix lower bounds.

    prefix_lower[j] bounds sum(m_0..m_j) from below; entry 0 is applied as a
    variable bound on m_0. Only callers commit m_0; the rest of the window is
    re-planned at the next slot.
    """
    total = max(0.0, float(total))
    lows = np.zeros(window_len) if prefix_lower is None else np.asarray(prefix_lower, dtype=float)
    if lows.size > window_len:
        raise ValueError("more prefix bounds than window slots")
    lows = np.maximum(lows, 0.0)

    # Demands beyond what the fleet or the window total can serve are hard
    # errors; sub-tolerance overshoot is accumulated float drift and is
    # clipped so the step LP stays solvable.
    slack = 1e-6 * (1.0 + max_capacity)
    if math.isfinite(max_capacity):
        limits = (np.arange(lows.size) + 1.0) * max_capacity
        if lows.size and float((lows - limits).max()) > slack:
            j = int((lows - limits).argmax())
            raise ValueError(f"demand {lows[j]} due within {j + 1} slots exceeds fleet capacity")
        lows = np.minimum(lows, limits)
        if total > window_len * max_capacity + slack:
            raise ValueError(f"window total {total} exceeds fleet capacity")
        total = min(total, window_len * max_capacity)
    if lows.size and float(lows.max()) > total + slack:
        raise ValueError(f"prefix demand {lows.max()} exceeds the window total {total}")
    lows = np.minimum(lows, total)

    # Nothing to place and nothing due: the all-zero window is optimal.
    if total <= 1e-12 and (not lows.size or lows.max() <= 1e-12):
        return np.zeros(window_len)

    frag = linearize_abs_objective(window_len, prev_capacity, energy_coeff, switch_coeff, max_capacity)
    lp = frag.problem
    if lows.size:
        lp.bounds[0] = (min(max(lows[0], 0.0), max_capacity), float(max_capacity))
    row = np.zeros(3 * window_len)
    row[:window_len] = 1.0
    lp.add_row(row, EQ, total)
    for j in range(1, lows.size):
        if lows[j] > 1e-12:
            coeffs = np.zeros(3 * window_len)
            coeffs[: j + 1] = 1.0
            lp.add_row(coeffs, GE, lows[j])
    solution = solve_lp(lp)
    if not solution.optimal:
        raise RuntimeError(
            f"capacity window unsolvable ({solution.status}); total={total}, prefixes={lows}"
        )
    return np.clip(frag.capacity_values(solution), 0.0, max_capacity)
