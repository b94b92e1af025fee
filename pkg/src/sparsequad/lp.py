"""One-norm baseline: sparse rules via linear programming.

Minimizes the sum of the (non-negative) weights subject to per-row bounds
|row residual| <= tolerance, the classical linear-programming surrogate
for sparse quadrature selection. The solver is a self-contained dense
two-phase revised simplex: Dantzig pricing for speed, falling back to
lowest-index (Bland) pricing when the objective stalls, which is what
guarantees escape from degenerate vertices. Problem sizes here are a few
hundred rows at most, so the basis is refactorized at every pivot rather
than updated incrementally.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .compression import CompressedSystem
from .dataset import FullRule
from .focuss import SparseRule, extract_rule

__all__ = ["SimplexError", "solve_l1"]

#: Extraction threshold for the LP path (vertex zeros are exact).
LP_PRUNE_REL = 1e-12

#: Relative feasibility slack allowed on the per-row bounds of the output.
LP_FEAS_SLACK = 1e-9


class SimplexError(RuntimeError):
    """Solver fault: singular basis, unbounded problem, or pivot limit."""


def _simplex(
    columns: NDArray[np.float64],
    rhs: NDArray[np.float64],
    cost: NDArray[np.float64],
    basis: list[int],
    allowed: NDArray[np.bool_],
    max_pivots: int,
    stall_limit: int = 60,
) -> tuple[list[int], NDArray[np.float64], float]:
    """Primal simplex over equality columns with a feasible starting basis.

    Entering column: most negative reduced cost, ties by lowest index;
    after ``stall_limit`` pivots without objective progress the pricing
    switches to pure lowest-index (Bland's anti-cycling rule) until
    progress resumes. Leaving row: minimum ratio, ties broken by lowest
    basic-variable index. Both rules are deterministic.
    """
    n_rows = columns.shape[0]
    basis = list(basis)
    cost_scale = 1.0 + float(np.abs(cost).max())
    best_obj = np.inf
    stall = 0
    bland = False
    for _ in range(max_pivots):
        basis_matrix = columns[:, basis]
        try:
            x_basic = np.linalg.solve(basis_matrix, rhs)
            multipliers = np.linalg.solve(basis_matrix.T, cost[basis])
        except np.linalg.LinAlgError as exc:
            raise SimplexError("singular basis") from exc
        objective = float(cost[basis] @ x_basic)
        if objective < best_obj - 1e-12 * cost_scale:
            best_obj = objective
            stall = 0
            bland = False
        else:
            stall += 1
            if stall > stall_limit:
                bland = True
        reduced = cost - multipliers @ columns
        reduced[basis] = 0.0
        candidates = np.flatnonzero(allowed & (reduced < -1e-9 * cost_scale))
        if candidates.size == 0:
            return basis, x_basic, objective
        if bland:
            entering = int(candidates[0])
        else:
            entering = int(candidates[np.argmin(reduced[candidates])])
        direction = np.linalg.solve(basis_matrix, columns[:, entering])
        positive = direction > 1e-11
        if not positive.any():
            raise SimplexError("unbounded direction (should not happen with y >= 0)")
        ratios = np.full(n_rows, np.inf)
        ratios[positive] = x_basic[positive] / direction[positive]
        best_ratio = float(ratios.min())
        ties = np.flatnonzero(ratios <= best_ratio + 1e-12 * (1.0 + abs(best_ratio)))
        leaving = int(min(ties, key=lambda r: basis[r]))
        basis[leaving] = entering
    raise SimplexError(f"pivot limit {max_pivots} exceeded")


def _standard_form(
    matrix: NDArray[np.float64], rhs: NDArray[np.float64], tol: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], int]:
    """Equality form with slacks for the two-sided row bounds.

    tol = 0 keeps the rows as equalities (the two-sided form would make
    every slack pair degenerate and the basis singular). Rows are
    equilibrated to unit scale, which leaves the feasible set unchanged
    because the bounds are scaled alongside.
    """
    n_rows, n_nodes = matrix.shape
    if tol == 0.0:
        full = matrix.copy()
        right = rhs.astype(float).copy()
    else:
        eye = np.eye(n_rows)
        zero = np.zeros((n_rows, n_rows))
        full = np.vstack(
            [np.hstack([matrix, eye, zero]), np.hstack([matrix, zero, -eye])]
        )
        right = np.concatenate([rhs + tol, rhs - tol])
    row_scale = np.maximum(np.abs(full).max(axis=1), np.abs(right))
    row_scale[row_scale == 0] = 1.0
    full /= row_scale[:, None]
    right = right / row_scale
    negative = right < 0
    full[negative] *= -1.0
    right[negative] *= -1.0
    return full, right, n_nodes


def _phase_one(
    full: NDArray[np.float64], right: NDArray[np.float64], max_pivots: int
) -> tuple[NDArray[np.float64], NDArray[np.float64], list[int]]:
    """Find a basic feasible point, preferring natural slack columns."""
    n_rows, n_cols = full.shape
    basis = [-1] * n_rows
    for j in range(n_cols):
        col = full[:, j]
        nonzero = np.flatnonzero(col)
        if nonzero.size == 1:
            r = int(nonzero[0])
            if basis[r] < 0 and col[r] == 1.0:
                basis[r] = j
    missing = [r for r in range(n_rows) if basis[r] < 0]
    if not missing:
        # The slack basis is feasible outright (right >= 0 by construction).
        return full, right, basis
    artificial = np.zeros((n_rows, len(missing)))
    for j, r in enumerate(missing):
        artificial[r, j] = 1.0
        basis[r] = n_cols + j
    table = np.hstack([full, artificial])
    cost = np.concatenate([np.zeros(n_cols), np.ones(len(missing))])
    allowed = np.ones(table.shape[1], dtype=bool)
    allowed[n_cols:] = False
    basis, _, objective = _simplex(table, right, cost, basis, allowed, max_pivots)
    if objective > 1e-8 * (1.0 + float(np.abs(right).max())):
        raise SimplexError(f"phase-1 failed to reach feasibility (objective {objective:.3e})")
    # Pivot surviving artificials out; rows they cannot leave are redundant.
    drop: list[int] = []
    for r, b in enumerate(basis):
        if b >= n_cols:
            basis_matrix = table[:, basis]
            unit = np.zeros(n_rows)
            unit[r] = 1.0
            row = np.linalg.solve(basis_matrix.T, unit) @ table[:, :n_cols]
            pivots = np.flatnonzero(np.abs(row) > 1e-9)
            if pivots.size:
                basis[r] = int(pivots[0])
            else:
                drop.append(r)
    if drop:
        keep = [r for r in range(n_rows) if r not in drop]
        return full[keep], right[keep], [basis[r] for r in keep]
    return full, right, basis


def solve_l1(
    system: CompressedSystem,
    rule: FullRule,
    residual_tol: float,
    max_pivots: int = 100_000,
) -> SparseRule:
    """Minimum weight-sum rule under per-row residual bounds.

    Solves min sum(y) subject to |(matrix @ y - rhs)_n| <= residual_tol
    for every row and y >= 0, returning a basic optimal vertex. Basic
    solutions carry at most one structural nonzero per row pair, so the
    extracted rule satisfies size <= 2 * rank (and in practice <= rank,
    since one slack of each bound pair must stay basic). Note the
    tolerance here is per row, not the two-norm ball used by the
    reweighting solver; the comparison harness reports both norms.
    """
    if residual_tol < 0:
        raise ValueError(f"residual_tol must be >= 0, got {residual_tol}")
    if system.n_nodes != rule.size:
        raise ValueError(
            f"system has {system.n_nodes} columns but the rule has {rule.size} nodes"
        )
    matrix, rhs = system.matrix, system.rhs
    full, right, n_nodes = _standard_form(matrix, rhs, residual_tol)
    full, right, basis = _phase_one(full, right, max_pivots)
    cost = np.zeros(full.shape[1])
    cost[:n_nodes] = 1.0
    allowed = np.ones(full.shape[1], dtype=bool)
    basis, x_basic, _ = _simplex(full, right, cost, basis, allowed, max_pivots)
    solution = np.zeros(full.shape[1])
    solution[np.asarray(basis)] = x_basic
    y = np.maximum(solution[:n_nodes], 0.0)
    if not np.all(np.isfinite(y)):
        raise SimplexError("non-finite simplex solution")

    feasible_max = residual_tol * (1.0 + LP_FEAS_SLACK) + 1e-13 * float(
        np.abs(rhs).max() if rhs.size else 1.0
    )
    prune = LP_PRUNE_REL
    top = float(y.max()) if np.any(y > 0) else 0.0
    if top == 0.0:
        raise SimplexError("simplex returned the zero vector for a feasible system")
    for attempt in range(11):
        pruned = np.where(y >= prune * top, y, 0.0)
        row_residuals = matrix @ pruned - rhs
        if float(np.abs(row_residuals).max()) <= feasible_max or attempt == 10:
            break
        prune *= 0.5
    sparse = extract_rule(y, rule, prune, system=system)
    sparse.method = "l1-lp"
    sparse.row_residual_max = float(np.abs(row_residuals).max())
    if sparse.size > 2 * system.rank:
        raise SimplexError(
            f"basic solution has {sparse.size} nonzeros, above 2 * rank = {2 * system.rank}"
        )
    return sparse
