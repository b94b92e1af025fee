"""Sparsity-promoting fixed-point solver with exact residual calibration.

The solver minimizes a p-quasi-norm (0 < p < 1) of the weight vector
subject to the compressed training constraints and non-negativity. Each
iteration reweights the columns by the current iterate raised to an
exponent q (p = 2(1-q)), solves a ridge-regularized least-squares step via
the SVD of the reweighted matrix, and picks the ridge parameter by
bisection so the step's residual equals the requested level exactly
(discrepancy-principle calibration). A damping step keeps every iterate
non-negative; entries driven to zero stay zero because the column
reweighting annihilates them.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.typing import NDArray

from .compression import CompressedSystem
from .dataset import FullRule

__all__ = [
    "SolverError",
    "FocussConfig",
    "SparseRule",
    "StepFactors",
    "factor_step",
    "regularized_step",
    "residual_norm_for_lambda",
    "calibrate_lambda",
    "CalibrationResult",
    "enforce_nonnegativity",
    "extract_rule",
    "iterate",
    "IterationResult",
    "solve",
]

logger = logging.getLogger(__name__)

#: Relative slack allowed on the residual contract at exit.
RESIDUAL_SLACK = 1e-8

#: Relative amplitude of the deterministic ramp added to the starting
#: weights. Exactly tied weights combined with identical matrix columns
#: are a fixed point of the reweighting map and would never sparsify;
#: the ramp breaks such ties while leaving zero weights at exact zero.
TIE_BREAK_REL = 1e-9


class SolverError(RuntimeError):
    """Numerical failure inside the solver (non-finite iterate, empty rule)."""


@dataclass(frozen=True)
class FocussConfig:
    """Solver settings.

    Parameters
    ----------
    residual_tol : float
        Target two-norm of the constraint residual (>= 0). Each iteration
        calibrates its ridge parameter so the step lands on this level.
    exponent : float
        Reweighting exponent q in (0.5, 1); the induced quasi-norm order
        is p = 2(1-q). Default 0.75 (p = 0.5).
    max_iters : int
        Iteration cap.
    conv_tol : float
        Relative-change stopping threshold.
    prune_rel : float
        Entries below prune_rel times the largest weight are dropped when
        the rule is extracted (with an automatic relaxation if pruning
        would break the residual contract).
    svd_cutoff : float
        Relative singular-value cutoff inside each iteration's SVD.
    """

    residual_tol: float
    exponent: float = 0.75
    max_iters: int = 300
    conv_tol: float = 1e-9
    prune_rel: float = 1e-10
    svd_cutoff: float = 1e-14

    def __post_init__(self) -> None:
        if not (self.residual_tol >= 0 and np.isfinite(self.residual_tol)):
            raise ValueError(f"residual_tol must be finite and >= 0, got {self.residual_tol}")
        if not 0.5 < self.exponent < 1.0:
            raise ValueError(f"exponent must lie in (0.5, 1), got {self.exponent}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        for name in ("conv_tol", "prune_rel", "svd_cutoff"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")


@dataclass
class SparseRule:
    """A trained sparse quadrature rule plus solve diagnostics."""

    indices: NDArray[np.int64]
    nodes: NDArray[np.float64]
    weights: NDArray[np.float64]
    residual_norm: float
    iterations_used: int = 0
    lambda_history: list[float] = field(default_factory=list)
    saturated: bool = False
    stagnated: bool = False
    method: str = "focuss"
    row_residual_max: float | None = None

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])

    def dense_weights(self, n_nodes: int) -> NDArray[np.float64]:
        """Weights scattered back onto the full rule's node indexing."""
        out = np.zeros(n_nodes)
        out[self.indices] = self.weights
        return out

    def diagnostics(self) -> dict:
        """JSON-serializable solve report."""
        data = {
            "method": self.method,
            "size": self.size,
            "residual_norm": self.residual_norm,
            "iterations_used": self.iterations_used,
            "lambda_history": [float(v) for v in self.lambda_history],
            "saturated": self.saturated,
            "stagnated": self.stagnated,
        }
        if self.row_residual_max is not None:
            data["row_residual_max"] = self.row_residual_max
        return data


@dataclass(frozen=True)
class StepFactors:
    """SVD of the column-reweighted constraint matrix for one iteration.

    Only singular triplets above the relative cutoff are retained; the
    retained left vectors span the reachable right-hand sides, anything
    outside that span is an incompressible residual component.
    """

    col_weights: NDArray[np.float64]
    left: NDArray[np.float64]
    singulars: NDArray[np.float64]
    right: NDArray[np.float64]

    @property
    def rank(self) -> int:
        return int(self.singulars.shape[0])


def factor_step(
    matrix: NDArray[np.float64],
    current: NDArray[np.float64],
    exponent: float,
    svd_cutoff: float = 1e-14,
) -> StepFactors:
    """Reweight the columns by current**exponent and factorize."""
    current = np.asarray(current, dtype=float)
    if np.any(current < 0):
        raise ValueError("current iterate must be non-negative")
    col_weights = current**exponent
    left, singulars, right = np.linalg.svd(matrix * col_weights[None, :], full_matrices=False)
    if singulars.size and singulars[0] > 0:
        keep = singulars > svd_cutoff * singulars[0]
    else:
        keep = np.zeros(singulars.shape, dtype=bool)
    return StepFactors(
        col_weights=col_weights,
        left=left[:, keep],
        singulars=singulars[keep],
        right=right[keep],
    )


def _apply_step(
    factors: StepFactors, rhs: NDArray[np.float64], ridge: float
) -> NDArray[np.float64]:
    """Ridge-filtered solve in mode space, mapped back through the weights."""
    coeffs = factors.left.T @ rhs
    s = factors.singulars
    if ridge == 0.0:
        filtered = coeffs / s
    else:
        filtered = coeffs * s / (s * s + ridge)
    return factors.col_weights * (factors.right.T @ filtered)


def regularized_step(
    matrix: NDArray[np.float64],
    rhs: NDArray[np.float64],
    current: NDArray[np.float64],
    exponent: float,
    ridge: float,
    svd_cutoff: float = 1e-14,
) -> NDArray[np.float64]:
    """One reweighted ridge step from a non-negative iterate.

    With ridge = 0 this is the minimum-norm (pseudoinverse) step in the
    reweighted variables, with small singular values suppressed by the
    cutoff. Entries of ``current`` at exactly zero produce zero columns
    and remain exactly zero in the output.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    factors = factor_step(matrix, current, exponent, svd_cutoff)
    step = _apply_step(factors, np.asarray(rhs, dtype=float), ridge)
    if not np.all(np.isfinite(step)):
        raise SolverError("non-finite step output")
    return step


def residual_norm_for_lambda(
    factors: StepFactors, rhs: NDArray[np.float64], ridge: float
) -> float:
    """Residual two-norm of the ridge step, from the SVD alone.

    Equals sqrt(sum_n (ridge/(s_n^2 + ridge) <u_n, rhs>)^2 + off-span^2)
    where the off-span term is the part of ``rhs`` outside the column span
    of the reweighted matrix; it vanishes when the right-hand side is
    reachable, and the expression then reduces to the pure filter-factor
    form. Cheap to evaluate for many ridge values once the factors exist.
    """
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    rhs = np.asarray(rhs, dtype=float)
    coeffs = factors.left.T @ rhs
    off_span = rhs - factors.left @ coeffs
    off2 = float(off_span @ off_span)
    if ridge == 0.0:
        return float(np.sqrt(off2))
    s2 = factors.singulars * factors.singulars
    damped = (ridge / (s2 + ridge)) * coeffs
    return float(np.sqrt(damped @ damped + off2))


class CalibrationResult(NamedTuple):
    ridge: float
    residual: float
    saturated: bool


def calibrate_lambda(
    factors: StepFactors, rhs: NDArray[np.float64], residual_tol: float
) -> CalibrationResult:
    """Pick the ridge value whose step residual equals ``residual_tol``.

    The residual is strictly increasing in the ridge parameter, so a
    bisection on its logarithm converges; the bracket starts at
    [1e-16, 1e6] times the leading singular value squared (the natural
    ridge scale) and is expanded if the target lies outside. Saturation:
    when even ridge = 0 (the pseudoinverse step) leaves a residual above
    the target, 0 is returned with the saturated flag set. A target above
    the norm of the right-hand side cannot be matched either; the bracket
    maximum is returned with a warning, as the zero solution already
    over-satisfies the constraints.
    """
    if residual_tol < 0:
        raise ValueError(f"residual_tol must be >= 0, got {residual_tol}")
    rhs = np.asarray(rhs, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs))
    floor = residual_norm_for_lambda(factors, rhs, 0.0)
    if floor >= residual_tol:
        return CalibrationResult(0.0, floor, floor > residual_tol)
    if factors.rank == 0:
        # Empty span: residual is rhs_norm for every ridge, handled above
        # unless the target exceeds it.
        warnings.warn("residual target above attainable range; constraints dropped")
        return CalibrationResult(0.0, floor, False)
    tol = 1e-10 * max(residual_tol, rhs_norm)
    scale = float(factors.singulars[0]) ** 2
    lo, hi = 1e-16 * scale, 1e6 * scale
    while residual_norm_for_lambda(factors, rhs, lo) > residual_tol and lo > 1e-250:
        lo *= 1e-8
    expanded = 0
    while residual_norm_for_lambda(factors, rhs, hi) < residual_tol:
        hi *= 1e8
        expanded += 1
        if expanded > 30:
            warnings.warn(
                f"residual target {residual_tol:.3e} exceeds attainable range "
                f"(rhs norm {rhs_norm:.3e}); constraints effectively dropped"
            )
            res = residual_norm_for_lambda(factors, rhs, hi)
            return CalibrationResult(hi, res, False)
    best = (np.inf, hi, residual_norm_for_lambda(factors, rhs, hi))
    for _ in range(200):
        mid = float(np.sqrt(lo * hi))
        res = residual_norm_for_lambda(factors, rhs, mid)
        gap = abs(res - residual_tol)
        if gap < best[0]:
            best = (gap, mid, res)
        if gap <= tol:
            break
        if res < residual_tol:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(best[1], best[2], False)


def enforce_nonnegativity(
    y_new: NDArray[np.float64], y_prev: NDArray[np.float64]
) -> tuple[NDArray[np.float64], float]:
    """Damp a step towards the previous iterate until it is non-negative.

    Returns the damped vector and the damping factor alpha: the largest
    value in (0, 1] such that alpha * y_new + (1 - alpha) * y_prev has no
    negative entry, computed entrywise as min over violated entries of
    y_prev / (y_prev - y_new). alpha = 1 means y_new was already feasible;
    alpha = 0 (a violated entry with zero previous value) returns y_prev
    unchanged, which the caller treats as stagnation.
    """
    y_new = np.asarray(y_new, dtype=float)
    y_prev = np.asarray(y_prev, dtype=float)
    if np.any(y_prev < 0):
        raise ValueError("previous iterate must be non-negative")
    negative = y_new < 0
    if not negative.any():
        return y_new, 1.0
    ratios = y_prev[negative] / (y_prev[negative] - y_new[negative])
    alpha = float(ratios.min())
    if alpha == 0.0:
        return y_prev.copy(), 0.0
    mixed = alpha * y_new + (1.0 - alpha) * y_prev
    np.maximum(mixed, 0.0, out=mixed)
    return mixed, alpha


def extract_rule(
    y: NDArray[np.float64],
    rule: FullRule,
    prune_rel: float,
    system: CompressedSystem | None = None,
) -> SparseRule:
    """Gather the surviving nodes of a weight vector into a sparse rule.

    Keeps indices with y >= prune_rel * max(y) (inclusive, so exact ties
    at the threshold survive and prune_rel = 0 keeps everything). When a
    system is supplied the residual of the pruned vector is recorded.
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("weights must be non-negative")
    if not np.any(y > 0):
        raise SolverError("all weights are zero: empty rule")
    if y.shape[0] != rule.size:
        raise ValueError(f"weight length {y.shape[0]} does not match rule size {rule.size}")
    keep = y >= prune_rel * y.max()
    indices = np.flatnonzero(keep)
    residual = float("nan")
    if system is not None:
        pruned = np.where(keep, y, 0.0)
        residual = float(np.linalg.norm(system.matrix @ pruned - system.rhs))
    return SparseRule(
        indices=indices.astype(np.int64),
        nodes=rule.nodes[indices],
        weights=y[indices].copy(),
        residual_norm=residual,
    )


class IterationResult(NamedTuple):
    weights: NDArray[np.float64]
    iterations: int
    lambda_history: list[float]
    saturated: bool
    stagnated: bool


def iterate(
    matrix: NDArray[np.float64],
    rhs: NDArray[np.float64],
    start: NDArray[np.float64],
    config: FocussConfig,
) -> IterationResult:
    """Run the calibrated reweighting iteration from a non-negative start.

    The starting vector gets a deterministic relative ramp of amplitude
    ``TIE_BREAK_REL`` (zeros stay zero) so that exactly tied entries over
    indistinguishable columns cannot pin the iteration on a symmetric
    saddle. Stops on relative change below ``conv_tol``, on the iteration
    cap, or on two consecutive fully-damped (alpha = 0) steps, which is
    reported as stagnation.
    """
    matrix = np.asarray(matrix, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    start = np.asarray(start, dtype=float)
    if np.any(start < 0):
        raise ValueError("starting weights must be non-negative")
    n = start.shape[0]
    y = start * (1.0 + TIE_BREAK_REL * (np.arange(1, n + 1) / n))
    lambda_history: list[float] = []
    saturated = False
    stagnated = False
    zero_alpha_streak = 0
    iterations = 0
    residual_allow = config.residual_tol * (1.0 + RESIDUAL_SLACK) + 1e-10 * float(
        np.linalg.norm(rhs)
    )
    for iterations in range(1, config.max_iters + 1):
        factors = factor_step(matrix, y, config.exponent, config.svd_cutoff)
        cal = calibrate_lambda(factors, rhs, config.residual_tol)
        lambda_history.append(cal.ridge)
        saturated = saturated or cal.saturated
        y_raw = _apply_step(factors, rhs, cal.ridge)
        if not np.all(np.isfinite(y_raw)):
            raise SolverError(f"non-finite iterate at iteration {iterations}")
        if not cal.saturated:
            step_residual = float(np.linalg.norm(matrix @ y_raw - rhs))
            if step_residual > residual_allow:
                raise SolverError(
                    f"residual control failed at iteration {iterations}: "
                    f"{step_residual:.6e} > {residual_allow:.6e}"
                )
        y_next, alpha = enforce_nonnegativity(y_raw, y)
        if y_next.min() < 0:
            raise SolverError("negative entry survived the damping step")
        if alpha == 0.0:
            zero_alpha_streak += 1
            logger.debug("iteration %d fully damped", iterations)
            if zero_alpha_streak >= 2:
                stagnated = True
                break
            y = y_next
            continue
        zero_alpha_streak = 0
        norm_prev = float(np.linalg.norm(y))
        change = float(np.linalg.norm(y_next - y)) / norm_prev if norm_prev > 0 else np.inf
        y = y_next
        if change < config.conv_tol:
            break
    return IterationResult(y, iterations, lambda_history, saturated, stagnated)


def solve(system: CompressedSystem, rule: FullRule, config: FocussConfig) -> SparseRule:
    """Train a sparse rule on a compressed constraint system.

    Starts from the full rule's weights (feasible and scale-correct),
    iterates the calibrated reweighting map, then prunes. If pruning at
    ``prune_rel`` pushes the residual past the contract the threshold is
    halved and pruning retried, up to ten times, so the returned rule
    honors the residual level actually reached by the iteration. A rule
    needing noticeably more nodes than the system rank is reported with a
    warning, never silently.
    """
    if system.n_nodes != rule.size:
        raise ValueError(
            f"system has {system.n_nodes} columns but the rule has {rule.size} nodes"
        )
    matrix, rhs = system.matrix, system.rhs
    result = iterate(matrix, rhs, rule.weights, config)
    y = result.weights
    if not np.any(y > 0):
        raise SolverError("iteration drove every weight to zero")
    unpruned_residual = float(np.linalg.norm(matrix @ y - rhs))
    allow = max(config.residual_tol, unpruned_residual) * (1.0 + RESIDUAL_SLACK)
    prune = config.prune_rel
    top = float(y.max())
    residual = unpruned_residual
    for attempt in range(11):
        keep = y >= prune * top
        pruned = np.where(keep, y, 0.0)
        residual = float(np.linalg.norm(matrix @ pruned - rhs))
        if residual <= allow or attempt == 10:
            break
        prune *= 0.5
    sparse = extract_rule(y, rule, prune, system=system)
    sparse.residual_norm = residual
    sparse.iterations_used = result.iterations
    sparse.lambda_history = result.lambda_history
    sparse.saturated = result.saturated
    sparse.stagnated = result.stagnated
    sparse.method = "focuss"
    if sparse.size > system.rank + 2:
        warnings.warn(
            f"sparse rule uses {sparse.size} nodes, more than rank + 2 = "
            f"{system.rank + 2}; consider tightening conv_tol or raising max_iters"
        )
    return sparse
