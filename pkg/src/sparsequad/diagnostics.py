"""A-priori error bound pieces and empirical test-set error measurement.

The integration error of a trained sparse rule splits into three
computable contributions: the energy discarded by compression, the
residual level allowed during training amplified by the snapshot
projection sums, and a parameter-coverage term driven by the Lipschitz
constant of the family and the fill distance of the training samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .compression import CompressedSystem
from .dataset import FullRule, FunctionFamily, TrainingSet
from .focuss import SparseRule

__all__ = [
    "BoundInputs",
    "ErrorReport",
    "fill_distance",
    "sf_constant",
    "apriori_bound",
    "empirical_error",
    "empirical_error_table",
    "estimate_lipschitz",
]


@dataclass(frozen=True)
class BoundInputs:
    """Scalar ingredients of the a-priori bound.

    weight_norm / sparse_weight_norm are the two-norms of the full and
    sparse weight vectors; tail_energy comes from the compression stage;
    residual_tol is the training residual level; projection_sum is the
    largest absolute sum of snapshot-onto-mode projections; lipschitz is
    the parameter Lipschitz constant of the family (user-supplied or
    estimated); fill_dist is the largest distance from the parameter
    domain to the training samples.
    """

    weight_norm: float
    sparse_weight_norm: float
    tail_energy: float
    residual_tol: float
    projection_sum: float
    lipschitz: float
    measure: float
    fill_dist: float

    def __post_init__(self) -> None:
        for name in (
            "weight_norm",
            "sparse_weight_norm",
            "tail_energy",
            "residual_tol",
            "projection_sum",
            "lipschitz",
            "measure",
            "fill_dist",
        ):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {value}")


@dataclass
class ErrorReport:
    """Bound addends, their total, and (optionally) measured errors."""

    svd_term: float
    residual_term: float
    coverage_term: float
    bound_total: float
    empirical_max_error: float | None = None
    error_table: NDArray[np.float64] | None = None

    def to_dict(self) -> dict:
        data = {
            "svd_term": self.svd_term,
            "residual_term": self.residual_term,
            "coverage_term": self.coverage_term,
            "bound_total": self.bound_total,
        }
        if self.empirical_max_error is not None:
            data["empirical_max_error"] = self.empirical_max_error
        return data


def fill_distance(train: TrainingSet, probe: TrainingSet) -> float:
    """Largest probe-to-training distance (Euclidean max-min).

    The probe set stands in for the continuum parameter domain; a denser
    probe gives a sharper estimate.
    """
    if train.param_dim != probe.param_dim:
        raise ValueError(
            f"dimension mismatch: train has {train.param_dim}, probe has {probe.param_dim}"
        )
    worst = 0.0
    block = 1024
    t = train.params
    for start in range(0, probe.size, block):
        chunk = probe.params[start : start + block]
        d2 = ((chunk[:, None, :] - t[None, :, :]) ** 2).sum(axis=2)
        worst = max(worst, float(np.sqrt(d2.min(axis=1).max())))
    return worst


def sf_constant(system: CompressedSystem, snapshots: NDArray[np.float64]) -> float:
    """Largest absolute sum of snapshot projections onto the kept modes.

    ``snapshots`` holds one node-space snapshot per row (the constraint
    rows of the uncompressed system, excluding the measure row).
    """
    snapshots = np.atleast_2d(np.asarray(snapshots, dtype=float))
    if snapshots.shape[1] != system.modes.shape[0]:
        raise ValueError(
            f"snapshot length {snapshots.shape[1]} does not match node count "
            f"{system.modes.shape[0]}"
        )
    projections = snapshots @ system.modes
    return float(np.abs(projections).sum(axis=1).max())


def apriori_bound(inputs: BoundInputs) -> ErrorReport:
    """Evaluate the three bound addends and their total.

    svd term: (norm(w) + norm(w_sparse)) * sqrt(tail energy);
    residual term: residual_tol * projection_sum;
    coverage term: 2 * measure * lipschitz * fill distance.
    """
    svd_term = (inputs.weight_norm + inputs.sparse_weight_norm) * float(
        np.sqrt(inputs.tail_energy)
    )
    residual_term = inputs.residual_tol * inputs.projection_sum
    coverage_term = 2.0 * inputs.measure * inputs.lipschitz * inputs.fill_dist
    return ErrorReport(
        svd_term=svd_term,
        residual_term=residual_term,
        coverage_term=coverage_term,
        bound_total=svd_term + residual_term + coverage_term,
    )


def empirical_error_table(
    rule: SparseRule,
    family: FunctionFamily,
    full: FullRule,
    test: TrainingSet,
) -> NDArray[np.float64]:
    """Per-sample integration errors of the sparse rule against the full rule.

    Returns an (n_samples, param_dim + n_members) array: the parameter
    coordinates followed by |full - sparse| for each family member.
    """
    if test.param_dim != family.param_dim:
        raise ValueError(
            f"dimension mismatch: family expects {family.param_dim}, test has {test.param_dim}"
        )
    if rule.indices.size and (rule.indices.min() < 0 or rule.indices.max() >= full.size):
        raise ValueError("rule indices out of range for the full rule")
    table = np.empty((test.size, test.param_dim + family.n_members))
    table[:, : test.param_dim] = test.params
    for m in range(test.size):
        mu = test.params[m]
        for k in range(family.n_members):
            values = np.asarray(family.evaluate(k, full.nodes, mu), dtype=float).reshape(-1)
            if not np.all(np.isfinite(values)):
                raise ValueError(f"non-finite integrand at member {k}, sample {m}")
            full_value = values @ full.weights
            sparse_value = values[rule.indices] @ rule.weights
            table[m, test.param_dim + k] = abs(full_value - sparse_value)
    return table


def empirical_error(
    rule: SparseRule,
    family: FunctionFamily,
    full: FullRule,
    test: TrainingSet,
) -> float:
    """Worst integration error over the test samples and family members."""
    table = empirical_error_table(rule, family, full, test)
    return float(table[:, test.param_dim :].max())


def estimate_lipschitz(
    family: FunctionFamily, full: FullRule, train: TrainingSet
) -> float:
    """Finite-difference Lipschitz estimate over all training pairs.

    Maximum over members and sample pairs of the sup-norm difference of
    the node evaluations divided by the parameter distance. A lower bound
    on the true constant; reports should label it as estimated.
    """
    n = train.size
    best = 0.0
    for k in range(family.n_members):
        values = np.empty((n, full.size))
        for m in range(n):
            values[m] = np.asarray(family.evaluate(k, full.nodes, train.params[m]), float)
        for i in range(n):
            diff = np.abs(values[i + 1 :] - values[i]).max(axis=1)
            dist = np.linalg.norm(train.params[i + 1 :] - train.params[i], axis=1)
            ok = dist > 0
            if ok.any():
                best = max(best, float((diff[ok] / dist[ok]).max()))
    return best
