"""Training-data assembly for sparse quadrature recovery.

A quadrature rule is trained against a family of integrands evaluated over
a set of parameter samples. Each (member, parameter) pair contributes one
linear constraint on the weight vector; one extra row enforces exact
integration of the constant function (the domain-measure constraint). The
resulting dense linear system is the input of the compression and solver
stages.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "FunctionFamily",
    "FullRule",
    "TrainingSet",
    "ConstraintSystem",
    "assemble_system",
    "full_integrals",
]

#: Relative tolerance for the consistency check between the full rule's
#: weight sum and the family's declared domain measure.
MEASURE_RTOL = 1e-12


@dataclass(frozen=True)
class FunctionFamily:
    """A parametrized family of integrands.

    Parameters
    ----------
    n_members : int
        Number of family members.
    param_dim : int
        Dimension of the parameter vector.
    evaluate : callable
        ``evaluate(k, points, params)`` returns the values of member ``k``
        (0-based) at every point, for one parameter vector. Must be a pure
        function: repeated calls with identical arguments return
        bit-identical values.
    domain_measure : float
        Measure of the integration domain (the exact integral of the
        constant function 1).
    name : str
        Identifier used in reports.
    """

    n_members: int
    param_dim: int
    evaluate: Callable[[int, NDArray[np.float64], NDArray[np.float64]], NDArray[np.float64]]
    domain_measure: float
    name: str = "family"

    def __post_init__(self) -> None:
        if self.n_members < 1:
            raise ValueError(f"family needs at least one member, got {self.n_members}")
        if self.param_dim < 1:
            raise ValueError(f"param_dim must be >= 1, got {self.param_dim}")
        if not (self.domain_measure > 0 and np.isfinite(self.domain_measure)):
            raise ValueError(f"domain_measure must be positive, got {self.domain_measure}")


@dataclass(frozen=True)
class FullRule:
    """Reference quadrature rule: nodes and non-negative weights."""

    nodes: NDArray[np.float64]
    weights: NDArray[np.float64]

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 1 or weights.size < 1:
            raise ValueError("weights must be a non-empty 1-D array")
        if nodes.shape[0] != weights.shape[0]:
            raise ValueError(
                f"node/weight count mismatch: {nodes.shape[0]} vs {weights.shape[0]}"
            )
        if not np.all(np.isfinite(nodes)) or not np.all(np.isfinite(weights)):
            raise ValueError("rule contains non-finite entries")
        if np.any(weights < 0):
            i = int(np.argmin(weights))
            raise ValueError(f"negative quadrature weight {weights[i]} at node {i}")

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def measure(self) -> float:
        """Sum of the weights (the measure the rule integrates exactly)."""
        return float(self.weights.sum())

    @property
    def coords(self) -> NDArray[np.float64]:
        """Nodes as a 2-D (size, dim) array, for serialization."""
        nodes = self.nodes
        return nodes.reshape(-1, 1) if nodes.ndim == 1 else nodes


@dataclass(frozen=True)
class TrainingSet:
    """Parameter samples used to train (or probe) a rule.

    ``params`` is normalized to a 2-D (n_samples, param_dim) array. An
    optional ``box`` of shape (param_dim, 2) declares the parameter domain;
    when present every sample must lie inside it.
    """

    params: NDArray[np.float64]
    box: NDArray[np.float64] | None = field(default=None)

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=float)
        if params.ndim == 1:
            params = params.reshape(-1, 1)
        if params.ndim != 2 or params.shape[0] < 1:
            raise ValueError("params must be a non-empty (n_samples, param_dim) array")
        if not np.all(np.isfinite(params)):
            raise ValueError("params contain non-finite values")
        object.__setattr__(self, "params", params)
        if self.box is not None:
            box = np.asarray(self.box, dtype=float)
            if box.shape != (params.shape[1], 2):
                raise ValueError(f"box must have shape ({params.shape[1]}, 2)")
            if np.any(params < box[:, 0]) or np.any(params > box[:, 1]):
                raise ValueError("a parameter sample lies outside the declared box")
            object.__setattr__(self, "box", box)

    @property
    def size(self) -> int:
        return self.params.shape[0]

    @property
    def param_dim(self) -> int:
        return self.params.shape[1]


@dataclass(frozen=True)
class ConstraintSystem:
    """Dense constraint system ``matrix @ weights = rhs``.

    Rows are ordered member-major (member index outer, training sample
    inner) with the all-ones measure row last; this ordering is part of
    the on-disk format. ``full_weights`` keeps the generating rule's
    weights, which are feasible by construction; it is None for systems
    imported from files that do not carry them.
    """

    matrix: NDArray[np.float64]
    rhs: NDArray[np.float64]
    measure_row_index: int | None = None
    full_weights: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        matrix = np.asarray(self.matrix, dtype=float)
        rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rhs", rhs)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if rhs.shape[0] != matrix.shape[0]:
            raise ValueError(
                f"rhs length {rhs.shape[0]} does not match row count {matrix.shape[0]}"
            )
        idx = self.measure_row_index
        if idx is not None:
            if not 0 <= idx < matrix.shape[0]:
                raise ValueError(f"measure_row_index {idx} out of range")
            if not np.all(matrix[idx] == 1.0):
                raise ValueError("measure row must be all ones")
        if self.full_weights is not None:
            w = np.asarray(self.full_weights, dtype=float)
            if w.shape != (matrix.shape[1],):
                raise ValueError("full_weights length does not match column count")
            object.__setattr__(self, "full_weights", w)

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[1]


def _evaluate_row(
    family: FunctionFamily,
    rule: FullRule,
    member: int,
    sample: int,
    mu: NDArray[np.float64],
) -> NDArray[np.float64]:
    values = np.asarray(family.evaluate(member, rule.nodes, mu), dtype=float).reshape(-1)
    if values.shape[0] != rule.size:
        raise ValueError(
            f"evaluator returned {values.shape[0]} values for {rule.size} nodes "
            f"(member {member}, sample {sample})"
        )
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(
            f"non-finite integrand value at member {member}, sample {sample}, "
            f"node {int(bad[0])}"
        )
    return values


def _check_compatible(family: FunctionFamily, rule: FullRule, train: TrainingSet) -> None:
    if train.param_dim != family.param_dim:
        raise ValueError(
            f"parameter dimension mismatch: family expects {family.param_dim}, "
            f"training set has {train.param_dim}"
        )
    gap = abs(rule.measure - family.domain_measure)
    if gap > MEASURE_RTOL * abs(family.domain_measure):
        raise ValueError(
            f"rule weights sum to {rule.measure}, expected domain measure "
            f"{family.domain_measure} (relative gap {gap / abs(family.domain_measure):.3e})"
        )


def full_integrals(
    family: FunctionFamily, rule: FullRule, params: TrainingSet
) -> NDArray[np.float64]:
    """Integrals of every family member at every parameter, by the full rule.

    Returns an (n_members, n_samples) matrix whose (k, m) entry is the
    weighted sum of member k over the rule's nodes at parameter m.
    """
    _check_compatible(family, rule, params)
    out = np.empty((family.n_members, params.size))
    for k in range(family.n_members):
        for m in range(params.size):
            values = _evaluate_row(family, rule, k, m, params.params[m])
            out[k, m] = values @ rule.weights
    return out


def assemble_system(
    family: FunctionFamily, rule: FullRule, train: TrainingSet
) -> ConstraintSystem:
    """Assemble the dense training constraints for a quadrature rule.

    One row per (member, sample) pair holds the member's node values; its
    right-hand side is the full-rule integral. The final row is all ones
    with right-hand side equal to the domain measure. Evaluation order is
    member-major and, the evaluator being pure, the result is independent
    of how evaluations would be scheduled.
    """
    _check_compatible(family, rule, train)
    n_rows = family.n_members * train.size + 1
    matrix = np.empty((n_rows, rule.size))
    rhs = np.empty(n_rows)
    r = 0
    for k in range(family.n_members):
        for m in range(train.size):
            values = _evaluate_row(family, rule, k, m, train.params[m])
            matrix[r] = values
            rhs[r] = values @ rule.weights
            r += 1
    matrix[r] = 1.0
    rhs[r] = family.domain_measure
    return ConstraintSystem(
        matrix=matrix,
        rhs=rhs,
        measure_row_index=r,
        full_weights=rule.weights.copy(),
    )
