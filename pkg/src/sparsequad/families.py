"""Built-in integrand families and reference rules used by the CLI harness."""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from .dataset import FullRule, FunctionFamily

__all__ = [
    "trapezoid_rule",
    "schrodinger_integrand",
    "schrodinger_family",
    "monomial_family",
]


def trapezoid_rule(n_nodes: int, lower: float = 0.0, upper: float = 1.0) -> FullRule:
    """Composite trapezoid rule on [lower, upper] with equally spaced nodes."""
    if n_nodes < 2:
        raise ValueError(f"trapezoid rule needs at least 2 nodes, got {n_nodes}")
    if not upper > lower:
        raise ValueError(f"empty interval [{lower}, {upper}]")
    nodes = np.linspace(lower, upper, n_nodes)
    spacing = (upper - lower) / (n_nodes - 1)
    weights = np.full(n_nodes, spacing)
    weights[0] = weights[-1] = spacing / 2.0
    return FullRule(nodes=nodes, weights=weights)


def schrodinger_integrand(y: NDArray[np.float64], mu) -> NDArray[np.float64]:
    """Real part of the free-propagator kernel against a Gaussian profile.

    ``mu = (x, t)`` with t > 0; the imaginary part is antisymmetric in y and
    drops out of the half-line integral, so only the symmetric combination

        (cos(-x y / 2t) cos(y^2 / 4t) - sin(-x y / 2t) sin(y^2 / 4t)) exp(-y^2 / 2)

    is evaluated. Vectorized over y.
    """
    x, t = float(mu[0]), float(mu[1])
    if not t > 0:
        raise ValueError(f"time parameter must be positive, got t={t}")
    y = np.asarray(y, dtype=float)
    half_phase = y * y / (4.0 * t)
    drift = -x * y / (2.0 * t)
    return (np.cos(drift) * np.cos(half_phase) - np.sin(drift) * np.sin(half_phase)) * np.exp(
        -0.5 * y * y
    )


def schrodinger_family(y_max: float = 4.0) -> FunctionFamily:
    """Single-member family for the half-line propagator integral.

    The integration domain is [0, y_max]; the Gaussian factor makes the
    truncation error at y_max negligible for y_max around 4.
    """

    def evaluate(k: int, points: NDArray[np.float64], mu) -> NDArray[np.float64]:
        if k != 0:
            raise IndexError(f"family has a single member, got index {k}")
        return schrodinger_integrand(points, mu)

    return FunctionFamily(
        n_members=1,
        param_dim=2,
        evaluate=evaluate,
        domain_measure=float(y_max),
        name="schrodinger",
    )


def monomial_family(degrees: tuple[int, ...] = (0, 1, 2), upper: float = 1.0) -> FunctionFamily:
    """Parameter-independent monomials x**d on [0, upper].

    Useful as a small exactly-solvable test family; the parameter argument
    is ignored by the members, so a single dummy training sample suffices.
    """
    if len(degrees) < 1:
        raise ValueError("need at least one degree")
    if any(d < 0 for d in degrees):
        raise ValueError(f"degrees must be non-negative, got {degrees}")

    def evaluate(k: int, points: NDArray[np.float64], mu) -> NDArray[np.float64]:
        return np.asarray(points, dtype=float) ** degrees[k]

    return FunctionFamily(
        n_members=len(degrees),
        param_dim=1,
        evaluate=evaluate,
        domain_measure=float(upper),
        name="monomials",
    )
