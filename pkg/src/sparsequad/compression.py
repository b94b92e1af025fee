"""Truncated-SVD compression of the training constraints.

Large training sets produce heavily redundant constraint rows. A singular
value decomposition of the transposed constraint matrix exposes the
snapshot modes; keeping the leading ones up to an energy tolerance yields
an equivalent, well-conditioned system with one row per retained mode.
The discarded energy (sum of squared dropped singular values) is reported
so the error-bound diagnostics can account for the compression.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dataset import ConstraintSystem

__all__ = ["CompressedSystem", "select_rank", "compress", "constraint_svd"]

#: Singular values below this fraction of the largest are treated as zero
#: when counting rank (numerical rank guard).
RANK_GUARD = 1e-14


@dataclass(frozen=True)
class CompressedSystem:
    """Rank-reduced constraint system ``matrix @ y = rhs``.

    ``matrix`` holds the retained singular values times the transposed
    node-space modes, so feasible points of the original system remain
    feasible here. ``modes`` are the orthonormal node-space directions
    (one column per retained mode); ``tail_energy`` is the squared
    Frobenius mass of everything discarded.
    """

    matrix: NDArray[np.float64]
    rhs: NDArray[np.float64]
    kept_singulars: NDArray[np.float64]
    tail_energy: float
    rank: int
    modes: NDArray[np.float64]
    full_weights: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        if self.matrix.shape != (self.rank, self.modes.shape[0]):
            raise ValueError("matrix shape inconsistent with rank and modes")
        if self.rhs.shape != (self.rank,):
            raise ValueError("rhs length inconsistent with rank")
        if self.kept_singulars.shape != (self.rank,):
            raise ValueError("kept_singulars length inconsistent with rank")
        s = self.kept_singulars
        if s.size and (np.any(np.diff(s) > 0) or s[-1] <= 0):
            raise ValueError("kept singular values must be positive and descending")
        if self.tail_energy < 0:
            raise ValueError("tail_energy must be non-negative")

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[1]


def select_rank(singulars: NDArray[np.float64], energy_tol: float) -> int:
    """Smallest rank whose retained energy fraction reaches 1 - energy_tol.

    ``singulars`` must be non-negative and descending. Values below
    ``RANK_GUARD`` times the largest are treated as zero, so
    ``energy_tol = 0`` returns the numerical rank, never the raw length.
    """
    s = np.asarray(singulars, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("singulars must be a non-empty 1-D array")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("singular values must be finite and non-negative")
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be in descending order")
    if not 0 <= energy_tol < 1:
        raise ValueError(f"energy tolerance must lie in [0, 1), got {energy_tol}")
    guarded = np.where(s < RANK_GUARD * s[0], 0.0, s)
    energy = np.cumsum(guarded * guarded)
    if energy[-1] == 0.0:
        raise ValueError("all singular values are zero (degenerate dataset)")
    fraction = energy / energy[-1]
    return int(np.argmax(fraction >= 1.0 - energy_tol)) + 1


def constraint_svd(
    system: ConstraintSystem,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Thin SVD of the transposed constraint matrix.

    Returns (modes, singulars, row_mixers) with the transposed constraint
    matrix equal to ``modes @ diag(singulars) @ row_mixers``. Computing
    this once and passing it to :func:`compress` lets a tolerance sweep
    reuse the factorization.
    """
    matrix = system.matrix
    if not np.all(np.isfinite(matrix)) or not np.all(np.isfinite(system.rhs)):
        raise ValueError("constraint system contains non-finite entries")
    return np.linalg.svd(matrix.T, full_matrices=False)


def compress(
    system: ConstraintSystem,
    energy_tol: float,
    svd: tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]] | None = None,
) -> CompressedSystem:
    """Project the constraints onto their leading singular modes.

    The retained rank is chosen by :func:`select_rank`; with
    ``energy_tol = 0`` the projection keeps the full numerical rank, which
    still conditions the system for the solver. A precomputed
    :func:`constraint_svd` result may be supplied to avoid refactorizing.
    """
    if svd is None:
        svd = constraint_svd(system)
    modes_all, singulars, row_mixers = svd
    rank = select_rank(singulars, energy_tol)
    matrix = singulars[:rank, None] * modes_all[:, :rank].T
    rhs = row_mixers[:rank] @ system.rhs
    tail = float(np.sum(singulars[rank:] ** 2))
    return CompressedSystem(
        matrix=matrix,
        rhs=rhs,
        kept_singulars=singulars[:rank].copy(),
        tail_energy=tail,
        rank=rank,
        modes=modes_all[:, :rank].copy(),
        full_weights=None if system.full_weights is None else system.full_weights.copy(),
    )
