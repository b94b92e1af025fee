"""Comparison harness: tolerance sweeps of the two solvers on a family.

Builds a dataset for the configured family, sweeps the target accuracy
list, splits each target into residual and compression budgets, solves
with either or both methods, measures the worst test-grid error, and
emits a CSV report with a JSON provenance sidecar plus one rule file per
(accuracy, method) pair.
"""
from __future__ import annotations

import hashlib
import json
import os
import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import matrixio
from .compression import compress, constraint_svd
from .dataset import ConstraintSystem, FullRule, TrainingSet, assemble_system
from .diagnostics import empirical_error
from .families import monomial_family, schrodinger_family, trapezoid_rule
from .focuss import FocussConfig, SparseRule
from .focuss import solve as focuss_solve
from .lp import solve_l1

__all__ = [
    "ExperimentConfig",
    "ComparisonRow",
    "tensor_grid",
    "build_schrodinger_dataset",
    "build_monomial_dataset",
    "run_comparison",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a comparison run.

    The accuracy split follows the bound-budget rule: the residual level
    is ``eps1_factor`` times the target, and the compression tolerance is
    chosen so the discarded-energy bound term stays below
    ``eps2_factor`` times the target (using the domain measure as a proxy
    for the sparse-weight norm). The time grid for the propagator family
    starts at t_max / train_grid because the kernel is singular at t = 0.
    """

    family_id: str = "schrodinger"
    train_grid: int = 40
    eps_list: tuple[float, ...] = (1e-2, 1e-4, 1e-6, 1e-8)
    eps1_factor: float = 0.25
    eps2_factor: float = 0.25
    y_max: float = 4.0
    n_full: int = 1200
    test_grid: int = 50
    method: str = "both"
    output_dir: str = "reports"
    seed: int = 0
    exponent: float = 0.75
    max_iters: int = 300
    conv_tol: float = 1e-9
    timing: bool = False
    x_range: tuple[float, float] = (0.2, 2.0)
    t_max: float = 4.0
    degrees: tuple[int, ...] = (0, 1, 2)

    def __post_init__(self) -> None:
        if self.family_id not in ("schrodinger", "monomials"):
            raise ValueError(f"unknown family_id {self.family_id!r}")
        if self.train_grid < 2:
            raise ValueError(f"train_grid must be >= 2, got {self.train_grid}")
        if not self.eps_list or any(e <= 0 for e in self.eps_list):
            raise ValueError("eps_list must be non-empty and positive")
        if self.n_full < 2:
            raise ValueError(f"n_full must be >= 2, got {self.n_full}")
        if self.test_grid < 2:
            raise ValueError(f"test_grid must be >= 2, got {self.test_grid}")
        if self.method not in ("focuss", "lp", "both"):
            raise ValueError(f"method must be focuss, lp or both, got {self.method!r}")
        if not (0 < self.eps1_factor <= 1 and 0 < self.eps2_factor <= 1):
            raise ValueError("eps1_factor and eps2_factor must lie in (0, 1]")

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ExperimentConfig":
        raw = matrixio.read_json(path)
        for key in ("eps_list", "x_range", "degrees"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass
class ComparisonRow:
    """One sweep row; method columns are None when the method did not run."""

    eps: float
    k_focuss: int | None = None
    k_lp: int | None = None
    e_focuss: float | None = None
    e_lp: float | None = None
    t_focuss_ms: float | None = None
    t_lp_ms: float | None = None
    details: dict = field(default_factory=dict)

    def csv_cells(self) -> list[str]:
        def fmt(value):
            return "" if value is None else f"{value:.17g}"

        return [
            f"{self.eps:.17g}",
            "" if self.k_focuss is None else str(self.k_focuss),
            "" if self.k_lp is None else str(self.k_lp),
            fmt(self.e_focuss),
            fmt(self.e_lp),
            fmt(self.t_focuss_ms),
            fmt(self.t_lp_ms),
        ]


CSV_HEADER = "eps,k_focuss,k_lp,e_focuss,e_lp,t_focuss_ms,t_lp_ms"


def tensor_grid(axes: list[np.ndarray]) -> np.ndarray:
    """Tensorized sample matrix; first axis varies slowest."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _parameter_axes(config: ExperimentConfig, per_dim: int) -> list[np.ndarray]:
    x_lo, x_hi = config.x_range
    t_lo = config.t_max / config.train_grid
    return [
        np.linspace(x_lo, x_hi, per_dim),
        np.linspace(t_lo, config.t_max, per_dim),
    ]


def build_schrodinger_dataset(
    config: ExperimentConfig,
) -> tuple[ConstraintSystem, TrainingSet, FullRule]:
    """Trapezoid rule plus a tensorized training grid for the propagator."""
    family = schrodinger_family(config.y_max)
    rule = trapezoid_rule(config.n_full, 0.0, config.y_max)
    train = TrainingSet(tensor_grid(_parameter_axes(config, config.train_grid)))
    return assemble_system(family, rule, train), train, rule


def build_monomial_dataset(
    config: ExperimentConfig,
) -> tuple[ConstraintSystem, TrainingSet, FullRule]:
    family = monomial_family(config.degrees)
    rule = trapezoid_rule(config.n_full, 0.0, 1.0)
    train = TrainingSet(np.zeros((1, 1)))
    return assemble_system(family, rule, train), train, rule


def _build(config: ExperimentConfig):
    if config.family_id == "schrodinger":
        system, train, rule = build_schrodinger_dataset(config)
        family = schrodinger_family(config.y_max)
        test = TrainingSet(tensor_grid(_parameter_axes(config, config.test_grid)))
    else:
        system, train, rule = build_monomial_dataset(config)
        family = monomial_family(config.degrees)
        test = train
    return system, train, rule, family, test


def split_tolerances(
    config: ExperimentConfig, eps: float, weight_norm: float, measure: float, fro2: float
) -> tuple[float, float]:
    """Budget the target accuracy into residual and compression tolerances."""
    residual_tol = config.eps1_factor * eps
    tail_allow = (config.eps2_factor * eps / (weight_norm + measure)) ** 2
    energy_tol = min(tail_allow / fro2, 0.5)
    return residual_tol, energy_tol


def _median_ms(samples: list[float]) -> float:
    return 1000.0 * statistics.median(samples)


def run_comparison(config: ExperimentConfig) -> list[ComparisonRow]:
    """Sweep the accuracy list and write report.csv plus provenance JSON.

    Solves run once per (accuracy, method) for the reported rule and
    error; wall time is the median of 3 repeat solves. With
    ``timing=True`` each timed repeat includes a fresh compression (no
    SVD reuse across methods), mirroring an end-to-end "time to compute
    the rule" measurement; otherwise the factorization is shared across
    the sweep and only the solve stage is timed.
    """
    system, train, rule, family, test = _build(config)
    svd = constraint_svd(system)
    fro2 = float(np.sum(svd[1] ** 2))
    weight_norm = float(np.linalg.norm(rule.weights))
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    rows: list[ComparisonRow] = []
    run_focuss = config.method in ("focuss", "both")
    run_lp = config.method in ("lp", "both")
    for i, eps in enumerate(config.eps_list):
        residual_tol, energy_tol = split_tolerances(
            config, eps, weight_norm, family.domain_measure, fro2
        )
        compressed = compress(system, energy_tol, svd=svd)
        row = ComparisonRow(eps=eps)
        row.details = {
            "eps1": residual_tol,
            "eps2": energy_tol,
            "rank": compressed.rank,
            "tail_energy": compressed.tail_energy,
        }

        def timed(solve_once, repeats: int = 3):
            result = solve_once()
            samples = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                if config.timing:
                    fresh = compress(system, energy_tol)
                    solve_once(fresh)
                else:
                    solve_once()
                samples.append(time.perf_counter() - t0)
            return result, _median_ms(samples)

        if run_focuss:
            focuss_config = FocussConfig(
                residual_tol=residual_tol,
                exponent=config.exponent,
                max_iters=config.max_iters,
                conv_tol=config.conv_tol,
            )

            def do_focuss(compressed_system=compressed) -> SparseRule:
                return focuss_solve(compressed_system, rule, focuss_config)

            try:
                sparse, row.t_focuss_ms = timed(do_focuss)
            except Exception as exc:
                raise RuntimeError(f"focuss failed at eps={eps:g}") from exc
            row.k_focuss = sparse.size
            row.e_focuss = empirical_error(sparse, family, rule, test)
            matrixio.write_rule(os.path.join(out_dir, f"rule_focuss_{i}.csv"), sparse)
            matrixio.write_json(
                os.path.join(out_dir, f"diagnostics_focuss_{i}.json"),
                {"eps": eps, **row.details, **sparse.diagnostics()},
            )
        if run_lp:

            def do_lp(compressed_system=compressed) -> SparseRule:
                return solve_l1(compressed_system, rule, residual_tol)

            try:
                sparse, row.t_lp_ms = timed(do_lp)
            except Exception as exc:
                raise RuntimeError(f"lp failed at eps={eps:g}") from exc
            row.k_lp = sparse.size
            row.e_lp = empirical_error(sparse, family, rule, test)
            matrixio.write_rule(os.path.join(out_dir, f"rule_lp_{i}.csv"), sparse)
            matrixio.write_json(
                os.path.join(out_dir, f"diagnostics_lp_{i}.json"),
                {"eps": eps, **row.details, **sparse.diagnostics()},
            )
        rows.append(row)

    with open(os.path.join(out_dir, "report.csv"), "w", encoding="ascii") as handle:
        handle.write(CSV_HEADER + "\n")
        for row in rows:
            handle.write(",".join(row.csv_cells()) + "\n")
    import sklearn

    matrixio.write_json(
        os.path.join(out_dir, "report_meta.json"),
        {
            "config": config.to_dict(),
            "config_hash": config.config_hash(),
            "rows": [row.details for row in rows],
            "versions": {"numpy": np.__version__, "sklearn": sklearn.__version__},
        },
    )
    return rows
