"""Command-line driver.

Subcommands:
  generate  build a dataset (constraint matrix, right-hand side, rule) as CSV
  solve     train a sparse rule from CSV inputs
  compare   run a tolerance sweep from a JSON config and emit reports
  bound     evaluate the a-priori error bound from scalar inputs

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits with code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="sparsequad", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", help="build a dataset and write it as CSV")
    gen.add_argument("--family", choices=("schrodinger", "monomials"), default="schrodinger")
    gen.add_argument("--train-grid", type=int, default=40, help="grid points per parameter axis")
    gen.add_argument("--n-full", type=int, default=1200, help="full-rule node count")
    gen.add_argument("--y-max", type=float, default=4.0, help="integration interval extent")
    gen.add_argument("--out", required=True, help="output directory")

    solve = sub.add_parser("solve", help="train a sparse rule from CSV inputs")
    solve.add_argument(
        "--input",
        required=True,
        metavar="A.csv,b.csv",
        help="comma-separated constraint matrix and right-hand side paths",
    )
    solve.add_argument("--rule", help="full-rule CSV (nodes and starting weights)")
    solve.add_argument("--eps1", type=float, required=True, help="residual level")
    solve.add_argument("--eps2", type=float, default=0.0, help="SVD energy tolerance")
    solve.add_argument("--q", type=float, default=0.75, help="reweighting exponent")
    solve.add_argument("--max-iters", type=int, default=300)
    solve.add_argument("--conv-tol", type=float, default=1e-9)
    solve.add_argument("--method", choices=("focuss", "lp", "both"), default="focuss")
    solve.add_argument("--save-compressed", action="store_true",
                       help="also dump the compressed system for audits")
    solve.add_argument("--out", required=True, help="output directory")

    comp = sub.add_parser("compare", help="tolerance sweep from a JSON config")
    comp.add_argument("--config", required=True, help="ExperimentConfig JSON path")
    comp.add_argument("--out", help="override the config's output directory")
    comp.add_argument("--full", action="store_true", help="use the full 200x200 test grid")
    comp.add_argument("--timing", action="store_true",
                      help="timed repeats include a fresh compression each")

    bound = sub.add_parser("bound", help="evaluate the a-priori error bound")
    bound.add_argument("--w-norm", type=float, required=True)
    bound.add_argument("--what-norm", type=float, required=True)
    bound.add_argument("--tail-energy", type=float, required=True)
    bound.add_argument("--eps1", type=float, required=True)
    bound.add_argument("--sf", type=float, required=True)
    bound.add_argument("--lf", type=float, required=True)
    bound.add_argument("--measure", type=float, required=True)
    bound.add_argument("--delta", type=float, required=True)
    bound.add_argument("--json", help="also write the report to this path")
    return parser


def _cmd_generate(args) -> int:
    import numpy as np

    from . import matrixio
    from .experiment import ExperimentConfig, build_monomial_dataset, build_schrodinger_dataset

    config = ExperimentConfig(
        family_id=args.family,
        train_grid=args.train_grid,
        n_full=args.n_full,
        y_max=args.y_max,
        output_dir=args.out,
    )
    if args.family == "schrodinger":
        system, train, rule = build_schrodinger_dataset(config)
    else:
        system, train, rule = build_monomial_dataset(config)
    os.makedirs(args.out, exist_ok=True)
    matrixio.write_matrix(os.path.join(args.out, "A.csv"), system.matrix)
    matrixio.write_vector(os.path.join(args.out, "b.csv"), system.rhs)
    matrixio.write_full_rule(os.path.join(args.out, "rule.csv"), rule)
    matrixio.write_matrix(os.path.join(args.out, "train_params.csv"), train.params)
    matrixio.write_json(
        os.path.join(args.out, "meta.json"),
        {
            "family": args.family,
            "rows": system.n_rows,
            "nodes": system.n_nodes,
            "measure_row_index": system.measure_row_index,
            "domain_measure": float(np.sum(rule.weights)),
        },
    )
    print(f"wrote dataset ({system.n_rows} rows, {system.n_nodes} nodes) to {args.out}")
    return 0


def _load_system(args):
    import numpy as np

    from . import matrixio
    from .dataset import ConstraintSystem, FullRule

    try:
        matrix_path, rhs_path = args.input.split(",")
    except ValueError:
        raise ValueError("--input expects two comma-separated paths: A.csv,b.csv")
    matrix = matrixio.read_matrix(matrix_path)
    rhs = matrixio.read_vector(rhs_path)
    if args.rule:
        _, nodes, weights = matrixio.read_rule(args.rule)
        rule = FullRule(nodes=nodes, weights=weights)
        if rule.size != matrix.shape[1]:
            raise ValueError(
                f"rule has {rule.size} nodes but the matrix has {matrix.shape[1]} columns"
            )
    else:
        # No rule file: uniform starting weights scaled by the measure row
        # when one is present, and node coordinates equal to column index.
        measure = None
        last = matrix.shape[0] - 1
        if np.all(matrix[last] == 1.0):
            measure = float(rhs[last])
        total = measure if measure is not None else float(matrix.shape[1])
        weights = np.full(matrix.shape[1], total / matrix.shape[1])
        rule = FullRule(nodes=np.arange(matrix.shape[1], dtype=float), weights=weights)
    measure_row = None
    last = matrix.shape[0] - 1
    if np.all(matrix[last] == 1.0):
        measure_row = last
    system = ConstraintSystem(
        matrix=matrix, rhs=rhs, measure_row_index=measure_row, full_weights=rule.weights
    )
    return system, rule


def _cmd_solve(args) -> int:
    from . import matrixio
    from .compression import compress
    from .focuss import FocussConfig
    from .focuss import solve as focuss_solve
    from .lp import solve_l1

    system, rule = _load_system(args)
    compressed = compress(system, args.eps2)
    os.makedirs(args.out, exist_ok=True)
    if args.save_compressed:
        matrixio.save_compressed(args.out, compressed)
    methods = ("focuss", "lp") if args.method == "both" else (args.method,)
    for method in methods:
        if method == "focuss":
            config = FocussConfig(
                residual_tol=args.eps1,
                exponent=args.q,
                max_iters=args.max_iters,
                conv_tol=args.conv_tol,
            )
            sparse = focuss_solve(compressed, rule, config)
        else:
            sparse = solve_l1(compressed, rule, args.eps1)
        rule_path = os.path.join(args.out, f"rule_{method}.csv")
        matrixio.write_rule(rule_path, sparse)
        matrixio.write_json(
            os.path.join(args.out, f"diagnostics_{method}.json"),
            {"eps1": args.eps1, "eps2": args.eps2, "rank": compressed.rank,
             **sparse.diagnostics()},
        )
        print(
            f"{method}: {sparse.size} nodes, residual {sparse.residual_norm:.3e} "
            f"-> {rule_path}"
        )
    return 0


def _cmd_compare(args) -> int:
    from dataclasses import replace

    from .experiment import ExperimentConfig, run_comparison

    config = ExperimentConfig.from_json(args.config)
    if args.out:
        config = replace(config, output_dir=args.out)
    if args.full:
        config = replace(config, test_grid=200)
    if args.timing:
        config = replace(config, timing=True)
    rows = run_comparison(config)
    print(f"wrote {len(rows)} rows to {os.path.join(config.output_dir, 'report.csv')}")
    return 0


def _cmd_bound(args) -> int:
    from . import matrixio
    from .diagnostics import BoundInputs, apriori_bound

    report = apriori_bound(
        BoundInputs(
            weight_norm=args.w_norm,
            sparse_weight_norm=args.what_norm,
            tail_energy=args.tail_energy,
            residual_tol=args.eps1,
            projection_sum=args.sf,
            lipschitz=args.lf,
            measure=args.measure,
            fill_dist=args.delta,
        )
    )
    payload = report.to_dict()
    for key, value in payload.items():
        print(f"{key} = {value:.17g}")
    if args.json:
        matrixio.write_json(args.json, payload)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "compare": _cmd_compare,
    "bound": _cmd_bound,
}


def main(argv=None) -> int:
    from ._threads import apply_thread_cap

    apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # numerical failures from the solver stack
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
