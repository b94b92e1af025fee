import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sparsequad.focuss as focuss
from sparsequad.compression import CompressedSystem, compress
from sparsequad.dataset import ConstraintSystem, FullRule
from sparsequad.families import monomial_family, trapezoid_rule
from sparsequad.focuss import (
    FocussConfig,
    SolverError,
    calibrate_lambda,
    enforce_nonnegativity,
    extract_rule,
    factor_step,
    iterate,
    regularized_step,
    residual_norm_for_lambda,
    solve,
)

from _oracles import best_support_nnls, calibrate_by_grid, residual_closed_form


def random_instance(rng, n_rows=None, n_nodes=None, zero_frac=0.0):
    n_rows = n_rows or int(rng.integers(1, 9))
    n_nodes = n_nodes or int(rng.integers(n_rows, 41))
    matrix = rng.normal(size=(n_rows, n_nodes))
    y = rng.uniform(0.1, 2.0, n_nodes)
    if zero_frac > 0:
        mask = rng.uniform(size=n_nodes) < zero_frac
        y[mask] = 0.0
    rhs = rng.normal(size=n_rows)
    return matrix, rhs, y


def diagonal_factors():
    # B = diag(2, 1), weights 1 -> singular values (2, 1) with axis-aligned vectors
    return factor_step(np.diag([2.0, 1.0]), np.ones(2), 0.75)


# ---------------------------------------------------------------- steps


def test_regularized_step_minimum_norm_solution():
    # oracle: min-norm solution of [1 1] x = 2 via normal equations is (1, 1)
    for q in (0.6, 0.75, 0.9):
        step = regularized_step(np.array([[1.0, 1.0]]), np.array([2.0]), np.ones(2), q, 0.0)
        np.testing.assert_allclose(step, [1.0, 1.0], rtol=1e-12)


def test_regularized_step_locks_zero_entries():
    matrix = np.array([[1.0, 2.0, 3.0], [0.0, 1.0, -1.0]])
    rhs = np.array([1.0, 0.5])
    y = np.array([1.0, 0.0, 2.0])
    step = regularized_step(matrix, rhs, y, 0.75, 1e-3)
    assert step[1] == 0.0


def test_regularized_step_vanishes_for_huge_ridge():
    matrix = np.array([[1.0, 1.0], [1.0, -1.0]])
    rhs = np.array([1.0, 2.0])
    step = regularized_step(matrix, rhs, np.ones(2), 0.75, 1e18)
    assert np.linalg.norm(step) < 1e-15


def test_regularized_step_rejects_negative_ridge():
    with pytest.raises(ValueError):
        regularized_step(np.ones((1, 2)), np.ones(1), np.ones(2), 0.75, -1.0)


def test_factor_step_rejects_negative_iterate():
    with pytest.raises(ValueError):
        factor_step(np.ones((1, 2)), np.array([1.0, -1.0]), 0.75)


# ---------------------------------------------------- residual formula


def test_residual_diagonal_case_hand_value():
    factors = diagonal_factors()
    got = residual_norm_for_lambda(factors, np.array([1.0, 1.0]), 1.0)
    # hand-expanded SVD: sqrt((1/5)^2 + (1/2)^2)
    assert got == pytest.approx(np.sqrt((1 / 5) ** 2 + (1 / 2) ** 2), rel=1e-14)


def test_residual_zero_ridge_in_span():
    factors = diagonal_factors()
    assert residual_norm_for_lambda(factors, np.array([1.0, 1.0]), 0.0) < 1e-14


def test_residual_limit_is_rhs_norm():
    factors = diagonal_factors()
    rhs = np.array([3.0, -4.0])
    got = residual_norm_for_lambda(factors, rhs, 1e20)
    assert got == pytest.approx(5.0, rel=1e-12)


def test_residual_includes_off_span_component():
    # single column: span is one-dimensional, rhs has a leftover part
    matrix = np.array([[1.0], [1.0]])
    factors = factor_step(matrix, np.ones(1), 0.75)
    rhs = np.array([1.0, -1.0])  # orthogonal to the span
    got = residual_norm_for_lambda(factors, rhs, 0.0)
    assert got == pytest.approx(np.sqrt(2.0), rel=1e-12)


def test_residual_formula_matches_direct_computation():
    rng = np.random.default_rng(42)
    for trial in range(60):
        matrix, rhs, y = random_instance(rng, zero_frac=0.2 if trial % 3 else 0.0)
        factors = factor_step(matrix, y, 0.75)
        if factors.rank == 0:
            continue
        ridge = float(10.0 ** rng.uniform(-2, 2)) * float(factors.singulars[0]) ** 2
        fast = residual_norm_for_lambda(factors, rhs, ridge)
        step = regularized_step(matrix, rhs, y, 0.75, ridge)
        direct = float(np.linalg.norm(rhs - matrix @ step))
        assert abs(fast - direct) <= 1e-10 * max(fast, direct, 1e-30)


def test_residual_strictly_increasing_in_ridge():
    rng = np.random.default_rng(5)
    matrix, rhs, y = random_instance(rng, n_rows=5, n_nodes=20)
    factors = factor_step(matrix, y, 0.75)
    scale = float(factors.singulars[0]) ** 2
    ridges = scale * 10.0 ** np.linspace(-6, 6, 25)
    values = [residual_norm_for_lambda(factors, rhs, r) for r in ridges]
    assert np.all(np.diff(values) > 0)


def test_residual_rejects_negative_ridge():
    with pytest.raises(ValueError):
        residual_norm_for_lambda(diagonal_factors(), np.ones(2), -0.5)


# ------------------------------------------------------- calibration


def test_calibrate_zero_target_gives_zero_ridge():
    factors = diagonal_factors()
    cal = calibrate_lambda(factors, np.array([1.0, 1.0]), 0.0)
    assert cal.ridge == 0.0


def test_calibrate_diagonal_case_against_grid_oracle():
    factors = diagonal_factors()
    rhs = np.array([1.0, 1.0])
    # put the rhs in the factor basis to feed the closed-form oracle
    coeffs = factors.left.T @ rhs
    cal = calibrate_lambda(factors, rhs, 0.3)
    assert not cal.saturated
    assert abs(cal.residual - 0.3) <= 1e-10 * max(0.3, np.linalg.norm(rhs))
    oracle = calibrate_by_grid(factors.singulars, coeffs, 0.0, 0.3)
    check = residual_closed_form(factors.singulars, coeffs, 0.0, oracle)
    assert abs(check - 0.3) < 1e-9
    assert cal.ridge == pytest.approx(oracle, rel=1e-6)


def test_calibrate_saturation_reported():
    # rank-deficient span: the off-span residual cannot be reduced
    matrix = np.array([[1.0], [1.0]])
    factors = factor_step(matrix, np.ones(1), 0.75)
    rhs = np.array([1.0, -1.0])
    cal = calibrate_lambda(factors, rhs, 1e-3)
    assert cal.saturated
    assert cal.ridge == 0.0
    assert cal.residual > 1e-3


def test_calibrate_target_above_rhs_norm_warns():
    factors = diagonal_factors()
    rhs = np.array([1.0, 1.0])
    with pytest.warns(UserWarning, match="constraints"):
        cal = calibrate_lambda(factors, rhs, 10.0)
    assert cal.residual <= 10.0


def test_calibrate_rejects_negative_target():
    with pytest.raises(ValueError):
        calibrate_lambda(diagonal_factors(), np.ones(2), -1e-3)


def test_calibrate_hits_target_on_random_instances():
    rng = np.random.default_rng(99)
    for _ in range(40):
        matrix, rhs, y = random_instance(rng)
        factors = factor_step(matrix, y, 0.75)
        rhs = rhs / np.linalg.norm(rhs)
        target = float(10.0 ** rng.uniform(-6, -0.5))
        cal = calibrate_lambda(factors, rhs, target)
        if not cal.saturated:
            assert abs(cal.residual - target) <= 1e-10 * max(target, 1.0)
        else:
            assert cal.ridge == 0.0
            assert cal.residual > target


# ------------------------------------------------------ nonnegativity


def test_enforce_nonnegativity_mixes_to_boundary():
    mixed, alpha = enforce_nonnegativity(np.array([2.0, -1.0]), np.array([1.0, 1.0]))
    assert alpha == pytest.approx(0.5)
    np.testing.assert_allclose(mixed, [1.5, 0.0], atol=1e-15)


def test_enforce_nonnegativity_identity_when_feasible():
    y_new = np.array([0.3, 0.0, 2.0])
    mixed, alpha = enforce_nonnegativity(y_new, np.array([1.0, 1.0, 1.0]))
    assert alpha == 1.0
    np.testing.assert_array_equal(mixed, y_new)


def test_enforce_nonnegativity_stagnates_at_zero_boundary():
    mixed, alpha = enforce_nonnegativity(np.array([-1.0, -1.0]), np.zeros(2))
    assert alpha == 0.0
    np.testing.assert_array_equal(mixed, np.zeros(2))


def test_enforce_nonnegativity_rejects_negative_previous():
    with pytest.raises(ValueError):
        enforce_nonnegativity(np.ones(2), np.array([1.0, -0.1]))


@settings(max_examples=60, deadline=None)
@given(
    data=st.lists(
        st.tuples(st.floats(-5, 5), st.floats(0, 5)), min_size=1, max_size=8
    )
)
def test_enforce_nonnegativity_properties(data):
    y_new = np.array([a for a, _ in data])
    y_prev = np.array([b for _, b in data])
    mixed, alpha = enforce_nonnegativity(y_new, y_prev)
    assert 0.0 <= alpha <= 1.0
    assert mixed.min() >= 0.0
    if (y_new >= 0).all():
        assert alpha == 1.0


# ---------------------------------------------------------- extraction


def test_extract_rule_identity_at_zero_threshold():
    rule = trapezoid_rule(8)
    sparse = extract_rule(rule.weights.copy(), rule, 0.0)
    assert sparse.size == 8
    np.testing.assert_array_equal(sparse.indices, np.arange(8))


def test_extract_rule_threshold_semantics():
    rule = trapezoid_rule(3)
    sparse = extract_rule(np.array([1.0, 1e-16, 0.0]), rule, 1e-12)
    assert sparse.size == 1
    assert sparse.indices[0] == 0


def test_extract_rule_rejects_all_zero():
    rule = trapezoid_rule(3)
    with pytest.raises(SolverError, match="empty rule"):
        extract_rule(np.zeros(3), rule, 1e-12)


def test_extract_rule_residual_matches_direct_recompute():
    rng = np.random.default_rng(3)
    matrix = rng.normal(size=(3, 10))
    weights = rng.uniform(0.1, 1.0, 10)
    system = ConstraintSystem(matrix=matrix, rhs=matrix @ weights, full_weights=weights)
    comp = compress(system, 0.0)
    rule = FullRule(nodes=np.arange(10.0), weights=weights)
    y = weights.copy()
    y[[2, 5]] = 1e-14
    sparse = extract_rule(y, rule, 1e-10, system=comp)
    pruned = np.where(y >= 1e-10 * y.max(), y, 0.0)
    direct = np.linalg.norm(comp.matrix @ pruned - comp.rhs)
    assert sparse.residual_norm == pytest.approx(direct, rel=1e-14)


# ------------------------------------------------------------- solve


def measure_only_system(n_nodes=10):
    matrix = np.ones((1, n_nodes))
    rule = trapezoid_rule(n_nodes)
    system = ConstraintSystem(
        matrix=matrix, rhs=np.array([1.0]), measure_row_index=0, full_weights=rule.weights
    )
    return compress(system, 0.0), rule


def test_solve_measure_row_only_single_node():
    comp, rule = measure_only_system()
    config = FocussConfig(residual_tol=1e-12, conv_tol=1e-13, max_iters=2000)
    sparse = solve(comp, rule, config)
    # subset-enumeration oracle over supports of size <= 1
    res, support, weights = best_support_nnls(np.ones((1, rule.size)), np.array([1.0]), 1)
    assert res <= 1e-12 and len(support) == 1 and weights[0] == pytest.approx(1.0)
    assert sparse.size == 1
    assert sparse.weights[0] == pytest.approx(1.0, abs=1e-10)
    assert sparse.residual_norm <= 1e-12 * (1 + 1e-8) + 1e-13


def monomial_setup(n_nodes=12):
    family = monomial_family((0, 1, 2))
    rule = trapezoid_rule(n_nodes)
    from sparsequad.dataset import TrainingSet
    from sparsequad.dataset import assemble_system

    system = assemble_system(family, rule, TrainingSet(np.zeros((1, 1))))
    return system, rule


@pytest.mark.parametrize("residual_tol", [1e-10, 1e-12])
def test_solve_monomials_support_bound(residual_tol):
    system, rule = monomial_setup()
    comp = compress(system, 0.0)
    config = FocussConfig(residual_tol=residual_tol, conv_tol=1e-13, max_iters=2000)
    sparse = solve(comp, rule, config)
    assert sparse.size <= comp.rank  # rank is 3
    dense = sparse.dense_weights(rule.size)
    moments = system.matrix[:3] @ dense
    np.testing.assert_allclose(moments, system.rhs[:3], atol=1e-10)
    # the support itself admits a non-negative exact solution (oracle)
    res, support, _ = best_support_nnls(system.matrix, system.rhs, 3)
    assert res <= 1e-10


def test_solve_measure_constraint_uncompressed():
    system, rule = monomial_setup()
    comp = compress(system, 0.0)
    config = FocussConfig(residual_tol=1e-10, conv_tol=1e-13, max_iters=2000)
    sparse = solve(comp, rule, config)
    assert abs(sparse.weights.sum() - 1.0) <= 1e-10


def test_solve_vertex_start_is_fixed_point():
    system, rule = monomial_setup()
    comp = compress(system, 0.0)
    config = FocussConfig(residual_tol=1e-12, conv_tol=1e-13, max_iters=2000)
    first = solve(comp, rule, config)
    vertex = first.dense_weights(rule.size)
    vertex_rule = FullRule(nodes=rule.nodes, weights=vertex)
    again = solve(comp, vertex_rule, config)
    np.testing.assert_array_equal(again.indices, first.indices)
    np.testing.assert_allclose(again.weights, first.weights, rtol=1e-7)


def test_solve_nonnegative_and_locking():
    system, rule = monomial_setup()
    comp = compress(system, 0.0)
    start = rule.weights.copy()
    start[[0, 7]] = 0.0
    result = iterate(comp.matrix, comp.rhs, start, FocussConfig(residual_tol=1e-10))
    assert result.weights.min() >= 0.0
    assert result.weights[0] == 0.0 and result.weights[7] == 0.0


def test_solve_residual_contract_after_pruning():
    system, rule = monomial_setup(16)
    comp = compress(system, 0.0)
    config = FocussConfig(residual_tol=1e-8, conv_tol=1e-13, max_iters=2000)
    sparse = solve(comp, rule, config)
    dense = sparse.dense_weights(rule.size)
    direct = np.linalg.norm(comp.matrix @ dense - comp.rhs)
    assert direct == pytest.approx(sparse.residual_norm, rel=1e-12)
    assert sparse.residual_norm <= 1e-8 * (1 + 1e-8)


def test_solve_stagnation_flagged(monkeypatch):
    comp, rule = measure_only_system(4)

    def negative_step(factors, rhs, ridge):
        return np.array([1.0, -1.0, 0.0, 0.0])

    monkeypatch.setattr(focuss, "_apply_step", negative_step)
    # saturated calibration skips the per-step residual control, which the
    # fake step intentionally violates
    monkeypatch.setattr(
        focuss,
        "calibrate_lambda",
        lambda factors, rhs, tol: focuss.CalibrationResult(0.0, 1.0, True),
    )
    start = FullRule(nodes=rule.nodes, weights=np.array([1.0, 0.0, 0.0, 0.0]))
    config = FocussConfig(residual_tol=1e-6, max_iters=50)
    sparse = solve(comp, start, config)
    assert sparse.stagnated


def test_solve_size_mismatch_rejected():
    comp, rule = measure_only_system(6)
    other = trapezoid_rule(5)
    with pytest.raises(ValueError, match="nodes"):
        solve(comp, other, FocussConfig(residual_tol=1e-6))


def test_solve_warns_when_support_exceeds_rank_margin():
    comp, rule = measure_only_system(8)
    config = FocussConfig(residual_tol=1e-6, max_iters=1)
    # one iteration from uniform-ish weights keeps everything active
    with pytest.warns(UserWarning, match="rank"):
        solve(comp, rule, config)


def test_config_validation():
    with pytest.raises(ValueError):
        FocussConfig(residual_tol=-1.0)
    with pytest.raises(ValueError):
        FocussConfig(residual_tol=0.0, exponent=0.5)
    with pytest.raises(ValueError):
        FocussConfig(residual_tol=0.0, exponent=1.0)
    with pytest.raises(ValueError):
        FocussConfig(residual_tol=0.0, max_iters=0)
    with pytest.raises(ValueError):
        FocussConfig(residual_tol=0.0, conv_tol=0.0)
