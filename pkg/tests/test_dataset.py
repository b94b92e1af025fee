import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsequad.dataset import (
    ConstraintSystem,
    FullRule,
    FunctionFamily,
    TrainingSet,
    assemble_system,
    full_integrals,
)
from sparsequad.families import trapezoid_rule

from _oracles import direct_weighted_sums


def linear_family():
    # f(x; mu) = mu * x on [0, 1]
    return FunctionFamily(
        n_members=1,
        param_dim=1,
        evaluate=lambda k, x, mu: mu[0] * np.asarray(x, float),
        domain_measure=1.0,
    )


def constant_family(measure=1.0):
    return FunctionFamily(
        n_members=1,
        param_dim=1,
        evaluate=lambda k, x, mu: np.ones_like(np.asarray(x, float)),
        domain_measure=measure,
    )


def test_linear_family_three_node_system():
    rule = FullRule(nodes=np.array([0.0, 0.5, 1.0]), weights=np.array([0.25, 0.5, 0.25]))
    train = TrainingSet(np.array([[1.0], [2.0]]))
    system = assemble_system(linear_family(), rule, train)
    assert system.matrix.shape == (3, 3)
    assert np.all(system.matrix[-1] == 1.0)
    # oracle: direct summation sum_i w_i * mu * x_i
    expected = direct_weighted_sums(
        [mu * rule.nodes for mu in (1.0, 2.0)], rule.weights
    )
    np.testing.assert_allclose(system.rhs[:2], expected, rtol=0, atol=0)
    np.testing.assert_allclose(system.rhs, [0.5, 1.0, 1.0], rtol=1e-15)
    assert system.measure_row_index == 2


def test_constant_family_all_rows_ones():
    rule = trapezoid_rule(9, 0.0, 2.0)
    train = TrainingSet(np.linspace(0, 1, 4))
    system = assemble_system(constant_family(measure=2.0), rule, train)
    assert np.all(system.matrix == 1.0)
    np.testing.assert_allclose(system.rhs, 2.0, rtol=1e-14)


def test_rhs_matches_full_integrals_entrywise():
    rule = trapezoid_rule(7)
    train = TrainingSet(np.array([[0.3], [1.7], [2.2]]))
    family = linear_family()
    system = assemble_system(family, rule, train)
    integrals = full_integrals(family, rule, train)
    for m in range(3):
        assert system.rhs[m] == integrals[0, m]


def test_row_ordering_is_member_major():
    family = FunctionFamily(
        n_members=2,
        param_dim=1,
        evaluate=lambda k, x, mu: (k + 1.0) * mu[0] * np.asarray(x, float),
        domain_measure=1.0,
    )
    rule = trapezoid_rule(5)
    train = TrainingSet(np.array([[1.0], [2.0], [3.0]]))
    system = assemble_system(family, rule, train)
    assert system.n_rows == 2 * 3 + 1
    for k in range(2):
        for m in range(3):
            row = system.matrix[k * 3 + m]
            np.testing.assert_array_equal(row, (k + 1.0) * train.params[m, 0] * rule.nodes)


def test_full_integrals_constant_is_measure():
    rule = trapezoid_rule(11)
    out = full_integrals(constant_family(), rule, TrainingSet(np.array([[0.0]])))
    np.testing.assert_allclose(out, 1.0, rtol=1e-14)


def test_full_integrals_quadratic_antiderivative():
    family = FunctionFamily(
        n_members=1,
        param_dim=1,
        evaluate=lambda k, x, mu: np.asarray(x, float) ** 2,
        domain_measure=1.0,
    )
    rule = trapezoid_rule(1201)
    out = full_integrals(family, rule, TrainingSet(np.array([[0.0]])))
    assert abs(out[0, 0] - 1.0 / 3.0) < 1e-6


def test_full_integrals_scaled_sine():
    family = FunctionFamily(
        n_members=1,
        param_dim=1,
        evaluate=lambda k, x, mu: mu[0] * np.sin(np.asarray(x, float)),
        domain_measure=np.pi,
    )
    rule = trapezoid_rule(2001, 0.0, np.pi)
    out = full_integrals(family, rule, TrainingSet(np.array([[2.0]])))
    assert abs(out[0, 0] - 4.0) < 1e-6


def test_full_weights_are_feasible():
    rule = trapezoid_rule(17)
    train = TrainingSet(np.linspace(0.5, 2.0, 5))
    system = assemble_system(linear_family(), rule, train)
    residual = system.matrix @ system.full_weights - system.rhs
    assert np.abs(residual).max() <= 1e-12 * max(1.0, np.abs(system.rhs).max())


@settings(max_examples=25, deadline=None)
@given(
    n_nodes=st.integers(3, 20),
    n_train=st.integers(1, 5),
    degree=st.integers(0, 3),
)
def test_feasibility_property_polynomials(n_nodes, n_train, degree):
    family = FunctionFamily(
        n_members=1,
        param_dim=1,
        evaluate=lambda k, x, mu: (1.0 + mu[0]) * np.asarray(x, float) ** degree,
        domain_measure=1.0,
    )
    rule = trapezoid_rule(n_nodes)
    train = TrainingSet(np.linspace(0.0, 1.0, n_train))
    system = assemble_system(family, rule, train)
    assert system.n_rows == n_train + 1
    residual = system.matrix @ system.full_weights - system.rhs
    assert np.abs(residual).max() <= 1e-12 * max(1.0, np.abs(system.rhs).max())


def test_param_dim_mismatch_rejected():
    rule = trapezoid_rule(5)
    train = TrainingSet(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        assemble_system(linear_family(), rule, train)


def test_non_finite_evaluation_reports_location():
    def bad(k, x, mu):
        values = np.asarray(x, float).copy()
        values[2] = np.nan
        return values

    family = FunctionFamily(n_members=1, param_dim=1, evaluate=bad, domain_measure=1.0)
    rule = trapezoid_rule(6)
    with pytest.raises(ValueError, match=r"member 0, sample 0, node 2"):
        assemble_system(family, rule, TrainingSet(np.array([[1.0]])))


def test_measure_mismatch_rejected():
    family = constant_family(measure=2.0)  # rule below integrates to 1
    rule = trapezoid_rule(5)
    with pytest.raises(ValueError, match="domain measure"):
        assemble_system(family, rule, TrainingSet(np.array([[0.0]])))


def test_negative_weights_rejected():
    with pytest.raises(ValueError, match="negative quadrature weight"):
        FullRule(nodes=np.array([0.0, 1.0]), weights=np.array([0.5, -0.5]))


def test_training_box_enforced():
    with pytest.raises(ValueError, match="outside"):
        TrainingSet(np.array([[2.0]]), box=np.array([[0.0, 1.0]]))


def test_constraint_system_measure_row_validation():
    with pytest.raises(ValueError, match="all ones"):
        ConstraintSystem(
            matrix=np.array([[1.0, 2.0]]), rhs=np.array([1.0]), measure_row_index=0
        )


def test_family_validation():
    with pytest.raises(ValueError):
        FunctionFamily(n_members=0, param_dim=1, evaluate=lambda k, x, mu: x, domain_measure=1.0)
    with pytest.raises(ValueError):
        FunctionFamily(n_members=1, param_dim=0, evaluate=lambda k, x, mu: x, domain_measure=1.0)
    with pytest.raises(ValueError):
        FunctionFamily(n_members=1, param_dim=1, evaluate=lambda k, x, mu: x, domain_measure=0.0)
