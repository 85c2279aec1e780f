import numpy as np
import pytest

from brcnet import (
    DagStructure,
    InfeasibleError,
    ParameterSet,
    ValidationError,
    input_distribution_map,
    input_marginal_prob,
    numerical_jacobian,
    numerical_rank,
    variational_dependence_probe,
)
from brcnet.identifiability import (
    directional_difference,
    free_parameter_count,
    from_free_vector,
    restore_full,
    sample_interior_point,
    to_free_vector,
)
from brcnet.network import all_assignments

from conftest import binary, naive_bayes, random_dag, random_params
from oracles import symbolic_directional_derivative


def symmetric_point(rng):
    """Naive Bayes n=3 point where every input CPT row ignores the class."""
    s = naive_bayes(3)
    rows = [rng.uniform(0.2, 0.8) for _ in range(3)]
    tables = [[[0.4, 0.6]]] + [[[a, 1 - a], [a, 1 - a]] for a in rows]
    return to_free_vector(s, ParameterSet(tuple(tables)))


class TestInputMap:
    def test_uniform(self):
        s = naive_bayes(3)
        theta_x = input_distribution_map(s, ParameterSet.uniform(s))
        assert theta_x.shape == (7,)
        assert np.allclose(theta_x, 1 / 8, atol=1e-15)

    def test_first_mixture_entry(self, rng):
        s = naive_bayes(3)
        p = random_params(s, rng)
        t = p.tables
        expected = (t[0][0, 0] * t[1][0, 0] * t[2][0, 0] * t[3][0, 0]
                    + t[0][0, 1] * t[1][1, 0] * t[2][1, 0] * t[3][1, 0])
        assert input_distribution_map(s, p)[0] == pytest.approx(expected, abs=1e-15)

    def test_consistency_with_network_core(self, rng):
        for _ in range(20):
            s = random_dag(rng, int(rng.integers(2, 5)), max_card=3)
            p = random_params(s, rng, low=0.0)
            theta_x = input_distribution_map(s, p)
            assert restore_full(theta_x).sum() == pytest.approx(1.0, abs=1e-12)
            xs = all_assignments([s.cardinalities[i] for i in s.input_indices])
            full = restore_full(theta_x)
            for k, x in enumerate(xs[:-1]):
                assert theta_x[k] == pytest.approx(input_marginal_prob(s, p, x), abs=1e-12)
            assert full[-1] == pytest.approx(input_marginal_prob(s, p, xs[-1]), abs=1e-12)

    def test_cap(self):
        s = naive_bayes(3)
        with pytest.raises(InfeasibleError):
            input_distribution_map(s, ParameterSet.uniform(s), cap=4)

    def test_free_vector_round_trip(self, rng):
        s = random_dag(rng, 4, max_card=3)
        p = random_params(s, rng)
        v = to_free_vector(s, p)
        assert v.shape == (free_parameter_count(s),)
        back = from_free_vector(s, v)
        assert all(np.allclose(a, b, atol=1e-15) for a, b in zip(back.tables, p.tables))


class TestJacobian:
    def test_identity_sub_map(self):
        s = DagStructure(binary("Y", "X"), ((), ()), 0)
        jac = numerical_jacobian(s, np.array([0.3, 0.6]))
        assert jac.shape == (1, 2)
        assert np.allclose(jac, [[0.0, 1.0]], atol=1e-9)

    def test_naive_bayes_shape_and_rank(self, rng):
        s = naive_bayes(3)
        point = sample_interior_point(s, rng, 1e-3)
        jac = numerical_jacobian(s, point)
        assert jac.shape == (7, 7)
        assert numerical_rank(jac, 1e-7) == 7

    def test_margin_violation(self):
        s = naive_bayes(3)
        point = np.full(7, 0.5)
        point[3] = 1e-6
        with pytest.raises(ValidationError):
            numerical_jacobian(s, point)

    def test_against_symbolic_directional_derivative(self, rng):
        s = naive_bayes(3)
        for _ in range(3):
            point = sample_interior_point(s, rng, 0.05)
            direction = rng.normal(size=point.size)
            exact = symbolic_directional_derivative(s, point, direction)
            assert np.allclose(numerical_jacobian(s, point) @ direction, exact, atol=1e-8)
            errors = [np.abs(directional_difference(s, point, direction, h) - exact).max() for h in (1e-2, 5e-3)]
            assert 3 <= errors[0] / errors[1] <= 5

    def test_symmetric_permutation(self, rng):
        s = naive_bayes(3)
        row = rng.dirichlet([1, 1], size=2)
        p = ParameterSet(([[0.35, 0.65]], row, row, rng.dirichlet([1, 1], size=2)))
        jac = numerical_jacobian(s, to_free_vector(s, p))
        # free columns: [y, X1|y0, X1|y1, X2|y0, X2|y1, X3|y0, X3|y1]
        col_perm = [0, 3, 4, 1, 2, 5, 6]
        xs = all_assignments([2, 2, 2])
        index = {tuple(x): k for k, x in enumerate(xs)}
        row_perm = [index[(x[1], x[0], x[2])] for x in xs[:-1]]
        assert np.allclose(jac[row_perm][:, col_perm], jac, atol=1e-9)


class TestRank:
    def test_basics(self):
        assert numerical_rank(np.zeros((4, 3))) == 0
        assert numerical_rank(np.eye(7)) == 7
        assert numerical_rank(np.zeros((0, 3))) == 0
        with pytest.raises(ValidationError):
            numerical_rank(np.array([[np.nan]]))

    def test_duplicated_column_never_increases_rank(self, rng):
        for _ in range(20):
            m = rng.normal(size=(6, 4)) @ np.diag(rng.integers(0, 2, size=4))
            j = int(rng.integers(4))
            assert numerical_rank(np.column_stack([m, m[:, j]])) == numerical_rank(m)


class TestProbe:
    def test_full_rank_almost_everywhere(self):
        report = variational_dependence_probe(naive_bayes(3), 100, seed=5)
        assert report.points_tested == 100
        assert report.full_rank_count == 100
        assert set(report.per_point_ranks) == {7}
        assert report.expected_full_rank == 7

    def test_symmetric_point_is_deficient(self, rng):
        s = naive_bayes(3)
        point = symmetric_point(rng)
        jac = numerical_jacobian(s, point)
        assert np.abs(jac[:, 0]).max() < 1e-9
        report = variational_dependence_probe(s, 2, seed=1, extra_points=[point])
        assert report.per_point_ranks[-1] < 7
        assert report.full_rank_count == 2

    def test_deterministic(self):
        a = variational_dependence_probe(naive_bayes(2), 10, seed=42)
        b = variational_dependence_probe(naive_bayes(2), 10, seed=42)
        assert a == b

    def test_single_input(self):
        s = DagStructure(binary("Y", "X"), ((), ()), 0)
        report = variational_dependence_probe(s, 3, seed=0)
        assert report.expected_full_rank == 1
        assert report.per_point_ranks == (1, 1, 1)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            variational_dependence_probe(naive_bayes(2), 0, seed=0)
