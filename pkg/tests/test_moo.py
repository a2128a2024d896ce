import numpy as np
import pytest

from mesmoc.benchmarks import get_benchmark
from mesmoc.gp import SampledFunction
from mesmoc.moo import (
    Individual,
    NSGA2Config,
    crowding_distance,
    domination_matrix,
    evolve,
    non_dominated_sort,
    nsga2,
    pareto_filter,
    pareto_mask,
    rank_individuals,
    solve_cheap,
)
from mesmoc.problem import OutputVector, ProblemSpec, constraint_dominates

SPEC = ProblemSpec(dim=2, num_objectives=2, num_constraints=1, bounds=[[0, 1], [0, 1]])


def peel(F, C):
    pts = [OutputVector(f, c) for f, c in zip(F, C)]
    remaining, fronts = set(range(len(pts))), []
    while remaining:
        front = {j for j in remaining if not any(constraint_dominates(pts[i], pts[j]) for i in remaining)}
        fronts.append(front)
        remaining -= front
    return fronts


class TestSorting:
    def test_incomparable_points_form_one_front(self):
        F = np.array([[0, 3], [1, 2], [2, 1], [3, 0]], float)
        assert [f.tolist() for f in non_dominated_sort(F)] == [[0, 1, 2, 3]]

    def test_chain(self):
        F = np.array([[1, 1], [3, 3], [2, 2]], float)
        assert [f.tolist() for f in non_dominated_sort(F)] == [[1], [2], [0]]

    def test_random_against_peeling(self):
        rng = np.random.default_rng(0)
        F, C = rng.normal(size=(20, 2)), rng.normal(0.3, 1, (20, 1))
        assert [set(f.tolist()) for f in non_dominated_sort(F, C)] == peel(F, C)

    def test_infeasible_ranked_by_violation(self):
        F = np.zeros((3, 2))
        C = np.array([[-2.0], [-1.0], [0.5]])
        assert [f.tolist() for f in non_dominated_sort(F, C)] == [[2], [1], [0]]

    def test_domination_matrix_is_irreflexive(self):
        F = np.random.default_rng(1).integers(0, 3, (30, 2)).astype(float)
        assert not np.diag(domination_matrix(F)).any()

    def test_rank_individuals(self):
        pop = [Individual(np.zeros(1), OutputVector(f, [0.0])) for f in ([1, 1], [2, 2], [0, 3])]
        fronts = rank_individuals(pop)
        assert [len(f) for f in fronts] == [2, 1]
        assert pop[0].rank == 1 and pop[1].rank == 0 and pop[2].rank == 0


class TestCrowding:
    def test_small_fronts_are_all_extreme(self):
        assert np.all(np.isinf(crowding_distance(np.array([[0.0, 1.0], [1.0, 0.0]]))))
        assert np.all(np.isinf(crowding_distance(np.array([[0.0, 1.0]]))))

    def test_collinear_middle_point(self):
        d = crowding_distance(np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]]))
        assert np.isinf(d[0]) and np.isinf(d[2]) and d[1] == pytest.approx(2.0)

    def test_degenerate_range(self):
        d = crowding_distance(np.ones((5, 2)))
        assert np.isfinite(d).sum() == 3 and np.all(d[np.isfinite(d)] == 0)


def constant(value, d=2):
    return SampledFunction(np.zeros((1, d)), np.zeros(1), np.zeros(1), 1.0, offset=value)


class TestNSGA2:
    def test_config_validation(self):
        for bad in (dict(pop_size=5), dict(pop_size=2), dict(generations=0)):
            with pytest.raises(ValueError):
                NSGA2Config(**bad)

    def test_constant_objectives(self):
        spec = ProblemSpec(dim=2, num_objectives=2, bounds=[[0, 1], [0, 1]])
        sample = nsga2([constant(1.0), constant(-2.0)], [], spec, NSGA2Config(8, 3), 0)
        np.testing.assert_array_equal(np.unique(sample.points, axis=0), [[1.0, -2.0]])
        np.testing.assert_array_equal(sample.maxima, [1.0, -2.0])
        assert sample.feasible

    def test_same_seed_same_front(self):
        bench = get_benchmark("srn")
        objs = [lambda X, k=k: bench.canonical(X)[0][:, k] for k in range(2)]
        cons = [lambda X, k=k: bench.canonical(X)[1][:, k] for k in range(2)]
        a = nsga2(objs, cons, bench.spec, NSGA2Config(20, 10), 3)
        b = nsga2(objs, cons, bench.spec, NSGA2Config(20, 10), 3)
        np.testing.assert_array_equal(a.points, b.points)
        np.testing.assert_array_equal(a.x, b.x)

    def test_no_feasible_point_fallback(self):
        spec = ProblemSpec(dim=1, num_objectives=2, num_constraints=1, bounds=[[0, 1]])
        f1, f2 = (lambda X: X[:, 0]), (lambda X: -X[:, 0])
        c = lambda X: -1.0 - X[:, 0]  # least violated at x = 0
        sample = nsga2([f1, f2], [c], spec, NSGA2Config(20, 20), 0)
        assert not sample.feasible
        assert np.all(sample.points[:, 2] < 0)
        assert sample.x.min() < 0.05
        np.testing.assert_array_equal(sample.maxima, sample.points.max(axis=0))

    def test_extra_candidates_join_the_front(self):
        spec = ProblemSpec(dim=1, num_objectives=2, bounds=[[0, 1]])
        f1 = lambda X: np.where(X[:, 0] == 0.5, 10.0, X[:, 0])
        f2 = lambda X: np.where(X[:, 0] == 0.5, 10.0, -X[:, 0])
        sample = nsga2([f1, f2], [], spec, NSGA2Config(8, 2), 0, extra=[[0.5]])
        np.testing.assert_array_equal(sample.points, [[10.0, 10.0]])

    def test_observed_maxima_cover_the_front(self):
        spec = ProblemSpec(dim=1, num_objectives=2, num_constraints=1, bounds=[[0, 1]])
        sample = nsga2([lambda X: X[:, 0], lambda X: 1 - X[:, 0]], [lambda X: 0.5 - X[:, 0]], spec, NSGA2Config(20, 10), 0)
        assert np.all(sample.observed_maxima >= sample.maxima)
        # the constraint is largest at x = 0, which the search visits
        assert sample.observed_maxima[2] >= 0.45

    def test_evolve_respects_budget(self):
        calls = []

        def evaluate_batch(X):
            calls.append(len(X))
            return np.column_stack([X[:, 0], -X[:, 0]]), np.zeros((len(X), 0))

        spec = ProblemSpec(dim=1, num_objectives=2, bounds=[[0, 1]])
        X, F, C = evolve(evaluate_batch, spec, NSGA2Config(10, 100), 0, max_evals=57)
        assert sum(calls) == 57 and calls[0] == 10 and calls[-1] == 7
        assert X.shape == (10, 1)

    def test_grid_search_stays_on_grid(self):
        rng = np.random.default_rng(2)
        grid = rng.uniform(0, 1, (20000, 2))
        spec = ProblemSpec(dim=2, num_objectives=2, grid=grid)
        sample = nsga2([lambda X: X[:, 0], lambda X: X[:, 1]], [], spec, NSGA2Config(20, 10), 0)
        for x in sample.x:
            assert spec.contains(x)

    def test_solve_cheap_enumerates_small_grids(self):
        bench = get_benchmark("grid")
        objs = [lambda X, k=k: bench.canonical(X)[0][:, k] for k in range(2)]
        cons = [lambda X, k=k: bench.canonical(X)[1][:, k] for k in range(2)]
        sample = solve_cheap(objs, cons, bench.spec, NSGA2Config(), 0)
        F, C = bench.canonical(bench.spec.grid)
        expected = F[pareto_mask(F, C)]
        assert {tuple(p) for p in sample.points[:, :2]} == {tuple(p) for p in expected}

    def test_single_point_grid(self):
        spec = ProblemSpec(dim=1, num_objectives=2, num_constraints=1, grid=[[0.3]])
        sample = solve_cheap([lambda X: X[:, 0], lambda X: 2 * X[:, 0]], [lambda X: X[:, 0] - 1], spec)
        np.testing.assert_allclose(sample.maxima, [0.3, 0.6, -0.7])


class TestParetoFilter:
    def test_examples(self):
        pts = [OutputVector([1, 2], [0]), OutputVector([2, 1], [1]), OutputVector([0, 0], [2])]
        assert pareto_filter(pts) == pts[:2]
        assert pareto_filter([OutputVector([1, 1], [-1]), OutputVector([0, 0], [-0.1])]) == []
        assert pareto_filter([]) == []

    def test_against_brute_force(self):
        rng = np.random.default_rng(3)
        F, C = rng.normal(size=(100, 3)), rng.normal(0.5, 1, (100, 2))
        pts = [OutputVector(f, c) for f, c in zip(F, C)]
        feas = [p for p in pts if p.feasible]
        brute = [p for p in feas if not any(np.all(q.objectives >= p.objectives) and np.any(q.objectives > p.objectives)
                                            for q in feas)]
        assert [id(p) for p in pareto_filter(pts)] == [id(p) for p in brute]
