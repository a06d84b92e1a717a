"""Tests for cooperative coevolution and its subproblem solvers."""

import numpy as np
import pytest

from wsnopt.cc import (
    ContextVector,
    ContributionScheduler,
    RoundRobinScheduler,
    SubproblemView,
    cc_optimize,
)
from wsnopt.cmaes import CmaesSubsolver, make_cmaes_subsolver
from wsnopt.evo import Bounds, FunctionProblem, TrackedObjective
from wsnopt.sansde import (
    SansdeSubsolver,
    make_sansde_subsolver,
    strategy_success_probability,
    weighted_crossover_mean,
)


def sphere(x):
    return float(np.sum(x * x))


def shifted_quadratic(x):
    return float(np.sum((x - 3.0) ** 2))


def make_objective(fn, dim, bounds, max_evals):
    return TrackedObjective(FunctionProblem(fn, dim, bounds), max_evals)


class TestSubproblemView:
    def make_view(self, indices, max_evals=100):
        obj = make_objective(shifted_quadratic, 3, Bounds(0.0, 15.0), max_evals)
        context = ContextVector(np.zeros(3), 27.0)
        return obj, context, SubproblemView(obj, context, indices)

    def test_evaluates_spliced_vector(self):
        obj, context, view = self.make_view([2])
        value = view.evaluate(np.array([3.0]))
        assert value == pytest.approx(18.0)
        assert obj.budget.used == 1
        # evaluation alone must not move the context
        np.testing.assert_array_equal(context.values, np.zeros(3))

    def test_commit_requires_strict_improvement(self):
        _, context, view = self.make_view([2])
        assert view.commit_if_better(np.array([3.0]), 18.0)
        assert context.fitness == 18.0
        np.testing.assert_array_equal(context.values, [0.0, 0.0, 3.0])
        assert not view.commit_if_better(np.array([1.0]), 18.0)
        assert not view.commit_if_better(np.array([0.5]), 25.0)
        assert context.fitness == 18.0

    def test_current_returns_a_copy(self):
        _, context, view = self.make_view([0, 1])
        sub = view.current()
        sub[0] = 99.0
        assert context.values[0] == 0.0


class TestSchedulers:
    def test_round_robin_cycles(self):
        sched = RoundRobinScheduler()
        assert [sched.pick(3) for _ in range(6)] == [0, 1, 2, 0, 1, 2]

    def test_contribution_greedy_after_warmup(self):
        sched = ContributionScheduler()
        assert sched.pick(3) == 0
        sched.record(0, 5.0)
        assert sched.pick(3) == 1
        sched.record(1, 1.0)
        assert sched.pick(3) == 2
        sched.record(2, 0.0)
        # greedy on the largest recorded drop
        assert sched.pick(3) == 0
        sched.record(0, 0.0)
        assert sched.pick(3) == 1
        sched.record(1, 0.0)
        # everything at zero: cycle instead of hammering group 0
        assert sched.pick(3) == 0
        sched.record(0, 0.0)
        assert sched.pick(3) == 1
        sched.record(1, 2.0)
        assert sched.pick(3) == 1


class TestCmaesSubsolver:
    def test_population_size_rule(self):
        obj = make_objective(sphere, 5, Bounds(-5.0, 5.0), 100)
        context = ContextVector(np.ones(5), 5.0)
        solver = CmaesSubsolver(SubproblemView(obj, context, range(5)))
        assert solver.lam == 8
        assert solver.mu == 4
        assert solver.weights.sum() == pytest.approx(1.0)

    def test_sphere_convergence(self):
        obj = make_objective(sphere, 5, Bounds(-5.0, 5.0), 6000)
        result = cc_optimize(
            obj,
            [np.arange(5)],
            make_cmaes_subsolver,
            rng=np.random.default_rng(11),
        )
        assert result.best_f < 1e-8
        assert obj.budget.used == 6000
        assert sphere(result.best_x) == pytest.approx(result.best_f)

    def test_budget_truncated_generation_skips_update(self):
        obj = make_objective(sphere, 5, Bounds(-5.0, 5.0), 3)
        context = ContextVector(np.ones(5), 5.0)
        view = SubproblemView(obj, context, range(5))
        solver = CmaesSubsolver(view)
        mean_before = solver.mean.copy()
        sigma_before = solver.sigma
        solver.step(np.random.default_rng(0))
        assert obj.budget.used == 3
        np.testing.assert_array_equal(solver.mean, mean_before)
        assert solver.sigma == sigma_before

    def test_reset_restores_isotropic_state(self):
        obj = make_objective(sphere, 4, Bounds(-5.0, 5.0), 100)
        context = ContextVector(np.ones(4), 4.0)
        solver = CmaesSubsolver(SubproblemView(obj, context, range(4)))
        solver.cov = -np.eye(4)
        assert not solver._decompose()
        solver.sigma = 123.0
        solver._reset()
        assert solver.resets == 1
        assert solver.sigma == solver.sigma0
        np.testing.assert_array_equal(solver.cov, np.eye(4))


class TestSansdeSubsolver:
    @pytest.mark.parametrize(
        "counts, expected",
        [
            ((10, 0, 0, 10), 0.95),
            ((0, 10, 10, 0), 0.05),
            ((0, 0, 0, 0), 0.5),
            ((5, 5, 5, 5), 0.5),
        ],
    )
    def test_strategy_probability(self, counts, expected):
        assert strategy_success_probability(*counts) == pytest.approx(expected)

    def test_weighted_crossover_mean(self):
        assert weighted_crossover_mean([0.2, 0.8], [1.0, 3.0]) == pytest.approx(0.65)
        assert weighted_crossover_mean([], []) == 0.5
        assert weighted_crossover_mean([0.4], [0.0]) == 0.5

    def test_lazy_initialization_costs_one_subpopulation(self):
        obj = make_objective(shifted_quadratic, 3, Bounds(0.0, 15.0), 1000)
        context = ContextVector(np.full(3, 7.0), shifted_quadratic(np.full(3, 7.0)))
        view = SubproblemView(obj, context, [0, 1])
        solver = SansdeSubsolver(view)
        solver.step(np.random.default_rng(0))
        assert obj.budget.used == 30
        np.testing.assert_array_equal(solver.positions[0], [7.0, 7.0])

    def test_adaptation_counters_reset(self):
        obj = make_objective(shifted_quadratic, 3, Bounds(0.0, 15.0), 1000)
        context = ContextVector(np.full(3, 7.0), shifted_quadratic(np.full(3, 7.0)))
        view = SubproblemView(obj, context, [0, 1])
        solver = SansdeSubsolver(view, strategy_update_period=1, cr_update_period=1)
        rng = np.random.default_rng(1)
        solver.step(rng)
        solver.step(rng)
        assert solver._strategy_counts.sum() == 0
        assert solver._fscale_counts.sum() == 0
        assert solver._cr_successes == []
        assert 0.05 <= solver.p_strategy <= 0.95
        assert 0.0 <= solver.cr_mean <= 1.0

    def test_single_variable_groups_converge(self):
        obj = make_objective(shifted_quadratic, 4, Bounds(0.0, 15.0), 8000)
        result = cc_optimize(
            obj,
            [[0], [1], [2], [3]],
            make_sansde_subsolver,
            rng=np.random.default_rng(5),
        )
        assert result.best_f < 1e-6
        assert obj.budget.used == 8000


class TestCcOptimize:
    def test_zero_step_run_returns_the_seed_point(self):
        obj = make_objective(shifted_quadratic, 3, Bounds(0.0, 15.0), 1)
        seed_point = np.array([5.0, 5.0, 5.0])
        result = cc_optimize(
            obj,
            [[0, 1], [2]],
            make_cmaes_subsolver,
            rng=np.random.default_rng(0),
            initial=seed_point,
        )
        np.testing.assert_array_equal(result.best_x, seed_point)
        assert result.best_f == pytest.approx(shifted_quadratic(seed_point))

    def test_contribution_scheduler_with_mixed_groups(self):
        def coupled(x):
            return float(x[0] * x[1] + (x[2] - 3.0) ** 2)

        obj = make_objective(coupled, 3, Bounds(0.0, 15.0), 4000)
        result = cc_optimize(
            obj,
            [[0, 1], [2]],
            make_cmaes_subsolver,
            scheduler=ContributionScheduler(),
            rng=np.random.default_rng(3),
        )
        assert result.best_f < 1e-3
        assert obj.budget.used == 4000

    def test_population_size_setting_reaches_objective(self):
        obj = make_objective(sphere, 2, Bounds(-5.0, 5.0), 50)
        cc_optimize(
            obj,
            [[0], [1]],
            make_sansde_subsolver,
            rng=np.random.default_rng(0),
            population_size=25,
        )
        assert obj.population_size == 25
        assert obj.budget.used == 50
