"""Self-adaptive differential evolution subsolver for subproblem views.

Keeps a small subpopulation per variable group.  Mutation alternates
between rand/1 and current-to-best/1 with an adaptive selection
probability, the scale factor is drawn from a Gaussian or a folded Cauchy
with a second adaptive probability, and the crossover-rate mean is
re-estimated from improvement-weighted successful rates.  Member fitness
is measured against the context at evaluation time and is not refreshed
when other groups move the context, which trades a little selection bias
for a large saving in evaluations.
"""

from __future__ import annotations

import numpy as np

from .evo import binomial_crossover, pick_distinct, reflect_into_bounds


def strategy_success_probability(ns1: int, nf1: int, ns2: int, nf2: int) -> float:
    """Relative success rate of strategy one, clamped away from 0 and 1."""
    numerator = ns1 * (ns2 + nf2)
    denominator = ns2 * (ns1 + nf1) + numerator
    if denominator == 0:
        return 0.5
    return float(np.clip(numerator / denominator, 0.05, 0.95))


def weighted_crossover_mean(cr_values, improvements) -> float:
    """Mean of successful crossover rates weighted by their fitness gains."""
    cr_values = np.asarray(cr_values, dtype=float)
    improvements = np.asarray(improvements, dtype=float)
    total = improvements.sum()
    if cr_values.size == 0 or total <= 0.0:
        return 0.5
    return float(np.sum(cr_values * improvements) / total)


class SansdeSubsolver:
    """One subpopulation generation per ``step``; lazy first evaluation."""

    def __init__(
        self,
        view,
        pop_size: int = 30,
        strategy_update_period: int = 50,
        cr_update_period: int = 25,
    ):
        self.view = view
        self.pop_size = int(pop_size)
        self.strategy_update_period = int(strategy_update_period)
        self.cr_update_period = int(cr_update_period)
        self.p_strategy = 0.5
        self.p_gaussian_f = 0.5
        self.cr_mean = 0.5
        self.positions: np.ndarray | None = None
        self.fitness: np.ndarray | None = None
        self.generation = 0
        self._strategy_counts = np.zeros(4, dtype=int)  # ns1 nf1 ns2 nf2
        self._fscale_counts = np.zeros(4, dtype=int)
        self._cr_successes: list[tuple[float, float]] = []

    def _initialize(self, rng: np.random.Generator):
        bounds = self.view.bounds
        d = self.view.dimension
        self.positions = rng.uniform(bounds.lower, bounds.upper, (self.pop_size, d))
        self.positions[0] = self.view.current()
        self.fitness = np.full(self.pop_size, np.inf)
        n = min(self.pop_size, self.view.remaining)
        if n > 0:
            values = self.view.evaluate_batch(self.positions[:n])
            self.fitness[:n] = values
            best = int(np.argmin(values))
            self.view.commit_if_better(self.positions[best], float(values[best]))

    def _draw_scale(self, rng: np.random.Generator) -> tuple[float, bool]:
        gaussian = rng.random() < self.p_gaussian_f
        if gaussian:
            raw = rng.normal(0.5, 0.3)
        else:
            raw = abs(rng.standard_cauchy())
        return float(np.clip(abs(raw), 0.05, 2.0)), gaussian

    def step(self, rng: np.random.Generator) -> None:
        if self.positions is None:
            self._initialize(rng)
            return
        n = min(self.pop_size, self.view.remaining)
        if n <= 0:
            return
        best_index = int(np.argmin(self.fitness))
        trials = np.empty((n, self.view.dimension))
        used_rand = np.empty(n, dtype=bool)
        used_gaussian = np.empty(n, dtype=bool)
        crs = np.empty(n)
        for i in range(n):
            scale, gaussian = self._draw_scale(rng)
            cr = float(np.clip(rng.normal(self.cr_mean, 0.1), 0.0, 1.0))
            rand_strategy = rng.random() < self.p_strategy
            if rand_strategy:
                a, b, c = pick_distinct(self.pop_size, i, 3, rng)
                donor = self.positions[a] + scale * (
                    self.positions[b] - self.positions[c]
                )
            else:
                a, b = pick_distinct(self.pop_size, i, 2, rng)
                donor = (
                    self.positions[i]
                    + scale * (self.positions[best_index] - self.positions[i])
                    + scale * (self.positions[a] - self.positions[b])
                )
            trial = binomial_crossover(self.positions[i], donor, cr, rng)
            trials[i] = reflect_into_bounds(trial, self.view.bounds)
            used_rand[i] = rand_strategy
            used_gaussian[i] = gaussian
            crs[i] = cr

        values = self.view.evaluate_batch(trials)
        for i in range(n):
            improved = values[i] < self.fitness[i]
            s_slot = (0 if improved else 1) if used_rand[i] else (2 if improved else 3)
            f_slot = (0 if improved else 1) if used_gaussian[i] else (2 if improved else 3)
            self._strategy_counts[s_slot] += 1
            self._fscale_counts[f_slot] += 1
            if improved:
                self._cr_successes.append((crs[i], float(self.fitness[i] - values[i])))
                self.positions[i] = trials[i]
                self.fitness[i] = values[i]
        best = int(np.argmin(values))
        self.view.commit_if_better(trials[best], float(values[best]))

        self.generation += 1
        if self.generation % self.strategy_update_period == 0:
            self.p_strategy = strategy_success_probability(*self._strategy_counts)
            self.p_gaussian_f = strategy_success_probability(*self._fscale_counts)
            self._strategy_counts[:] = 0
            self._fscale_counts[:] = 0
        if self.generation % self.cr_update_period == 0:
            if self._cr_successes:
                values_list, gains = zip(*self._cr_successes)
                self.cr_mean = weighted_crossover_mean(values_list, gains)
            self._cr_successes.clear()


def make_sansde_subsolver(view, rng=None, pop_size: int = 30):
    return SansdeSubsolver(view, pop_size=pop_size)
