"""Variable-interaction discovery and decomposition into subproblem groups.

Three graders of structure detection live here: a pairwise finite-difference
interaction test, recursive differential grouping over index sets (with an
optional group-size cap and separable-variable packing), and a spectral
clustering variant that embeds the pairwise interaction-strength graph.
Every probe is charged to the shared evaluation budget through the tracked
objective, with the penalty iteration pinned so detection is consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.linalg import eigh

from .evo import TrackedObjective


@dataclass
class InteractionProbe:
    """Where and how hard to poke the objective when testing interactions.

    ``base`` defaults to the lower-bound corner of the search box, ``delta``
    to half the box width, and ``threshold`` to an adaptive value scaled by
    the magnitude of the involved function values.
    """

    base: np.ndarray | None = None
    delta: float | None = None
    threshold: float | None = None

    def resolve(self, objective: TrackedObjective):
        bounds = objective.bounds
        base = (
            np.full(objective.dimension, bounds.lower, dtype=float)
            if self.base is None
            else np.asarray(self.base, dtype=float)
        )
        delta = 0.5 * bounds.width if self.delta is None else float(self.delta)
        return base, delta


@dataclass
class GroupingResult:
    """Partition of the variable indices plus probing metadata."""

    groups: list[np.ndarray]
    separable: np.ndarray
    probe_evals: int = 0

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    def assert_partition(self, dimension: int):
        merged = np.concatenate(self.groups) if self.groups else np.empty(0, dtype=int)
        if sorted(merged.tolist()) != list(range(dimension)):
            raise AssertionError("groups do not partition the variable indices")


def _adaptive_threshold(f_values, dimension: int) -> float:
    """Detection threshold scaled by dimension and function magnitude."""
    alpha = 1e-12 * dimension
    smallest = min(abs(float(v)) for v in f_values)
    return alpha * max(smallest, 1.0)


def dg_interaction(
    objective: TrackedObjective,
    i: int,
    j: int,
    probe: InteractionProbe | None = None,
) -> tuple[bool, float]:
    """Pairwise finite-difference interaction test between variables i and j.

    Compares the change from perturbing variable ``i`` alone with the same
    perturbation applied after variable ``j`` has moved; a mismatch above the
    detection threshold means the pair is non-separable.  Costs exactly four
    budgeted probe evaluations.
    """
    if i == j:
        raise ValueError("interaction test needs two distinct variables")
    probe = probe or InteractionProbe()
    base, delta = probe.resolve(objective)
    x_i = base.copy()
    x_i[i] += delta
    x_j = base.copy()
    x_j[j] += delta
    x_ij = x_i.copy()
    x_ij[j] += delta
    f0, fi, fj, fij = objective.probe_batch(np.stack([base, x_i, x_j, x_ij]))
    lam = abs((fi - f0) - (fij - fj))
    threshold = (
        probe.threshold
        if probe.threshold is not None
        else _adaptive_threshold((f0, fi, fj, fij), objective.dimension)
    )
    return bool(lam > threshold), float(lam)


class _SetTester:
    """Set-level interaction tests against a growing nucleus of variables.

    The nucleus is perturbed to the upper bound face and candidate sets to
    the box midpoint, so the two shifts never coincide and additively
    separable contributions cancel exactly.
    """

    def __init__(self, objective: TrackedObjective, probe: InteractionProbe):
        self.objective = objective
        self.probe = probe
        bounds = objective.bounds
        self.base, _ = probe.resolve(objective)
        self.high = bounds.upper
        self.mid = bounds.lower + 0.5 * bounds.width
        self.f_base = objective.probe(self.base)

    def nucleus_value(self, nucleus: list[int]) -> float:
        x = self.base.copy()
        x[nucleus] = self.high
        return self.objective.probe(x)

    def interacts(self, nucleus: list[int], f_nucleus: float, candidate) -> bool:
        candidate = list(candidate)
        x2 = self.base.copy()
        x2[candidate] = self.mid
        x12 = x2.copy()
        x12[nucleus] = self.high
        f2, f12 = self.objective.probe_batch(np.stack([x2, x12]))
        lam = abs((f_nucleus - self.f_base) - (f12 - f2))
        threshold = (
            self.probe.threshold
            if self.probe.threshold is not None
            else _adaptive_threshold(
                (self.f_base, f_nucleus, f2, f12), self.objective.dimension
            )
        )
        return lam > threshold


def _recursive_grouping(
    objective: TrackedObjective,
    probe: InteractionProbe,
    size_cap: int | None,
) -> tuple[list[list[int]], list[int], int]:
    """Core recursive differential grouping loop shared by rdg and rdg3."""
    used_before = objective.budget.used
    dim = objective.dimension
    tester = _SetTester(objective, probe)
    cap = dim if size_cap is None else int(size_cap)

    remaining = list(range(dim))
    merged_groups: list[list[int]] = []
    separable: list[int] = []

    while remaining:
        nucleus = [remaining.pop(0)]
        f_nucleus = tester.nucleus_value(nucleus)

        def absorb(candidates: list[int]) -> bool:
            """Bisection search absorbing every direct interactor found."""
            nonlocal f_nucleus
            if len(nucleus) > cap or not candidates:
                return False
            if not tester.interacts(nucleus, f_nucleus, candidates):
                return False
            if len(candidates) == 1:
                var = candidates[0]
                nucleus.append(var)
                remaining.remove(var)
                f_nucleus = tester.nucleus_value(nucleus)
                return True
            half = len(candidates) // 2
            left = absorb(candidates[:half])
            right = absorb(candidates[half:])
            return left or right

        while remaining and len(nucleus) <= cap:
            if not absorb(list(remaining)):
                break

        if len(nucleus) == 1:
            separable.append(nucleus[0])
        else:
            merged_groups.append(sorted(nucleus))

    return merged_groups, separable, objective.budget.used - used_before


def rdg_group(
    objective: TrackedObjective, probe: InteractionProbe | None = None
) -> GroupingResult:
    """Recursive differential grouping with no size cap.

    Non-separable variables end up in merged groups closed under detected
    interaction; separable variables are reported individually and returned
    as singleton groups.
    """
    probe = probe or InteractionProbe()
    merged, separable, evals = _recursive_grouping(objective, probe, None)
    groups = [np.array(g, dtype=int) for g in merged]
    groups.extend(np.array([v], dtype=int) for v in separable)
    return GroupingResult(groups, np.array(separable, dtype=int), evals)


def _pack(indices: list[int], pack_size: int) -> list[np.ndarray]:
    return [
        np.array(indices[k : k + pack_size], dtype=int)
        for k in range(0, len(indices), pack_size)
    ]


def rdg3_group(
    objective: TrackedObjective,
    probe: InteractionProbe | None = None,
    size_cap: int = 50,
    separable_pack: int = 100,
) -> GroupingResult:
    """Recursive differential grouping with capped groups and packed separables.

    A growing merged group is cut and emitted as soon as it exceeds
    ``size_cap``, deliberately breaking long interaction chains so that
    downstream subsolvers face bounded subproblem sizes.  Separable
    variables are packed, in index order, into groups of ``separable_pack``.
    With ``size_cap >= dimension`` the merged groups coincide with plain
    recursive grouping.
    """
    if size_cap < 1 or separable_pack < 1:
        raise ValueError("size_cap and separable_pack must be positive")
    probe = probe or InteractionProbe()
    merged, separable, evals = _recursive_grouping(objective, probe, size_cap)
    groups = [np.array(g, dtype=int) for g in merged]
    groups.extend(_pack(separable, separable_pack))
    return GroupingResult(groups, np.array(separable, dtype=int), evals)


def similarity_matrix(
    objective: TrackedObjective,
    probe: InteractionProbe | None = None,
    sample_fraction: float | None = None,
    rng: np.random.Generator | None = None,
    probe_budget_fraction: float = 0.8,
    min_partners: int = 3,
) -> np.ndarray:
    """Symmetric matrix of pairwise interaction strengths.

    All pairs are probed up to moderate dimension; beyond 400 variables a
    random quarter of the pairs is sampled (with at least ``min_partners``
    sampled partners per variable) and the matrix is symmetrized.  The
    total probing cost is additionally capped at ``probe_budget_fraction``
    of the overall evaluation budget so a solver phase can still follow.
    Entries at or below the detection threshold are zeroed.
    """
    probe = probe or InteractionProbe()
    rng = rng if rng is not None else np.random.default_rng(0)
    dim = objective.dimension
    base, delta = probe.resolve(objective)

    f_base = objective.probe(base)
    singles = base[None, :] + delta * np.eye(dim)
    f_single = objective.probe_batch(singles)

    if sample_fraction is None:
        sample_fraction = 1.0 if dim <= 400 else 0.25
    all_pairs = dim * (dim - 1) // 2
    cap = int(probe_budget_fraction * objective.budget.max_evals) - (dim + 1)
    target = min(int(round(sample_fraction * all_pairs)), max(cap, 0), objective.remaining)

    if target >= all_pairs:
        pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim)]
    else:
        chosen: set[tuple[int, int]] = set()
        # Connectivity floor: a few random partners for every variable.
        if target >= min_partners * dim // 2:
            for i in range(dim):
                partners = rng.choice(dim - 1, size=min(min_partners, dim - 1), replace=False)
                for p in partners:
                    j = int(p) + (int(p) >= i)
                    chosen.add((min(i, j), max(i, j)))
        flat = rng.permutation(all_pairs)
        rows = (np.floor((2 * dim - 1 - np.sqrt((2 * dim - 1) ** 2 - 8 * flat)) / 2)).astype(int)
        offs = flat - rows * (2 * dim - rows - 1) // 2
        cols = rows + 1 + offs
        for r, c in zip(rows, cols):
            if len(chosen) >= target:
                break
            r, c = int(r), int(c)
            if 0 <= r < c < dim:
                chosen.add((r, c))
        pairs = sorted(chosen)[:target]

    weights = np.zeros((dim, dim))
    block = 4096
    for start in range(0, len(pairs), block):
        chunk = pairs[start : start + block]
        points = np.repeat(base[None, :], len(chunk), axis=0)
        for k, (i, j) in enumerate(chunk):
            points[k, i] += delta
            points[k, j] += delta
        f_pair = objective.probe_batch(points)
        for k, (i, j) in enumerate(chunk):
            lam = abs((f_single[i] - f_base) - (f_pair[k] - f_single[j]))
            threshold = (
                probe.threshold
                if probe.threshold is not None
                else _adaptive_threshold(
                    (f_base, f_single[i], f_single[j], f_pair[k]), dim
                )
            )
            if lam > threshold:
                weights[i, j] = weights[j, i] = lam
    return weights


def dgsc_group(
    objective: TrackedObjective,
    probe: InteractionProbe | None = None,
    k_groups: int | None = None,
    separable_pack: int = 100,
    rng: np.random.Generator | None = None,
) -> GroupingResult:
    """Decomposition by spectral clustering of the interaction-strength graph.

    Variables with no detected interaction are treated as separable and
    packed in index order; the connected remainder is embedded with the
    normalized graph Laplacian and split into ``k_groups`` clusters by
    k-means on the leading eigenvectors.  An entirely empty graph falls
    back to packing every variable.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    used_before = objective.budget.used
    dim = objective.dimension
    k = k_groups if k_groups is not None else math.ceil(dim / 100)
    if k < 1:
        raise ValueError("k_groups must be positive")

    weights = similarity_matrix(objective, probe, rng=rng)
    degree = weights.sum(axis=1)
    isolated = np.flatnonzero(degree == 0.0)
    connected = np.flatnonzero(degree > 0.0)
    evals = objective.budget.used - used_before

    groups: list[np.ndarray] = []
    if connected.size:
        sub = weights[np.ix_(connected, connected)]
        inv_sqrt = 1.0 / np.sqrt(sub.sum(axis=1))
        laplacian = np.eye(len(connected)) - inv_sqrt[:, None] * sub * inv_sqrt[None, :]
        k_eff = min(k, len(connected))
        _, vectors = eigh(laplacian, subset_by_index=(0, k_eff - 1))
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        embedding = vectors / norms
        if k_eff == 1:
            labels = np.zeros(len(connected), dtype=int)
        else:
            _, labels = kmeans2(embedding, k_eff, minit="++", seed=rng)
        for label in np.unique(labels):
            members = connected[labels == label]
            if members.size:
                groups.append(np.sort(members))
    groups.extend(_pack(isolated.tolist(), separable_pack))
    return GroupingResult(groups, isolated, evals)
