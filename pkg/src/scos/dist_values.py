"""Categorical value distributions with Dirichlet counts.

Each tracked state carries a strictly increasing cost support and Dirichlet
parameters over it.  Bellman backups shift the successor distribution by the
observed adjusted cost and split each shifted atom's probability between its
bracketing support points; completed trajectories then refine the support at
the observed cumulative cost, replacing unobserved neighbors, incrementing
exact matches, or inserting a fresh atom.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

Vertex = tuple[int, int]

ATOM_TOL = 1e-9


@dataclass
class ValueDistribution:
    support: np.ndarray     # strictly increasing costs
    alpha: np.ndarray       # Dirichlet parameters, all > 0
    observed: np.ndarray    # bool per atom: backed by a realized return
    spacing: float

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.observed = np.asarray(self.observed, dtype=bool)
        if np.any(np.diff(self.support) <= 0):
            raise ValueError("support must be strictly increasing")
        if np.any(self.alpha <= 0):
            raise ValueError("Dirichlet parameters must be positive")

    def probs(self) -> np.ndarray:
        return self.alpha / self.alpha.sum()

    def mean(self) -> float:
        return float(self.probs() @ self.support)

    def sample_mean(self, rng: np.random.Generator) -> float:
        p = rng.dirichlet(self.alpha)
        return float(p @ self.support)

    def copy(self) -> "ValueDistribution":
        return ValueDistribution(self.support.copy(), self.alpha.copy(),
                                 self.observed.copy(), self.spacing)


def init_distribution(lower: float, upper: float, spacing: float) -> ValueDistribution:
    """Uniform Dirichlet over an equally spaced grid spanning [lower, upper]."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if upper < lower:
        raise ValueError("upper bound below lower bound")
    n = int(math.floor((upper - lower) / spacing + 1e-9)) + 1
    support = lower + spacing * np.arange(n)
    if support[-1] < upper - 1e-9:
        support = np.append(support, upper)
    return ValueDistribution(support, np.ones(len(support)),
                             np.zeros(len(support), dtype=bool), spacing)


def bellman_project(dist: ValueDistribution, next_dist: ValueDistribution,
                    shift: float) -> ValueDistribution:
    """Fold the shifted successor distribution into `dist` in place.

    Each successor atom x' with probability p' lands at x' + shift and splits
    p' linearly between the bracketing atoms of `dist`; values beyond the
    support clamp to the boundary atom.  Exactly one unit of Dirichlet mass
    is added per projection.
    """
    x = dist.support
    p_next = next_dist.probs()
    shifted = next_dist.support + shift
    for value, mass in zip(shifted, p_next):
        if value <= x[0]:
            dist.alpha[0] += mass
        elif value >= x[-1]:
            dist.alpha[-1] += mass
        else:
            j = int(np.searchsorted(x, value, side="right")) - 1
            w = (x[j + 1] - value) / (x[j + 1] - x[j])
            dist.alpha[j] += w * mass
            dist.alpha[j + 1] += (1.0 - w) * mass
    return dist


def refine_support(dist: ValueDistribution, value: float) -> ValueDistribution:
    """Support refinement at an observed cumulative cost.

    Exact match: increment that atom's count.  Both bracketing atoms within
    the spacing and unobserved: replace the pair with the observed value,
    merging counts plus one.  Otherwise: insert a new observed atom with unit
    count.  Returns a new distribution.
    """
    x, a, obs = dist.support, dist.alpha, dist.observed
    hit = np.nonzero(np.abs(x - value) <= ATOM_TOL)[0]
    if len(hit):
        out = dist.copy()
        out.alpha[hit[0]] += 1.0
        out.observed[hit[0]] = True
        return out
    j = int(np.searchsorted(x, value))
    left, right = j - 1, j
    if (0 <= left and right < len(x)
            and value - x[left] <= dist.spacing + ATOM_TOL
            and x[right] - value <= dist.spacing + ATOM_TOL
            and not obs[left] and not obs[right]):
        support = np.concatenate([x[:left], [value], x[right + 1:]])
        alpha = np.concatenate([a[:left], [a[left] + a[right] + 1.0], a[right + 1:]])
        observed = np.concatenate([obs[:left], [True], obs[right + 1:]])
        return ValueDistribution(support, alpha, observed, dist.spacing)
    support = np.insert(x, j, value)
    alpha = np.insert(a, j, 1.0)
    observed = np.insert(obs, j, True)
    return ValueDistribution(support, alpha, observed, dist.spacing)


GOAL_DIST = ValueDistribution(np.array([0.0]), np.array([1.0]),
                              np.array([True]), 1.0)


class DistributionTable:
    """Vertex-keyed value distributions, created on first touch from
    per-vertex cost bounds."""

    def __init__(self, goal: Vertex, bounds_fn, spacing: float):
        self.goal = goal
        self.bounds_fn = bounds_fn
        self.spacing = spacing
        self.dists: dict[Vertex, ValueDistribution] = {}

    def ensure(self, vertex: Vertex) -> ValueDistribution:
        if vertex == self.goal:
            return GOAL_DIST
        d = self.dists.get(vertex)
        if d is None:
            lo, hi = self.bounds_fn(vertex)
            d = init_distribution(lo, hi, self.spacing)
            self.dists[vertex] = d
        return d

    def value(self, vertex: Vertex) -> float:
        if vertex == self.goal:
            return 0.0
        return self.ensure(vertex).mean()

    def refine(self, vertex: Vertex, value: float) -> None:
        if vertex == self.goal:
            return
        self.dists[vertex] = refine_support(self.ensure(vertex), value)

    def copy(self) -> "DistributionTable":
        t = DistributionTable(self.goal, self.bounds_fn, self.spacing)
        t.dists = {v: d.copy() for v, d in self.dists.items()}
        return t

    def to_json(self) -> dict:
        return {
            "kind": "distribution",
            "goal": list(self.goal),
            "spacing": self.spacing,
            "entries": [
                {"vertex": list(v),
                 "support": [float(x) for x in d.support],
                 "alpha": [float(x) for x in d.alpha],
                 "observed": [bool(b) for b in d.observed]}
                for v, d in sorted(self.dists.items())
            ],
        }


def save_distributions(path, table: DistributionTable, meta: dict) -> None:
    payload = {"meta": meta, "model": table.to_json()}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
