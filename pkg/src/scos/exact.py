"""Exact small-instance solvers used to audit the planner and learners.

The latent-Gaussian status model is collapsed to an explicit joint pmf over
the 2^m ambiguous status vectors by Gauss-Hermite quadrature; belief-tree
expectimax then solves the macro-decision problem exactly by enumerating
disambiguation outcomes, with memoization on (vertex, revealed statuses).
Only small ambiguous sets (m <= 8) are supported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .belief import to_probabilities
from .decisions import SimPartition, identify_decisions
from .world import LatticeWorld, Obstacle

UNKNOWN = -1


def joint_status_pmf(mu: np.ndarray, cov: np.ndarray, n_nodes: int = 6) -> np.ndarray:
    """P(z) for every status vector, z encoded as a bit index (bit i = id i).

    Integrates independent Bernoulli(logistic(y)) over y ~ N(mu, cov) with a
    tensor-product Gauss-Hermite rule.
    """
    m = len(mu)
    if m == 0:
        return np.ones(1)
    if m > 8:
        raise ValueError("joint pmf limited to 8 ambiguous obstacles")
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    grids = np.meshgrid(*([x] * m), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)          # (n^m, m)
    wgrids = np.meshgrid(*([w] * m), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    weights /= math.pi ** (m / 2.0)
    chol = np.linalg.cholesky(cov + 1e-10 * np.eye(m))
    y = mu + math.sqrt(2.0) * nodes @ chol.T
    p = to_probabilities(y)                                        # (n^m, m)
    pmf = np.empty(1 << m)
    for s in range(1 << m):
        prob = np.ones(len(p))
        for i in range(m):
            prob = prob * (p[:, i] if s >> i & 1 else 1.0 - p[:, i])
        pmf[s] = float(weights @ prob)
    pmf = np.maximum(pmf, 0.0)
    pmf /= pmf.sum()
    return pmf


@dataclass
class StatusDistribution:
    """Joint pmf over the statuses of a fixed list of ambiguous obstacles."""

    ids: tuple[int, ...]
    pmf: np.ndarray

    @classmethod
    def from_gaussian(cls, ids, mu, cov, n_nodes: int = 6) -> "StatusDistribution":
        return cls(tuple(int(i) for i in ids), joint_status_pmf(mu, cov, n_nodes))

    def conditional(self, assign: tuple, k: int) -> float:
        """P(z_k = 1 | assigned components), assign entries in {-1, 0, 1}."""
        m = len(self.ids)
        num = den = 0.0
        for s in range(1 << m):
            ok = True
            for i, a in enumerate(assign):
                if a != UNKNOWN and (s >> i & 1) != a:
                    ok = False
                    break
            if not ok:
                continue
            den += self.pmf[s]
            if s >> k & 1:
                num += self.pmf[s]
        if den <= 0.0:
            return 0.5
        return num / den

    def marginalize(self, keep) -> "StatusDistribution":
        """Sum out the dropped obstacles (exact marginal of the same pmf)."""
        keep = [self.ids.index(o) for o in keep]
        m = len(self.ids)
        out = np.zeros(1 << len(keep))
        for s in range(1 << m):
            t = 0
            for j, i in enumerate(keep):
                if s >> i & 1:
                    t |= 1 << j
            out[t] += self.pmf[s]
        return StatusDistribution(tuple(self.ids[i] for i in keep), out)


class ExactSolver:
    """Belief-tree expectimax over macro decisions of one instance.

    `bonus_fn(vertex, candidate)` shapes immediate costs (cost - bonus); the
    base problem passes None.  Values are exact expectations over the joint
    status pmf with deterministic candidate tie-breaks.
    """

    def __init__(self, world: LatticeWorld, sdist: StatusDistribution,
                 base_true_mask: int = 0, bonus_fn=None,
                 excluded: frozenset[int] = frozenset()):
        self.world = world
        self.sdist = sdist
        self.base_true_mask = base_true_mask
        self.bonus_fn = bonus_fn
        # Obstacles the policy may never disambiguate; their disks still
        # block while ambiguous.
        self.excluded = frozenset(excluded)
        self.pos = {o: k for k, o in enumerate(sdist.ids)}
        self._memo: dict = {}

    def _masks(self, assign: tuple) -> SimPartition:
        true_mask = self.base_true_mask
        amb = 0
        for k, o in enumerate(self.sdist.ids):
            if assign[k] == UNKNOWN:
                amb |= 1 << o
            elif assign[k] == 1:
                true_mask |= 1 << o
        return SimPartition(true_mask, amb)

    def value(self, vertex, assign: tuple | None = None) -> float:
        if assign is None:
            assign = tuple([UNKNOWN] * len(self.sdist.ids))
        v_idx = self.world.to_index(vertex)
        key = (v_idx, assign)
        if key in self._memo:
            return self._memo[key]
        if vertex == self.world.goal:
            self._memo[key] = 0.0
            return 0.0
        part = self._masks(assign)
        dset = identify_decisions(self.world, part, vertex)
        best = math.inf
        for cand in dset.candidates:
            if cand.obstacle_id in self.excluded:
                continue
            q = self._q(vertex, assign, cand)
            if q < best - 1e-12:
                best = q
        self._memo[key] = best
        return best

    def _q(self, vertex, assign, cand) -> float:
        imm = cand.immediate_cost
        if self.bonus_fn is not None:
            imm -= self.bonus_fn(vertex, cand)
        if cand.is_goal:
            return imm
        k = self.pos[cand.obstacle_id]
        p1 = self.sdist.conditional(assign, k)
        a1 = assign[:k] + (1,) + assign[k + 1:]
        a0 = assign[:k] + (0,) + assign[k + 1:]
        return imm + p1 * self.value(cand.stopping_vertex, a1) \
            + (1.0 - p1) * self.value(cand.stopping_vertex, a0)

    def greedy_candidate(self, vertex, assign: tuple):
        """The candidate an optimal policy takes (lowest index on ties)."""
        part = self._masks(assign)
        dset = identify_decisions(self.world, part, vertex)
        best, best_q = None, math.inf
        for cand in dset.candidates:
            q = self._q(vertex, assign, cand)
            if q < best_q - 1e-12:
                best, best_q = cand, q
        return best

    def expected_bonus_along_policy(self, vertex, bonus_fn,
                                    assign: tuple | None = None) -> float:
        """E[sum of bonuses collected by this solver's optimal policy]."""
        if assign is None:
            assign = tuple([UNKNOWN] * len(self.sdist.ids))
        if vertex == self.world.goal:
            return 0.0
        cand = self.greedy_candidate(vertex, assign)
        g = bonus_fn(vertex, cand)
        if cand.is_goal:
            return g
        k = self.pos[cand.obstacle_id]
        p1 = self.sdist.conditional(assign, k)
        a1 = assign[:k] + (1,) + assign[k + 1:]
        a0 = assign[:k] + (0,) + assign[k + 1:]
        return g + p1 * self.expected_bonus_along_policy(cand.stopping_vertex, bonus_fn, a1) \
            + (1.0 - p1) * self.expected_bonus_along_policy(cand.stopping_vertex, bonus_fn, a0)


def remove_obstacles(world: LatticeWorld, sdist: StatusDistribution,
                     drop: set[int]) -> tuple[LatticeWorld, StatusDistribution, dict]:
    """Rebuild the instance without the dropped obstacles.

    Returns (world, marginalized status distribution, old id -> new id map).
    """
    keep = [o for o in range(world.n_obstacles) if o not in drop]
    remap = {o: i for i, o in enumerate(keep)}
    obstacles = [Obstacle(remap[o.id], o.center, o.radius, o.disambiguation_cost)
                 for o in world.obstacles if o.id not in drop]
    world2 = LatticeWorld(world.width, world.height, obstacles,
                          world.start, world.goal)
    kept_amb = [o for o in sdist.ids if o not in drop]
    sdist2 = sdist.marginalize(kept_amb)
    sdist2 = StatusDistribution(tuple(remap[o] for o in sdist2.ids), sdist2.pmf)
    return world2, sdist2, remap
