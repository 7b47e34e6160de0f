"""Offline base-policy learning: optimistic policy iteration over sampled
worlds, with an information bonus shaping the simulated costs.

Each iteration samples one environment from the current posterior, simulates
one trajectory from a random decision-set state under the current policy,
and updates the value model from the realized adjusted returns.  Training
stops once the value estimates of the initial decision-set states move less
than the convergence threshold, or flags non-convergence at the iteration
cap.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefState, effective_observations, posterior
from .decisions import NoCandidatesError, SimPartition, identify_decisions
from .dist_values import DistributionTable, bellman_project
from .information import InfoLedger, in_range_ambiguous, mutual_information
from .mc_values import OpiConfig, ValueTable, improve_policy, mc_update
from .sensor import SensorModel
from .world import LatticeWorld

Vertex = tuple[int, int]


@dataclass
class TrainLog:
    iterations: int = 0
    converged: bool = False
    truncations: int = 0
    final_change: float = math.inf
    wall_seconds: float = 0.0
    change_history: list = field(default_factory=list)


class TrainContext:
    """Mask-keyed caches for simulated beliefs.

    During offline training the real belief is frozen, so the posterior after
    any sequence of simulated disambiguations is a pure function of the
    revealed masks; both the posterior and per-vertex in-range mutual
    information memoize on them.
    """

    def __init__(self, world: LatticeWorld, belief: BeliefState, sensor: SensorModel,
                 coarsen: bool = False):
        self.world = world
        self.belief = belief
        self.sensor = sensor
        self.coarsen = coarsen
        self._post: dict = {}
        self._mi: dict = {}

    def _posterior_cov(self, part: SimPartition) -> np.ndarray:
        key = (part.true_mask, part.amb_mask)
        cov = self._post.get(key)
        if cov is None:
            b = self.belief
            sign = b.disamb_sign.copy()
            newly = (b.amb_mask & ~part.amb_mask)
            m = newly
            while m:
                o = (m & -m).bit_length() - 1
                sign[o] = 1 if part.true_mask >> o & 1 else -1
                m &= m - 1
            y, noise = effective_observations(b.llr_sum, b.llr_count,
                                              b.reading_var, sign)
            _, cov = posterior(b.K, y, noise)
            if len(self._post) > 4096:
                self._post.clear()
            self._post[key] = cov
        return cov

    def candidate_mi(self, part: SimPartition, vertex: Vertex) -> float:
        key = (part.true_mask, part.amb_mask, vertex)
        out = self._mi.get(key)
        if out is None:
            amb_ids = [o for o in range(self.world.n_obstacles) if part.amb_mask >> o & 1]
            ids = in_range_ambiguous(self.world, amb_ids, vertex, self.sensor.range)
            if len(ids) == 0:
                out = 0.0
            else:
                cov = self._posterior_cov(part)[np.ix_(ids, ids)]
                if self.coarsen:
                    cov = np.diag(np.diag(cov))
                out = mutual_information(cov, self.sensor.noise_variance)
            if len(self._mi) > 65536:
                self._mi.clear()
            self._mi[key] = out
        return out


def score_candidates(ctx: TrainContext, part: SimPartition, dset, values,
                     ledger: InfoLedger):
    """Adjusted candidate scores and the per-candidate bonus/information.

    Returns (q_adj, bonuses, gains): q = immediate - G + V(successor) with
    gamma set from the spread of the successor value estimates, capped by the
    exploitation cost.
    """
    gamma_max = dset.exploit_cost if math.isfinite(dset.exploit_cost) else math.inf
    # Spread of the decision-value estimates C(s,d) + V(s') sets the bonus scale.
    gamma = ledger.gamma_from_values(
        [c.immediate_cost + v for c, v in zip(dset.candidates, values)], gamma_max)
    q_adj, bonuses, gains = [], [], []
    for cand, val in zip(dset.candidates, values):
        # The goal decision ends the traversal; nothing is sensed there.
        mi = 0.0 if cand.is_goal else ctx.candidate_mi(part, cand.stopping_vertex)
        g = ledger.bonus(mi, gamma)
        q_adj.append(cand.immediate_cost - g + val)
        bonuses.append(g)
        gains.append(mi)
    return q_adj, bonuses, gains


class _PointLearner:
    """Monte Carlo point-estimate learner with configurable exploration."""

    def __init__(self, table: ValueTable, cfg: OpiConfig):
        self.table = table
        self.cfg = cfg

    def value(self, vertex: Vertex) -> float:
        return self.table.value(vertex)

    def choose(self, dset, adj_costs, rng, step):
        q = [c + (0.0 if cand.is_goal else self.value(cand.stopping_vertex))
             for cand, c in zip(dset.candidates, adj_costs)]
        return improve_policy(q, self.cfg.exploration, rng, step, self.cfg)

    def observe_transition(self, vertex, cand, adjusted_cost, next_vertex):
        pass

    def finish_trajectory(self, visited: list[tuple[Vertex, float]]):
        mc_update(self.table, visited)


class _DistLearner:
    """Distributional learner: Bellman projection per step, support
    refinement per trajectory, Thompson sampling for improvement."""

    def __init__(self, table: DistributionTable):
        self.table = table

    def value(self, vertex: Vertex) -> float:
        return self.table.value(vertex)

    def choose(self, dset, adj_costs, rng, step):
        best, best_q = 0, math.inf
        for i, (cand, c) in enumerate(zip(dset.candidates, adj_costs)):
            if cand.is_goal:
                q = c
            else:
                q = c + self.table.ensure(cand.stopping_vertex).sample_mean(rng)
            if q < best_q - 1e-12:
                best, best_q = i, q
        return best

    def observe_transition(self, vertex, cand, adjusted_cost, next_vertex):
        dist = self.table.ensure(vertex)
        nxt = self.table.ensure(next_vertex)
        bellman_project(dist, nxt, adjusted_cost)

    def finish_trajectory(self, visited: list[tuple[Vertex, float]]):
        seen = set()
        for vertex, cum in visited:
            if vertex in seen or vertex == self.table.goal:
                continue
            seen.add(vertex)
            self.table.refine(vertex, cum)


def _start_pool(world: LatticeWorld, dset0) -> list[Vertex]:
    pool = [world.start]
    for cand in dset0.candidates:
        v = cand.stopping_vertex
        if v != world.goal and v not in pool:
            pool.append(v)
    return pool


def run_trajectory(world: LatticeWorld, ctx: TrainContext, learner, part: SimPartition,
                   sampled: np.ndarray, start: Vertex, cfg: OpiConfig,
                   rng: np.random.Generator):
    """One simulated traversal in a sampled world; returns (visited states
    with cumulative adjusted returns, reached flag)."""
    ledger = InfoLedger(gamma_scale=cfg.gamma_scale)
    cap = cfg.step_cap_factor * (world.width + world.height)
    v = start
    steps = []
    reached = False
    for _ in range(cap):
        if v == world.goal:
            reached = True
            break
        try:
            dset = identify_decisions(world, part, v)
        except NoCandidatesError:
            break
        values = [0.0 if c.is_goal else learner.value(c.stopping_vertex)
                  for c in dset.candidates]
        adj, bonuses, gains = score_candidates(ctx, part, dset, values, ledger)
        idx = learner.choose(dset, adj, rng, len(steps))
        cand = dset.candidates[idx]
        ledger.record(gains[idx])
        next_vertex = world.goal if cand.is_goal else cand.stopping_vertex
        learner.observe_transition(v, cand, adj[idx], next_vertex)
        steps.append((v, adj[idx]))
        if cand.is_goal:
            v = world.goal
            reached = True
            break
        part = part.reveal(cand.obstacle_id, int(sampled[cand.obstacle_id]))
        v = cand.stopping_vertex
    if not reached:
        return None, False
    total = 0.0
    visited = []
    for vertex, cost in reversed(steps):
        total += cost
        visited.append((vertex, total))
    visited.reverse()
    return visited, True


def _run_opi(world: LatticeWorld, belief: BeliefState, sensor: SensorModel,
             cfg: OpiConfig, rng: np.random.Generator, learner,
             coarsen: bool) -> TrainLog:
    t0 = time.perf_counter()
    ctx = TrainContext(world, belief, sensor, coarsen=coarsen)
    part0 = SimPartition(belief.true_mask, belief.amb_mask)
    dset0 = identify_decisions(world, part0, world.start)
    pool = _start_pool(world, dset0)
    conv_states = [world.start] + [c.stopping_vertex for c in dset0.candidates
                                   if c.stopping_vertex != world.goal]
    conv_states = list(dict.fromkeys(conv_states))

    log = TrainLog()
    for i in range(1, cfg.max_iterations + 1):
        log.iterations = i
        sampled = belief.sample_environment(rng, independent=coarsen)
        start = pool[int(rng.integers(len(pool)))]
        before = {s: learner.value(s) for s in conv_states}
        visited, reached = run_trajectory(world, ctx, learner, part0, sampled,
                                          start, cfg, rng)
        if not reached:
            log.truncations += 1
            continue
        learner.finish_trajectory(visited)
        change = max(abs(learner.value(s) - before[s]) for s in conv_states)
        log.change_history.append(change)
        log.final_change = change
        if i >= cfg.min_iterations and change < cfg.eta:
            log.converged = True
            break
    log.wall_seconds = time.perf_counter() - t0
    return log


def _optimistic_distance_fn(world: LatticeWorld, belief: BeliefState):
    f = world.field(belief.true_mask, 0, world.to_index(world.goal))
    diameter = 2.0 * (world.width + world.height)

    def fn(vertex: Vertex) -> float:
        d = float(f.dist[world.to_index(vertex)])
        return d if math.isfinite(d) else diameter

    return fn


def _support_bounds_fn(world: LatticeWorld, belief: BeliefState, sensor: SensorModel):
    """Distribution support bounds: optimistic cost up to exploitation cost
    plus in-range disambiguation charges."""
    opt = world.field(belief.true_mask, 0, world.to_index(world.goal))
    exploit = world.field(belief.true_mask | belief.amb_mask, 0,
                          world.to_index(world.goal))
    amb_ids = [int(i) for i in belief.ambiguous_ids]
    total_c = sum(world.obstacles[o].disambiguation_cost for o in amb_ids)
    diameter = 2.0 * (world.width + world.height)

    def fn(vertex: Vertex):
        idx = world.to_index(vertex)
        lo = float(opt.dist[idx])
        if not math.isfinite(lo):
            lo = diameter
        hi = float(exploit.dist[idx])
        if math.isfinite(hi):
            hi += sum(world.obstacles[o].disambiguation_cost for o in
                      in_range_ambiguous(world, amb_ids, vertex, sensor.range))
        else:
            hi = lo + total_c + diameter
        return lo, max(hi, lo)

    return fn


def opi_train(world: LatticeWorld, belief: BeliefState, sensor: SensorModel,
              cfg: OpiConfig, rng: np.random.Generator,
              coarsen: bool = False) -> tuple[ValueTable, TrainLog]:
    """Monte Carlo base-policy training (exploration per cfg.exploration)."""
    table = ValueTable(world.goal, _optimistic_distance_fn(world, belief))
    learner = _PointLearner(table, cfg)
    log = _run_opi(world, belief, sensor, cfg, rng, learner, coarsen)
    return table, log


def drl_train(world: LatticeWorld, belief: BeliefState, sensor: SensorModel,
              cfg: OpiConfig, rng: np.random.Generator,
              coarsen: bool = False) -> tuple[DistributionTable, TrainLog]:
    """Distributional base-policy training with Thompson-sampling exploration."""
    table = DistributionTable(world.goal, _support_bounds_fn(world, belief, sensor),
                              cfg.support_spacing)
    learner = _DistLearner(table)
    log = _run_opi(world, belief, sensor, cfg, rng, learner, coarsen)
    return table, log
