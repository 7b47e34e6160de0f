"""Comparison policies: penalty-based replanning and heuristic rollouts.

Penalty policies plan against a deterministic surrogate cost: path length
plus a per-obstacle risk penalty charged once at the first disk-entering
edge, replanned after every disambiguation.  The rollout baselines reuse the
posterior-sampling decision rule but replace learned base values with either
perfect-information shortest paths (hindsight) or optimistic charged paths
(optimistic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .belief import BeliefState
from .decisions import (Candidate, DecisionSet, SimPartition, _edge_between,
                        _first_ambiguous_contact)
from .world import DistanceField, LatticeWorld, UnreachableError

Vertex = tuple[int, int]

RHO_CLAMP = 1.0 - 1e-12


def penalty_weight(variant: str, disamb_cost: float, rho: float,
                   dist_to_goal: float) -> float:
    """Per-obstacle surcharge for the penalized surrogate cost.

    "rd": c / (1 - rho).  "dt": c + (d(x,g) / (1 - rho)) ** (-log(1 - rho)),
    natural log.  rho is clamped just below one; overflow saturates to inf.
    """
    rho = min(max(rho, 0.0), RHO_CLAMP)
    if variant == "rd":
        return disamb_cost / (1.0 - rho)
    if variant == "dt":
        base = dist_to_goal / (1.0 - rho)
        expo = -math.log1p(-rho)
        try:
            return disamb_cost + base**expo
        except OverflowError:
            return math.inf
    raise ValueError(f"unknown penalty variant {variant!r}")


def penalty_path_cost(world: LatticeWorld, variant: str, path: list[Vertex],
                      belief: BeliefState) -> float:
    """Surrogate cost of a concrete path: length plus one penalty for every
    ambiguous disk it intersects."""
    idx_path = [world.to_index(v) for v in path]
    length = world.path_length(idx_path)
    hit: set[int] = set()
    for a, b in zip(idx_path, idx_path[1:]):
        e = _edge_between(world, a, b)
        for o in world.edge_hit_ids[e]:
            if belief.status[int(o)] == -1:
                hit.add(int(o))
    gx, gy = world.goal
    total = length
    for o in sorted(hit):
        obs = world.obstacles[o]
        d_goal = math.hypot(obs.center[0] - gx, obs.center[1] - gy)
        total += penalty_weight(variant, obs.disambiguation_cost,
                                float(belief.rho[o]), d_goal)
    return total


def _penalized_field(world: LatticeWorld, belief: BeliefState,
                     variant: str) -> DistanceField:
    """Cost-to-goal field where ambiguous disks are traversable but charge
    their penalty on entering edges; known-true disks block."""
    blocked = world._blocked_edges(belief.true_mask)
    gx, gy = world.goal
    fwd = np.zeros(world.n_edges)
    bwd = np.zeros(world.n_edges)
    for o in belief.ambiguous_ids:
        o = int(o)
        obs = world.obstacles[o]
        d_goal = math.hypot(obs.center[0] - gx, obs.center[1] - gy)
        pen = penalty_weight(variant, obs.disambiguation_cost,
                             float(belief.rho[o]), d_goal)
        pen = min(pen, 1e12)
        hit = world.edge_hit[:, o]
        fwd += pen * (hit & ~world.vertex_inside[world.edge_a, o])
        bwd += pen * (hit & ~world.vertex_inside[world.edge_b, o])
    keep = ~blocked
    ea, eb = world.edge_a[keep], world.edge_b[keep]
    w_fwd = world.edge_len[keep] + fwd[keep]
    w_bwd = world.edge_len[keep] + bwd[keep]
    rows = np.concatenate([eb, ea])
    cols = np.concatenate([ea, eb])
    data = np.concatenate([w_fwd, w_bwd])
    g = csr_matrix((data, (rows, cols)),
                   shape=(world.n_vertices, world.n_vertices))
    dist = dijkstra(g, indices=world.to_index(world.goal), directed=True)
    return DistanceField(dist=dist, target=world.to_index(world.goal),
                         blocked_edges=blocked, charge_fwd=fwd, charge_bwd=bwd)


def penalty_policy_step(world: LatticeWorld, belief: BeliefState, v_t: Vertex,
                        variant: str) -> Candidate:
    """Walk the penalized-optimal path to its first ambiguous obstacle (to
    disambiguate there) or all the way to the goal."""
    f = _penalized_field(world, belief, variant)
    src = world.to_index(v_t)
    if not math.isfinite(f.dist[src]):
        raise UnreachableError(f"goal unreachable from {v_t} under known obstacles")
    path = world.walk(f, src)
    contact = _first_ambiguous_contact(world, path, belief.amb_mask)
    if contact is None:
        seg = tuple(world.to_vertex(v) for v in path)
        cost = world.path_length(path)
        return Candidate(world.goal, None, seg, cost, cost, cost)
    k, obstacle_id = contact
    prefix = path[:k + 1]
    seg = tuple(world.to_vertex(v) for v in prefix)
    seg_len = world.path_length(prefix)
    c_x = world.obstacles[obstacle_id].disambiguation_cost
    return Candidate(seg[-1], obstacle_id, seg, seg_len,
                     seg_len + c_x, seg_len + c_x)


def hindsight_value(world: LatticeWorld, part: SimPartition,
                    sampled: np.ndarray, vertex: Vertex) -> float:
    """Perfect-information shortest path in the sampled world."""
    blocked = part.true_mask
    m = part.amb_mask
    while m:
        o = (m & -m).bit_length() - 1
        if sampled[o]:
            blocked |= 1 << o
        m &= m - 1
    f = world.field(blocked, 0, world.to_index(world.goal))
    d = float(f.dist[world.to_index(vertex)])
    return d if math.isfinite(d) else 4.0 * (world.width + world.height)


def optimistic_value(world: LatticeWorld, part: SimPartition, sampled: np.ndarray,
                     vertex: Vertex) -> float:
    """Simulated cost of the optimistic-replanning base policy in a sampled
    world: plan as if every ambiguous disk were traversable at its
    disambiguation charge, walk to the first contact, pay and reveal there,
    replan; repeat until the goal."""
    diameter = 4.0 * (world.width + world.height)
    v = world.to_index(vertex)
    goal = world.to_index(world.goal)
    total = 0.0
    for _ in range(world.n_obstacles + 1):
        if v == goal:
            return total
        f = world.field(part.true_mask, part.amb_mask, goal)
        if not math.isfinite(f.dist[v]):
            return total + diameter
        path = world.walk(f, v)
        contact = _first_ambiguous_contact(world, path, part.amb_mask)
        if contact is None:
            return total + world.path_length(path)
        k, obstacle_id = contact
        total += world.path_length(path[:k + 1])
        total += world.obstacles[obstacle_id].disambiguation_cost
        part = part.reveal(obstacle_id, int(sampled[obstacle_id]))
        v = path[k]
    return total + diameter


def heuristic_rollout_step(world: LatticeWorld, belief: BeliefState, v_t: Vertex,
                           dset: DecisionSet, kind: str, m_roll: int,
                           rng: np.random.Generator):
    """Shared decision rule for the hindsight and optimistic baselines."""
    cands = dset.candidates
    if len(cands) == 1:
        return 0, [0.0]
    part0 = SimPartition(belief.true_mask, belief.amb_mask)
    if dset.discarded:
        part0 = part0.drop_ambiguous(dset.discarded)
    n = max(m_roll, 1)
    samples = [belief.sample_environment(rng) for _ in range(n)]
    estimates = []
    for cand in cands:
        if cand.is_goal:
            estimates.append(0.0)
            continue
        acc = 0.0
        for z in samples:
            part = part0.reveal(cand.obstacle_id, int(z[cand.obstacle_id]))
            if kind == "hindsight":
                acc += hindsight_value(world, part, z, cand.stopping_vertex)
            else:
                acc += optimistic_value(world, part, z, cand.stopping_vertex)
        estimates.append(acc / n)
    scores = [c.immediate_cost + e for c, e in zip(cands, estimates)]
    best = min(range(len(cands)), key=lambda i: (scores[i], i))
    return best, estimates


def hindsight_rollout_step(world, belief, v_t, dset, m_roll, rng):
    return heuristic_rollout_step(world, belief, v_t, dset, "hindsight", m_roll, rng)


def optimistic_rollout_step(world, belief, v_t, dset, m_roll, rng):
    return heuristic_rollout_step(world, belief, v_t, dset, "optimistic", m_roll, rng)
