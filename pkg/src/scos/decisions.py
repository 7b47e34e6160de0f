"""Macro-decision candidates and search-space reduction.

Candidate generation repeatedly plans optimistically (ambiguous disks
traversable, entering charges applied), peels off the first ambiguous
obstacle met, and flips it to blocked, until a plan reaches the goal free
of ambiguity.  Each candidate is the obstacle's disambiguation vertex with
an obstacle-free approach segment; the goal itself is a candidate whenever
it is optimistically reachable.  Reduction then discards obstacles whose
pseudo-vertex lower bound cannot beat the pure-exploitation cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .world import (AMBIGUOUS_FREE, BLOCKED, FREE, LatticeWorld, NoInteriorError,
                    TIE_TOL, Vertex, pseudo_vertex_bound)


class NoCandidatesError(RuntimeError):
    """Neither the optimistic nor the exploitation graph reaches the goal."""


@dataclass(frozen=True)
class SimPartition:
    """Bitmask obstacle partition used inside simulated traversals."""

    true_mask: int
    amb_mask: int

    def reveal(self, obstacle_id: int, status: int) -> "SimPartition":
        bit = 1 << obstacle_id
        true_mask = self.true_mask | bit if status else self.true_mask
        return SimPartition(true_mask, self.amb_mask & ~bit)

    def drop_ambiguous(self, ids) -> "SimPartition":
        mask = self.amb_mask
        for o in ids:
            mask &= ~(1 << o)
        return SimPartition(self.true_mask, mask)


@dataclass(frozen=True)
class Candidate:
    """One macro-decision: move along `segment` to `stopping_vertex`.

    `obstacle_id` is None for the goal candidate.  `immediate_cost` adds the
    disambiguation cost; `lower_bound` is the optimistic bound on finishing
    the traversal through this candidate.
    """

    stopping_vertex: Vertex
    obstacle_id: int | None
    segment: tuple[Vertex, ...]
    segment_length: float
    lower_bound: float
    immediate_cost: float

    @property
    def is_goal(self) -> bool:
        return self.obstacle_id is None


@dataclass
class DecisionSet:
    candidates: list[Candidate]
    exploit_cost: float               # pure-exploitation upper bound, may be inf
    origin: Vertex
    discarded: list[int] = field(default_factory=list)

    @property
    def has_goal(self) -> bool:
        return any(c.is_goal for c in self.candidates)

    def candidate_obstacles(self) -> set[int]:
        return {c.obstacle_id for c in self.candidates if c.obstacle_id is not None}


def _partition_masks(partition) -> tuple[int, int]:
    return partition.true_mask, partition.amb_mask


def _first_ambiguous_contact(world: LatticeWorld, path: list[int], live_mask: int):
    """(edge position, obstacle id) of the first live ambiguous disk touched.

    Within one edge, obstacles are ordered by entry parameter along the
    segment, ties by id.
    """
    for k in range(len(path) - 1):
        a, b = path[k], path[k + 1]
        e = _edge_between(world, a, b)
        ids = [int(o) for o in world.edge_hit_ids[e] if live_mask >> int(o) & 1]
        if ids:
            if len(ids) > 1:
                ids.sort(key=lambda o: (_entry_parameter(world, a, b, o), o))
            return k, ids[0]
    return None


def _edge_between(world: LatticeWorld, a: int, b: int) -> int:
    row = world.nbr_vertex[a]
    for k in range(8):
        if row[k] == b:
            return int(world.nbr_edge[a, k])
    raise KeyError((a, b))


def _entry_parameter(world: LatticeWorld, a: int, b: int, obstacle_id: int) -> float:
    """Smallest t in [0,1] at which segment a->b meets the closed disk."""
    o = world.obstacles[obstacle_id]
    ax, ay = world.to_vertex(a)
    bx, by = world.to_vertex(b)
    cx, cy = o.center
    dx, dy = bx - ax, by - ay
    fx, fy = ax - cx, ay - cy
    aa = dx * dx + dy * dy
    bb = 2.0 * (fx * dx + fy * dy)
    cc = fx * fx + fy * fy - o.radius**2
    if cc <= 0:
        return 0.0
    disc = bb * bb - 4 * aa * cc
    if disc < 0:
        return 1.0
    t = (-bb - math.sqrt(disc)) / (2 * aa)
    return min(max(t, 0.0), 1.0)


def identify_decisions(world: LatticeWorld, partition, v_t: Vertex) -> DecisionSet:
    """Optimistic-greedy candidate generation from the current vertex.

    `partition` exposes `true_mask` and `amb_mask` bit masks over obstacle
    ids.  Results are cached on the world keyed by (vertex, partition).
    """
    true_mask, amb_mask = _partition_masks(partition)
    src = world.to_index(v_t)
    key = (src, true_mask, amb_mask)
    cached = world._dset_cache.get(key)
    if cached is not None:
        return cached

    goal_idx = world.to_index(world.goal)
    exploit = world.field(true_mask | amb_mask, 0, goal_idx)
    exploit_cost = float(exploit.dist[src])
    optimism = world.field(true_mask, 0, goal_idx)

    candidates: list[Candidate] = []
    flips = 0
    if src == goal_idx:
        candidates.append(Candidate(world.goal, None, (world.goal,), 0.0, 0.0, 0.0))
    else:
        while True:
            blocked = true_mask | flips
            live = amb_mask & ~flips
            f = world.field(blocked, live, goal_idx)
            if not np.isfinite(f.dist[src]):
                break
            path = world.walk(f, src)
            contact = _first_ambiguous_contact(world, path, live)
            if contact is None:
                seg = tuple(world.to_vertex(v) for v in path)
                cost = world.path_length(path)
                candidates.append(Candidate(world.goal, None, seg, cost, cost, cost))
                break
            k, obstacle_id = contact
            prefix = path[:k + 1]
            seg = tuple(world.to_vertex(v) for v in prefix)
            seg_len = world.path_length(prefix)
            c_x = world.obstacles[obstacle_id].disambiguation_cost
            bound = seg_len + c_x + float(optimism.dist[path[k]])
            candidates.append(Candidate(seg[-1], obstacle_id, seg, seg_len,
                                        bound, seg_len + c_x))
            flips |= 1 << obstacle_id

    if not candidates:
        raise NoCandidatesError(f"goal unreachable from {v_t} under any assumption")

    dset = DecisionSet(candidates=candidates, exploit_cost=exploit_cost, origin=v_t)
    if len(world._dset_cache) > 16384:
        world._dset_cache.clear()
    world._dset_cache[key] = dset
    return dset


def prune_search_space(world: LatticeWorld, partition, v_t: Vertex,
                       dset: DecisionSet) -> list[int]:
    """Discard non-candidate ambiguous obstacles whose pseudo-vertex bound
    meets or exceeds the exploitation cost.  Obstacles without interior
    vertices are never discarded.  Recomputed fresh at every decision step.
    """
    c_u = dset.exploit_cost
    if not math.isfinite(c_u):
        return []
    labels = np.full(world.n_obstacles, FREE, dtype=np.int8)
    true_mask, amb_mask = _partition_masks(partition)
    for o in range(world.n_obstacles):
        if true_mask >> o & 1:
            labels[o] = BLOCKED
        elif amb_mask >> o & 1:
            labels[o] = AMBIGUOUS_FREE
    exempt = dset.candidate_obstacles()
    discarded = []
    for o in range(world.n_obstacles):
        if not (amb_mask >> o & 1) or o in exempt:
            continue
        try:
            bound = pseudo_vertex_bound(world, labels, o, v_t, world.goal)
        except NoInteriorError:
            continue
        if bound >= c_u - TIE_TOL:
            discarded.append(o)
    dset.discarded = discarded
    return discarded
