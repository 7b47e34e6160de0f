import math

import numpy as np
import pytest

from scos.world import LatticeWorld, Obstacle


def brute_force_paths(world: LatticeWorld, labels, frm, to, charged=False,
                      best_only=True):
    """Exhaustive DFS over simple paths with branch-and-bound pruning.

    Independent of the Dijkstra machinery: recomputes blocking and entering
    charges from raw geometry.  Returns (best_cost, lexicographically
    smallest best vertex path).
    """
    from scos.world import edge_blocked, AMBIGUOUS_FREE, BLOCKED, AMBIGUOUS_BLOCKING

    blocking = [o for o in world.obstacles
                if labels[o.id] in (BLOCKED, AMBIGUOUS_BLOCKING)]
    chargeable = [o for o in world.obstacles
                  if charged and labels[o.id] == AMBIGUOUS_FREE]

    def inside(v, o):
        return math.hypot(v[0] - o.center[0], v[1] - o.center[1]) <= o.radius

    def neighbors(v):
        i, j = v
        out = []
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == dj == 0:
                    continue
                w = (i + di, j + dj)
                if world.in_bounds(w):
                    out.append(w)
        return sorted(out)

    best = [math.inf, None]

    def rec(v, cost, path, visited):
        if cost > best[0] + 1e-9:
            return
        if v == to:
            cand = (cost, path[:])
            if cost < best[0] - 1e-9 or (abs(cost - best[0]) <= 1e-9
                                         and (best[1] is None or path < best[1])):
                best[0], best[1] = cost, path[:]
            return
        for w in neighbors(v):
            if w in visited:
                continue
            if any(edge_blocked((v, w), o) for o in blocking):
                continue
            step = math.hypot(w[0] - v[0], w[1] - v[1])
            surcharge = sum(o.disambiguation_cost for o in chargeable
                            if edge_blocked((v, w), o) and not inside(v, o))
            visited.add(w)
            path.append(w)
            rec(w, cost + step + surcharge, path, visited)
            path.pop()
            visited.discard(w)

    rec(frm, 0.0, [frm], {frm})
    return best[0], best[1]


@pytest.fixture
def empty_5x5():
    return LatticeWorld(5, 5, [], (3, 5), (3, 1))


def make_world(width, height, obstacle_specs, start=None, goal=None):
    obstacles = [Obstacle(i, c, r, cost) for i, (c, r, cost) in
                 enumerate(obstacle_specs)]
    return LatticeWorld(width, height, obstacles, start, goal)
