"""8-adjacency lattice world with disk obstacles and shortest-path queries.

Vertices are integer pairs (i, j) with 1 <= i <= I, 1 <= j <= J.  Edges join
vertices at Chebyshev distance 1 (length 1 for axis steps, sqrt(2) for
diagonals).  Obstacles are closed disks; an edge is blocked by an obstacle
iff the closed segment between its endpoints comes within the disk radius
of the center.  Path queries run against a per-obstacle label assignment
(`Label`) so the same world serves exploit, optimistic and penalized plans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

Vertex = tuple[int, int]

SQRT2 = math.sqrt(2.0)

# Edge-cost ties are resolved lexicographically; two float path costs within
# this tolerance are treated as equal.
TIE_TOL = 1e-9

# Per-obstacle assumption labels for a path query.
FREE = 0                 # known traversable, never charged
BLOCKED = 1              # known blocking
AMBIGUOUS_FREE = 2       # assumed traversable; may carry a disambiguation charge
AMBIGUOUS_BLOCKING = 3   # assumed blocking

_BLOCKING = (BLOCKED, AMBIGUOUS_BLOCKING)


class UnreachableError(RuntimeError):
    """No feasible path exists for the query."""


class NoInteriorError(ValueError):
    """Obstacle disk contains no lattice vertex; pseudo-vertex bound undefined."""


@dataclass(frozen=True)
class Obstacle:
    id: int
    center: tuple[float, float]
    radius: float
    disambiguation_cost: float = -1.0  # -1 means "= radius" (resolved in __post_init__)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.disambiguation_cost < 0:
            object.__setattr__(self, "disambiguation_cost", self.radius)


def point_segment_distance(p: tuple[float, float], a: tuple[float, float],
                           b: tuple[float, float]) -> float:
    """Distance from point p to the closed segment [a, b]."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    if seg2 == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / seg2
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def edge_blocked(edge: tuple[Vertex, Vertex], obstacle: Obstacle) -> bool:
    """True iff the closed segment between the endpoints intersects the disk."""
    a, b = edge
    return point_segment_distance(obstacle.center, a, b) <= obstacle.radius


@dataclass
class DistanceField:
    """Cost-to-target for every vertex under one label assignment."""

    dist: np.ndarray            # (V,) float, inf where unreachable
    target: int                 # vertex index
    blocked_edges: np.ndarray   # (E,) bool
    charge_fwd: np.ndarray | None  # (E,) surcharge when traversing a -> b
    charge_bwd: np.ndarray | None


class LatticeWorld:
    """Immutable lattice graph plus edge/obstacle intersection caches.

    All path queries are deterministic: among equal-cost paths the one with
    the lexicographically smallest vertex sequence is returned.
    """

    def __init__(self, width: int, height: int, obstacles: list[Obstacle],
                 start: Vertex | None = None, goal: Vertex | None = None):
        if width < 1 or height < 1:
            raise ValueError("grid dimensions must be positive")
        self.width = width
        self.height = height
        self.obstacles = tuple(obstacles)
        self.n_obstacles = len(self.obstacles)
        if [o.id for o in self.obstacles] != list(range(self.n_obstacles)):
            raise ValueError("obstacle ids must be 0..n-1 in order")
        self.start = start if start is not None else (width // 2, height)
        self.goal = goal if goal is not None else (width // 2, 1)

        self.n_vertices = width * height
        self._build_graph()
        self._build_obstacle_cache()
        self._field_cache: dict = {}
        self._charge_cache: dict = {}
        self._block_cache: dict[int, np.ndarray] = {}
        self._dset_cache: dict = {}

        for v in (self.start, self.goal):
            if not self.in_bounds(v):
                raise ValueError(f"vertex {v} outside {width}x{height} lattice")

    # -- construction -------------------------------------------------------

    def _build_graph(self):
        I, J = self.width, self.height
        ea, eb, elen = [], [], []
        for i in range(1, I + 1):
            for j in range(1, J + 1):
                a = self.to_index((i, j))
                for di, dj in ((1, 0), (0, 1), (1, 1), (1, -1)):
                    ni, nj = i + di, j + dj
                    if 1 <= ni <= I and 1 <= nj <= J:
                        ea.append(a)
                        eb.append(self.to_index((ni, nj)))
                        elen.append(1.0 if di * dj == 0 else SQRT2)
        self.edge_a = np.asarray(ea, dtype=np.int32)
        self.edge_b = np.asarray(eb, dtype=np.int32)
        self.edge_len = np.asarray(elen, dtype=np.float64)
        self.n_edges = len(elen)
        order = np.lexsort((self.edge_b, self.edge_a))
        self.edge_a, self.edge_b = self.edge_a[order], self.edge_b[order]
        self.edge_len = self.edge_len[order]

        # Padded neighbor table sorted by neighbor index: the lexicographic
        # tie-break falls out of scanning it in order.
        nbr: list[list[tuple[int, int]]] = [[] for _ in range(self.n_vertices)]
        for e in range(self.n_edges):
            a, b = int(self.edge_a[e]), int(self.edge_b[e])
            nbr[a].append((b, e))
            nbr[b].append((a, e))
        self.nbr_vertex = np.full((self.n_vertices, 8), -1, dtype=np.int32)
        self.nbr_edge = np.full((self.n_vertices, 8), -1, dtype=np.int32)
        for v, lst in enumerate(nbr):
            lst.sort()
            for k, (w, e) in enumerate(lst):
                self.nbr_vertex[v, k] = w
                self.nbr_edge[v, k] = e

    def _build_obstacle_cache(self):
        n, E, V = self.n_obstacles, self.n_edges, self.n_vertices
        self.edge_hit = np.zeros((E, n), dtype=bool)
        self.vertex_inside = np.zeros((V, n), dtype=bool)
        if n == 0:
            self.edge_hit_ids = [np.empty(0, dtype=np.int64)] * E
            return
        ax = ((self.edge_a // self.height) + 1).astype(np.float64)
        ay = ((self.edge_a % self.height) + 1).astype(np.float64)
        bx = ((self.edge_b // self.height) + 1).astype(np.float64)
        by = ((self.edge_b % self.height) + 1).astype(np.float64)
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        vi = np.arange(V)
        vx = ((vi // self.height) + 1).astype(np.float64)
        vy = ((vi % self.height) + 1).astype(np.float64)
        for o in self.obstacles:
            cx, cy = o.center
            t = ((cx - ax) * dx + (cy - ay) * dy) / seg2
            np.clip(t, 0.0, 1.0, out=t)
            d = np.hypot(cx - (ax + t * dx), cy - (ay + t * dy))
            self.edge_hit[:, o.id] = d <= o.radius
            self.vertex_inside[:, o.id] = np.hypot(cx - vx, cy - vy) <= o.radius
        self.edge_hit_ids = [np.nonzero(self.edge_hit[e])[0] for e in range(E)]

    # -- indexing helpers ----------------------------------------------------

    def to_index(self, v: Vertex) -> int:
        return (v[0] - 1) * self.height + (v[1] - 1)

    def to_vertex(self, idx: int) -> Vertex:
        idx = int(idx)
        return (idx // self.height + 1, idx % self.height + 1)

    def in_bounds(self, v: Vertex) -> bool:
        return 1 <= v[0] <= self.width and 1 <= v[1] <= self.height

    def interior_vertices(self, obstacle_id: int) -> np.ndarray:
        return np.nonzero(self.vertex_inside[:, obstacle_id])[0]

    # -- masks and weights ---------------------------------------------------

    def masks_from_labels(self, labels: np.ndarray,
                          include_disamb_costs: bool) -> tuple[int, int]:
        blocked = 0
        charged = 0
        for o in range(self.n_obstacles):
            lab = labels[o]
            if lab in _BLOCKING:
                blocked |= 1 << o
            elif include_disamb_costs and lab == AMBIGUOUS_FREE:
                charged |= 1 << o
        return blocked, charged

    def _blocked_edges(self, blocked_mask: int) -> np.ndarray:
        arr = self._block_cache.get(blocked_mask)
        if arr is None:
            arr = np.zeros(self.n_edges, dtype=bool)
            m = blocked_mask
            while m:
                o = (m & -m).bit_length() - 1
                arr |= self.edge_hit[:, o]
                m &= m - 1
            self._block_cache[blocked_mask] = arr
        return arr

    def _charges(self, charged_mask: int) -> tuple[np.ndarray, np.ndarray] | None:
        """Directional entering surcharges: charged when the source endpoint
        of the traversal lies outside the disk and the edge intersects it."""
        if charged_mask == 0:
            return None
        cached = self._charge_cache.get(charged_mask)
        if cached is None:
            fwd = np.zeros(self.n_edges, dtype=np.float64)
            bwd = np.zeros(self.n_edges, dtype=np.float64)
            m = charged_mask
            while m:
                o = (m & -m).bit_length() - 1
                hit = self.edge_hit[:, o]
                c = self.obstacles[o].disambiguation_cost
                fwd += c * (hit & ~self.vertex_inside[self.edge_a, o])
                bwd += c * (hit & ~self.vertex_inside[self.edge_b, o])
                m &= m - 1
            cached = (fwd, bwd)
            if len(self._charge_cache) > 2048:
                self._charge_cache.clear()
            self._charge_cache[charged_mask] = cached
        return cached

    # -- distance fields -----------------------------------------------------

    def field(self, blocked_mask: int, charged_mask: int, target: int) -> DistanceField:
        """Cost-to-target field, cached by (blocked, charged, target)."""
        key = (blocked_mask, charged_mask, target)
        f = self._field_cache.get(key)
        if f is not None:
            return f
        blocked = self._blocked_edges(blocked_mask)
        keep = ~blocked
        ea, eb = self.edge_a[keep], self.edge_b[keep]
        w_fwd = self.edge_len[keep]
        w_bwd = w_fwd
        charges = self._charges(charged_mask)
        cf = cb = None
        if charges is not None:
            cf, cb = charges
            w_fwd = w_fwd + cf[keep]
            w_bwd = w_bwd + cb[keep]
        # Transposed adjacency: a dijkstra sweep from `target` then yields the
        # directed cost from every vertex *to* the target.
        rows = np.concatenate([eb, ea])
        cols = np.concatenate([ea, eb])
        data = np.concatenate([w_fwd, w_bwd])
        g = csr_matrix((data, (rows, cols)), shape=(self.n_vertices, self.n_vertices))
        dist = dijkstra(g, indices=target, directed=True)
        f = DistanceField(dist=dist, target=target, blocked_edges=blocked,
                          charge_fwd=cf, charge_bwd=cb)
        if len(self._field_cache) > 8192:
            self._field_cache.clear()
        self._field_cache[key] = f
        return f

    def _edge_weight(self, f: DistanceField, u: int, e: int) -> float:
        w = self.edge_len[e]
        if f.charge_fwd is not None:
            w += f.charge_fwd[e] if u == self.edge_a[e] else f.charge_bwd[e]
        return w

    def walk(self, f: DistanceField, source: int) -> list[int] | None:
        """Greedy descent on a cost-to-target field.

        Returns the lexicographically smallest minimum-cost vertex sequence,
        or None if the target is unreachable from `source`.
        """
        d = f.dist
        if not np.isfinite(d[source]):
            return None
        path = [source]
        u = source
        guard = 4 * self.n_vertices
        while u != f.target:
            nxt = -1
            du = d[u]
            for k in range(8):
                v = self.nbr_vertex[u, k]
                if v < 0:
                    break
                e = self.nbr_edge[u, k]
                if f.blocked_edges[e]:
                    continue
                if abs(self._edge_weight(f, u, e) + d[v] - du) <= TIE_TOL:
                    nxt = v
                    break
            if nxt < 0:
                raise RuntimeError("inconsistent distance field during walk")
            path.append(nxt)
            u = nxt
            guard -= 1
            if guard < 0:
                raise RuntimeError("walk exceeded step guard")
        return path

    def path_length(self, path: list[int]) -> float:
        total = 0.0
        for a, b in zip(path, path[1:]):
            dx = abs(a // self.height - b // self.height)
            dy = abs(a % self.height - b % self.height)
            total += SQRT2 if dx and dy else 1.0
        return total


def shortest_path(world: LatticeWorld, labels: np.ndarray, frm: Vertex, to: Vertex,
                  include_disamb_costs: bool = False):
    """Minimum-cost path from `frm` to `to` under the label assignment.

    Cost is the traversed length plus, when `include_disamb_costs`, the
    disambiguation cost of every AMBIGUOUS_FREE disk the path enters (charged
    on the entering edge).  Returns (vertex tuple list, cost); when no
    feasible path exists returns (None, inf).
    """
    blocked, charged = world.masks_from_labels(labels, include_disamb_costs)
    src, tgt = world.to_index(frm), world.to_index(to)
    f = world.field(blocked, charged, tgt)
    if not np.isfinite(f.dist[src]):
        return None, math.inf
    path = world.walk(f, src)
    return [world.to_vertex(v) for v in path], float(f.dist[src])


def pseudo_vertex_bound(world: LatticeWorld, labels: np.ndarray, obstacle_id: int,
                        frm: Vertex, goal: Vertex) -> float:
    """Lower bound on the cost of goal-reaching paths routed via an obstacle.

    The obstacle's interior lattice vertices act as a zero-cost pseudo vertex:
    the bound is C1 + C2 where C1 is the cheapest path from `frm` into the
    interior avoiding every other blocking or ambiguous disk, and C2 the
    cheapest continuation to `goal` treating ambiguous disks as traversable
    with entering disambiguation charges (the obstacle itself exempt).
    Either leg may be inf.
    """
    interior = world.interior_vertices(obstacle_id)
    if len(interior) == 0:
        raise NoInteriorError(f"obstacle {obstacle_id} has no interior vertex")
    self_bit = 1 << obstacle_id

    amb = 0
    known_blocked = 0
    for o in range(world.n_obstacles):
        lab = labels[o]
        if lab in (AMBIGUOUS_FREE, AMBIGUOUS_BLOCKING):
            amb |= 1 << o
        elif lab == BLOCKED:
            known_blocked |= 1 << o

    # C1: obstacle-free approach.  Uncharged graphs are symmetric, so the
    # field rooted at `frm` doubles as distance-from-frm.
    c1_blocked = (known_blocked | amb) & ~self_bit
    f1 = world.field(c1_blocked, 0, world.to_index(frm))
    c1 = float(np.min(f1.dist[interior]))

    # C2: optimistic continuation with charges, own disk exempt.
    c2_charged = amb & ~self_bit
    f2 = world.field(known_blocked, c2_charged, world.to_index(goal))
    c2 = float(np.min(f2.dist[interior]))
    return c1 + c2


def labels_all(world: LatticeWorld, label: int) -> np.ndarray:
    return np.full(world.n_obstacles, label, dtype=np.int8)
