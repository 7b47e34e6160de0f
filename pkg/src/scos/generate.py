"""Correlated ground-truth environment generation and replicate bookkeeping.

An environment is a fixed obstacle layout plus a latent log-odds vector
combining a distance-to-goal trend, an isolation trend and correlated
Gaussian noise.  Replicates re-draw only the binary statuses.  All seeds are
derived from the master seed by counters, so any single instance can be
rebuilt in isolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .belief import Kernel, kernel_matrix, to_probabilities
from .world import BLOCKED, LatticeWorld, Obstacle, labels_all, shortest_path

# Obstacle centers keep two clear columns at the left/right borders plus the
# disk radius, guaranteeing a perimeter corridor between start and goal.
SIDE_MARGIN = 2.0
TOP_MARGIN = 1.0


class GenerationFailedError(RuntimeError):
    """Rejection sampling exhausted its retry budget."""


@dataclass(frozen=True)
class ScenarioSpec:
    width: int = 50
    height: int = 25
    n_obstacles: int = 20
    radius: float = 3.5
    sensor_range: float = 12.5
    sensor_noise: float = 1.5
    sigma_f: float = 1.5
    length_scale: float = -1.0        # -1 -> 2 * radius
    w_goal: float = 1.5
    w_isolation: float = 1.0
    isolation_radius: float = -1.0    # -1 -> 4 * radius
    n_environments: int = 1
    n_replicates: int = 1
    master_seed: int = 0
    max_rejections: int = 200

    def __post_init__(self):
        if not 0.0 < self.sensor_noise < 4.0:
            raise ValueError("sensor_noise must lie in (0, 4)")
        if self.n_obstacles < 0 or self.radius <= 0:
            raise ValueError("invalid obstacle parameters")
        if self.length_scale <= 0 and self.length_scale != -1.0:
            raise ValueError("length_scale must be positive")
        if self.length_scale == -1.0:
            object.__setattr__(self, "length_scale", 2.0 * self.radius)
        if self.isolation_radius == -1.0:
            object.__setattr__(self, "isolation_radius", 4.0 * self.radius)

    @property
    def kernel(self) -> Kernel:
        return Kernel(self.sigma_f, self.length_scale)

    @property
    def start(self) -> tuple[int, int]:
        return (self.width // 2, self.height)

    @property
    def goal(self) -> tuple[int, int]:
        return (self.width // 2, 1)


@dataclass
class GroundTruth:
    """One sampled world: layout, latent log-odds, and a status draw."""

    centers: np.ndarray          # (n, 2)
    radius: float
    y_star: np.ndarray           # latent log-odds
    rho_star: np.ndarray         # logistic(y_star)
    statuses: np.ndarray         # (n,) in {0, 1}


@dataclass
class EnvironmentRecord:
    index: int
    centers: np.ndarray
    y_star: np.ndarray
    rho_star: np.ndarray
    replicates: list[np.ndarray]   # status vectors
    layout_seed_key: tuple
    replicate_seed_keys: list[tuple]


@dataclass
class ScenarioSet:
    spec: ScenarioSpec
    environments: list[EnvironmentRecord]

    def instance(self, env: int, rep: int) -> tuple[EnvironmentRecord, np.ndarray]:
        record = self.environments[env]
        return record, record.replicates[rep]


def _layout_rng(spec: ScenarioSpec, env: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=(0, env)))


def _status_rng(spec: ScenarioSpec, env: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=(1, env, rep)))


def build_world(spec: ScenarioSpec, centers: np.ndarray) -> LatticeWorld:
    obstacles = [Obstacle(i, (float(c[0]), float(c[1])), spec.radius)
                 for i, c in enumerate(centers)]
    return LatticeWorld(spec.width, spec.height, obstacles, spec.start, spec.goal)


def _corridor_exists(spec: ScenarioSpec, centers: np.ndarray,
                     statuses: np.ndarray | None = None) -> bool:
    world = build_world(spec, centers)
    labels = labels_all(world, BLOCKED)
    if statuses is not None:
        labels[statuses == 0] = 0
    _, cost = shortest_path(world, labels, spec.start, spec.goal)
    return math.isfinite(cost)


def place_obstacles(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform centers over the interior subregion, rejected until a path
    avoiding every disk still connects start and goal."""
    if spec.n_obstacles == 0:
        return np.empty((0, 2))
    r = spec.radius
    lo_x, hi_x = 1.0 + SIDE_MARGIN + r, spec.width - SIDE_MARGIN - r
    lo_y, hi_y = 1.0 + TOP_MARGIN + r, spec.height - TOP_MARGIN - r
    if lo_x >= hi_x or lo_y >= hi_y:
        raise GenerationFailedError("grid too small for the requested radius")
    for _ in range(spec.max_rejections):
        xs = rng.uniform(lo_x, hi_x, spec.n_obstacles)
        ys = rng.uniform(lo_y, hi_y, spec.n_obstacles)
        centers = np.column_stack([xs, ys])
        if _corridor_exists(spec, centers):
            return centers
    raise GenerationFailedError("no feasible layout found; re-seed and retry")


def trend_components(centers: np.ndarray, goal: tuple[int, int],
                     isolation_radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Unit-interval trends: proximity to the goal and isolation.

    Both are affine in the raw statistic and normalized to [0, 1]; constant
    statistics map to a flat 0.5.
    """
    n = len(centers)
    if n == 0:
        return np.empty(0), np.empty(0)
    d_goal = np.hypot(centers[:, 0] - goal[0], centers[:, 1] - goal[1])
    diffs = centers[:, None, :] - centers[None, :, :]
    dist = np.hypot(diffs[..., 0], diffs[..., 1])
    neighbors = (dist <= isolation_radius).sum(axis=1) - 1

    def normalize(raw):
        lo, hi = raw.min(), raw.max()
        if hi - lo < 1e-12:
            return np.full(n, 0.5)
        return (hi - raw) / (hi - lo)

    return normalize(d_goal), normalize(neighbors.astype(np.float64))


def sample_ground_truth(spec: ScenarioSpec, centers: np.ndarray,
                        rng: np.random.Generator) -> GroundTruth:
    """Latent log-odds = goal trend + isolation trend + correlated noise;
    statuses are Bernoulli draws re-drawn until the world stays traversable."""
    n = len(centers)
    if n == 0:
        return GroundTruth(centers, spec.radius, np.empty(0), np.empty(0),
                           np.empty(0, dtype=np.int8))
    t_goal, t_iso = trend_components(centers, spec.goal, spec.isolation_radius)
    K = kernel_matrix(spec.kernel, centers)
    noise = rng.multivariate_normal(np.zeros(n), K, method="cholesky")
    # Trends enter centered so the field stays balanced around even odds;
    # only relative tactical importance shifts the log-odds.
    y_star = (spec.w_goal * (t_goal - t_goal.mean())
              + spec.w_isolation * (t_iso - t_iso.mean()) + noise)
    rho_star = to_probabilities(y_star)
    for _ in range(spec.max_rejections):
        statuses = (rng.random(n) < rho_star).astype(np.int8)
        if _corridor_exists(spec, centers, statuses):
            return GroundTruth(centers, spec.radius, y_star, rho_star, statuses)
    raise GenerationFailedError("no traversable status draw found")


def build_replicates(spec: ScenarioSpec) -> ScenarioSet:
    """E environments x M replicate status draws, all counter-seeded."""
    environments = []
    for e in range(spec.n_environments):
        rng = _layout_rng(spec, e)
        centers = place_obstacles(spec, rng)
        base = sample_ground_truth(spec, centers, rng)
        # Replicate 0 is the sample_ground_truth draw itself (layout stream);
        # further replicates come from dedicated counter streams.
        replicates = [base.statuses]
        keys = [(0, e)]
        for m in range(1, spec.n_replicates):
            srng = _status_rng(spec, e, m)
            for _ in range(spec.max_rejections):
                z = (srng.random(len(centers)) < base.rho_star).astype(np.int8)
                if _corridor_exists(spec, centers, z):
                    break
            else:
                raise GenerationFailedError(f"env {e} replicate {m} infeasible")
            replicates.append(z)
            keys.append((1, e, m))
        environments.append(EnvironmentRecord(
            index=e, centers=centers, y_star=base.y_star, rho_star=base.rho_star,
            replicates=replicates, layout_seed_key=(0, e), replicate_seed_keys=keys))
    return ScenarioSet(spec, environments)


# -- persistence ---------------------------------------------------------------


def save_scenarios(path, scenarios: ScenarioSet) -> None:
    payload = {
        "spec": asdict(scenarios.spec),
        "environments": [
            {
                "index": env.index,
                "centers": [[float(x), float(y)] for x, y in env.centers],
                "y_star": [float(v) for v in env.y_star],
                "rho_star": [float(v) for v in env.rho_star],
                "layout_seed_key": list(env.layout_seed_key),
                "replicates": [
                    {"index": m, "statuses": [int(z) for z in env.replicates[m]],
                     "seed_key": list(env.replicate_seed_keys[m])}
                    for m in range(len(env.replicates))
                ],
            }
            for env in scenarios.environments
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_scenarios(path) -> ScenarioSet:
    with open(path) as fh:
        payload = json.load(fh)
    spec = ScenarioSpec(**payload["spec"])
    environments = []
    for rec in payload["environments"]:
        environments.append(EnvironmentRecord(
            index=rec["index"],
            centers=np.asarray(rec["centers"], dtype=np.float64).reshape(-1, 2),
            y_star=np.asarray(rec["y_star"], dtype=np.float64),
            rho_star=np.asarray(rec["rho_star"], dtype=np.float64),
            replicates=[np.asarray(r["statuses"], dtype=np.int8) for r in rec["replicates"]],
            layout_seed_key=tuple(rec["layout_seed_key"]),
            replicate_seed_keys=[tuple(r["seed_key"]) for r in rec["replicates"]],
        ))
    return ScenarioSet(spec, environments)
