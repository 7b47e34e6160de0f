"""Experiment orchestration: policy x scenario matrices, metrics, persistence.

Every cell (policy, environment, replicate) runs with seeds derived by
counters from the run seed, so any cell is reproducible in isolation and
results are identical under any worker-pool size.  Offline training happens
once per (policy, environment) and is timed separately from the online
traversals.  Reports are pure folds over the persisted traces plus the
timing sidecar.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np

from .belief import BeliefState
from .generate import ScenarioSet, ScenarioSpec, build_world
from .mc_values import OpiConfig
from .policies import POLICY_IDS, make_policy, train_policy
from .rollout import RolloutConfig, execute_episode, trace_to_lines, write_trace
from .sensor import SensorModel
from .world import shortest_path

ORACLE_TIE_TOL = 1e-9


class EmptySetError(ValueError):
    pass


def optimal_oracle(world, truth_status: np.ndarray) -> float:
    """Perfect-information shortest path cost: true obstacles block, false
    ones are free, nothing is ever disambiguated."""
    labels = np.where(np.asarray(truth_status) == 1, 1, 0).astype(np.int8)
    _, cost = shortest_path(world, labels, world.start, world.goal)
    if not math.isfinite(cost):
        raise RuntimeError("instance violates the generator feasibility invariant")
    return cost


@dataclass
class CellResult:
    policy: str
    env: int
    rep: int
    cost: float
    adjusted: float
    oracle: float
    steps: int
    failed: bool
    online_seconds: float
    offline_seconds: float
    trace_lines: list[str] = field(repr=False, default_factory=list)


@dataclass
class MetricsReport:
    """Aggregates per policy: means, spread decomposition, timing, failures."""

    policy: str
    n_runs: int
    n_failures: int
    mean_cost: float
    median_cost: float
    mean_gap: float
    within_env_sd: float
    cross_env_sd: float
    ci95_cost: float
    mean_online_seconds: float
    mean_offline_seconds: float


def _median(values: list[float]) -> float:
    v = sorted(values)
    n = len(v)
    if n == 0:
        raise EmptySetError("no values to aggregate")
    mid = n // 2
    return v[mid] if n % 2 else 0.5 * (v[mid - 1] + v[mid])


def aggregate(results: list[CellResult]) -> list[MetricsReport]:
    """Per-policy metrics; failed cells are excluded from cost statistics and
    reported through the failure count."""
    if not results:
        raise EmptySetError("no cells to aggregate")
    out = []
    for policy in sorted({r.policy for r in results}):
        cells = [r for r in results if r.policy == policy]
        ok = [r for r in cells if not r.failed]
        costs = [r.cost for r in ok]
        gaps = [r.cost - r.oracle for r in ok]
        by_env: dict[int, list[float]] = {}
        for r in ok:
            by_env.setdefault(r.env, []).append(r.cost)
        env_means = [float(np.mean(v)) for v in by_env.values()]
        within = [float(np.std(v, ddof=1)) for v in by_env.values() if len(v) > 1]
        cross = float(np.std(env_means, ddof=1)) if len(env_means) > 1 else 0.0
        ci95 = 1.96 * cross / math.sqrt(len(env_means)) if len(env_means) > 1 else 0.0
        out.append(MetricsReport(
            policy=policy,
            n_runs=len(cells),
            n_failures=len(cells) - len(ok),
            mean_cost=float(np.mean(costs)) if costs else math.nan,
            median_cost=_median(costs) if costs else math.nan,
            mean_gap=float(np.mean(gaps)) if gaps else math.nan,
            within_env_sd=float(np.mean(within)) if within else 0.0,
            cross_env_sd=cross,
            ci95_cost=ci95,
            mean_online_seconds=float(np.mean([r.online_seconds for r in ok])) if ok else math.nan,
            mean_offline_seconds=float(np.mean([r.offline_seconds for r in ok])) if ok else math.nan,
        ))
    return out


@dataclass
class RunPlan:
    scenarios: ScenarioSet
    policies: tuple[str, ...]
    opi: OpiConfig
    rollout: RolloutConfig
    run_seed: int = 0
    coarsen: bool = False

    def episode_rng(self, policy: str, env: int, rep: int) -> np.random.Generator:
        pid = POLICY_IDS.index(policy)
        return np.random.default_rng(np.random.SeedSequence(
            self.run_seed, spawn_key=(2, pid, env, rep)))

    def train_rng(self, policy: str, env: int) -> np.random.Generator:
        pid = POLICY_IDS.index(policy)
        return np.random.default_rng(np.random.SeedSequence(
            self.run_seed, spawn_key=(3, pid, env)))


def run_cell_block(plan: RunPlan, policy: str, env_index: int) -> list[CellResult]:
    """Train once for (policy, env), then run every replicate."""
    spec = plan.scenarios.spec
    env = plan.scenarios.environments[env_index]
    world = build_world(spec, env.centers)
    belief0 = BeliefState(env.centers, spec.kernel)
    sensor = SensorModel(spec.sensor_noise, spec.sensor_range)

    t0 = time.perf_counter()
    model, _ = train_policy(policy, world, belief0, sensor, plan.opi,
                            plan.train_rng(policy, env_index), coarsen=plan.coarsen)
    offline = time.perf_counter() - t0

    results = []
    for rep, truth in enumerate(env.replicates):
        pol = make_policy(policy, model, sensor, plan.rollout, plan.opi,
                          coarsen=plan.coarsen)
        rng = plan.episode_rng(policy, env_index, rep)
        trace = execute_episode(world, truth, belief0, pol, sensor,
                                plan.rollout, rng)
        oracle = optimal_oracle(world, truth)
        header = {"policy": policy, "env": env_index, "rep": rep,
                  "run_seed": plan.run_seed, "coarsen": plan.coarsen,
                  "lambda": spec.sensor_noise, "range": spec.sensor_range,
                  "n_obstacles": spec.n_obstacles,
                  "grid": [spec.width, spec.height]}
        results.append(CellResult(
            policy=policy, env=env_index, rep=rep, cost=trace.total_raw,
            adjusted=trace.total_adjusted, oracle=oracle, steps=len(trace.steps),
            failed=trace.failed, online_seconds=trace.online_seconds,
            offline_seconds=offline if rep == 0 else 0.0,
            trace_lines=trace_to_lines(trace, header)))
    return results


def _pool_task(args):
    plan, policy, env_index = args
    return run_cell_block(plan, policy, env_index)


def run_matrix(plan: RunPlan, out_dir: str | None = None,
               parallelism: int = 1) -> list[CellResult]:
    """Execute all (policy, environment, replicate) cells.

    Per-cell failures are recorded, never abort the matrix.  With an output
    directory, traces are written as JSON-lines plus report CSVs.
    """
    tasks = [(plan, policy, e) for policy in plan.policies
             for e in range(len(plan.scenarios.environments))]
    blocks: list[list[CellResult]]
    if parallelism > 1:
        with Pool(parallelism) as pool:
            blocks = pool.map(_pool_task, tasks)
    else:
        blocks = [_pool_task(t) for t in tasks]
    results = [cell for block in blocks for cell in block]
    results.sort(key=lambda r: (r.policy, r.env, r.rep))
    if out_dir is not None:
        persist_results(out_dir, plan, results)
    return results


def persist_results(out_dir: str, plan: RunPlan, results: list[CellResult]) -> None:
    trace_dir = os.path.join(out_dir, "traces")
    os.makedirs(trace_dir, exist_ok=True)
    for r in results:
        name = f"{r.policy}_env{r.env:03d}_rep{r.rep:02d}.jsonl"
        with open(os.path.join(trace_dir, name), "w") as fh:
            fh.write("\n".join(r.trace_lines))
            fh.write("\n")
    write_runs_csv(os.path.join(out_dir, "runs.csv"), results)
    reports = aggregate(results)
    spec = plan.scenarios.spec
    write_report_csv(os.path.join(out_dir, "report.csv"), reports, spec)
    write_report_csv(os.path.join(out_dir, "plot_data.csv"), reports, spec)


def write_runs_csv(path: str, results: list[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "env", "rep", "cost", "adjusted", "oracle", "gap",
                    "steps", "failed", "online_seconds", "offline_seconds"])
        for r in results:
            w.writerow([r.policy, r.env, r.rep, repr(r.cost), repr(r.adjusted),
                        repr(r.oracle), repr(r.cost - r.oracle), r.steps,
                        int(r.failed), f"{r.online_seconds:.6f}",
                        f"{r.offline_seconds:.6f}"])


def write_report_csv(path: str, reports: list[MetricsReport],
                     spec: ScenarioSpec) -> None:
    """Long-format metric rows keyed by the experimental axes."""
    setting = f"g{spec.width}x{spec.height}_n{spec.n_obstacles}" \
              f"_lam{spec.sensor_noise}_r{spec.sensor_range}"
    metrics = ["mean_cost", "median_cost", "mean_gap", "within_env_sd",
               "cross_env_sd", "mean_online_seconds", "mean_offline_seconds",
               "n_failures"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "setting", "lambda", "range", "n_obstacles",
                    "grid", "metric", "value", "ci95"])
        for rep in reports:
            for m in metrics:
                ci = rep.ci95_cost if m == "mean_cost" else ""
                w.writerow([rep.policy, setting, spec.sensor_noise,
                            spec.sensor_range, spec.n_obstacles,
                            f"{spec.width}x{spec.height}", m,
                            repr(float(getattr(rep, m))), ci])


def load_runs_csv(path: str) -> list[CellResult]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(CellResult(
                policy=row["policy"], env=int(row["env"]), rep=int(row["rep"]),
                cost=float(row["cost"]), adjusted=float(row["adjusted"]),
                oracle=float(row["oracle"]), steps=int(row["steps"]),
                failed=bool(int(row["failed"])),
                online_seconds=float(row["online_seconds"]),
                offline_seconds=float(row["offline_seconds"])))
    return out


def paired_difference(a: list[CellResult], b: list[CellResult]):
    """Mean and 95% half-width of per-environment mean paired cost
    differences (b minus a), pairing cells by (env, rep)."""
    costs_a = {(r.env, r.rep): r.cost for r in a if not r.failed}
    costs_b = {(r.env, r.rep): r.cost for r in b if not r.failed}
    keys = sorted(set(costs_a) & set(costs_b))
    if not keys:
        raise EmptySetError("no paired cells")
    by_env: dict[int, list[float]] = {}
    for k in keys:
        by_env.setdefault(k[0], []).append(costs_b[k] - costs_a[k])
    env_means = np.array([np.mean(v) for v in by_env.values()])
    mean = float(env_means.mean())
    if len(env_means) > 1:
        hw = 1.96 * float(env_means.std(ddof=1)) / math.sqrt(len(env_means))
    else:
        hw = math.inf
    return mean, hw
