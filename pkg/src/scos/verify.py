"""Property and oracle suites behind the `verify` command and the
acceptance tests.

Each check returns (passed, details); they are deterministic given their
seeds and compare the production code paths against independent
formulations: the textbook precision-form posterior, exhaustive subset
enumeration, belief-tree expectimax, and direct recomputation of bounds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefState, Kernel, kernel_matrix, posterior
from .decisions import identify_decisions, prune_search_space, SimPartition
from .dist_values import ValueDistribution, refine_support
from .exact import ExactSolver, StatusDistribution, remove_obstacles
from .generate import ScenarioSpec, build_replicates, build_world
from .information import mutual_information
from .mc_values import OpiConfig
from .policies import make_policy, replay_episode_updates, train_policy
from .rollout import RolloutConfig, execute_episode, trace_to_lines
from .sensor import SensorModel
from .training import opi_train
from .world import BLOCKED, FREE, LatticeWorld, Obstacle


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={v}" for k, v in self.details.items())
        return f"[{status}] {self.name} ({self.seconds:.1f}s) {info}"


def _timed(name):
    def wrap(fn):
        def run(*args, **kwargs) -> CheckResult:
            t0 = time.perf_counter()
            passed, details = fn(*args, **kwargs)
            return CheckResult(name, passed, time.perf_counter() - t0, details)
        run.check_name = name
        return run
    return wrap


# -- posterior identities -----------------------------------------------------


def _precision_form(K, y_obs, noise_var, inf_sub=1e12):
    """Textbook double-inverse posterior with large-number infinity."""
    sigma = np.where(np.isfinite(noise_var), noise_var, inf_sub)
    K_inv = np.linalg.inv(K)
    S_inv = np.diag(1.0 / sigma)
    cov = np.linalg.inv(K_inv + S_inv)
    mu = cov @ S_inv @ y_obs
    return mu, cov


def _conditioned(mu0, K0, idx, y, noise):
    """Generic Gaussian conditioning step (nonzero prior mean)."""
    idx = np.asarray(idx)
    S = K0[np.ix_(idx, idx)] + np.diag(noise)
    kA = K0[:, idx]
    sol = np.linalg.solve(S, np.column_stack([y - mu0[idx], kA.T]))
    return mu0 + kA @ sol[:, 0], K0 - kA @ sol[:, 1:]


@_timed("posterior-identity")
def posterior_identity_check(n_instances: int = 100, seed: int = 0,
                             tol: float = 1e-6):
    rng = np.random.default_rng(seed)
    worst_form = worst_seq = 0.0
    for _ in range(n_instances):
        n = int(rng.integers(2, 11))
        centers = rng.uniform(0, 20, size=(n, 2))
        K = kernel_matrix(Kernel(1.5, float(rng.uniform(1.0, 5.0))), centers)
        y = rng.normal(0, 2, n)
        noise = rng.uniform(0.2, 5.0, n)
        hidden = rng.random(n) < 0.4
        noise[hidden] = math.inf
        mu_a, cov_a = posterior(K, y, noise)
        mu_b, cov_b = _precision_form(K, y, noise)
        scale = 1.0 + float(np.max(np.abs(mu_b)))
        worst_form = max(worst_form,
                         float(np.max(np.abs(mu_a - mu_b))) / scale,
                         float(np.max(np.abs(cov_a - cov_b))) / (1.0 + float(np.max(np.abs(cov_b)))))
        # batch vs one-at-a-time conditioning
        obs_idx = np.nonzero(~hidden)[0]
        mu_s, cov_s = np.zeros(n), K.copy()
        for i in obs_idx:
            mu_s, cov_s = _conditioned(mu_s, cov_s, [i], y[[i]], noise[[i]])
        worst_seq = max(worst_seq,
                        float(np.max(np.abs(mu_a - mu_s))) / scale,
                        float(np.max(np.abs(cov_a - cov_s))) / (1.0 + float(np.max(np.abs(cov_a)))))
    ok = worst_form <= tol and worst_seq <= tol
    return ok, {"instances": n_instances, "max_rel_form": f"{worst_form:.2e}",
                "max_rel_seq": f"{worst_seq:.2e}"}


# -- information gain ----------------------------------------------------------


@_timed("submodularity")
def submodularity_check(n_kernels: int = 50, n: int = 6, seed: int = 1,
                        tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_kernels):
        centers = rng.uniform(0, 12, size=(n, 2))
        K = kernel_matrix(Kernel(float(rng.uniform(0.5, 2.5)),
                                 float(rng.uniform(1.0, 6.0))), centers)
        sigma2 = float(rng.uniform(0.1, 20.0))
        info = {}
        for s in range(1 << n):
            ids = [i for i in range(n) if s >> i & 1]
            info[s] = mutual_information(K[np.ix_(ids, ids)], sigma2)
        if abs(info[0]) > tol:
            violations += 1
        for s in range(1 << n):
            for i in range(n):
                if s >> i & 1:
                    continue
                gain_s = info[s | 1 << i] - info[s]
                if gain_s < -tol:
                    violations += 1
                # diminishing returns against every superset of s
                for t in range(1 << n):
                    if t & s == s and not t >> i & 1 and t != s:
                        if gain_s < info[t | 1 << i] - info[t] - tol:
                            violations += 1
    return violations == 0, {"kernels": n_kernels, "violations": violations}


# -- decision set and pruning ---------------------------------------------------


def _random_scenario(seed: int, n_obstacles: int, width=24, height=12,
                     radius=1.8) -> tuple[LatticeWorld, ScenarioSpec]:
    spec = ScenarioSpec(width=width, height=height, n_obstacles=n_obstacles,
                        radius=radius, sensor_range=6.0, sensor_noise=1.5,
                        n_environments=1, n_replicates=1, master_seed=seed)
    scen = build_replicates(spec)
    return build_world(spec, scen.environments[0].centers), spec


@_timed("decision-soundness")
def decision_soundness_check(n_worlds: int = 200, seed: int = 2,
                             tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    violations = 0
    checked = 0
    for w in range(n_worlds):
        world, _ = _random_scenario(seed=10_000 + w, n_obstacles=10)
        amb = (1 << world.n_obstacles) - 1
        part = SimPartition(0, amb)
        # fresh partition variants: prior plus one random reveal
        parts = [part]
        o = int(rng.integers(world.n_obstacles))
        parts.append(part.reveal(o, int(rng.integers(2))))
        for p in parts:
            dset = identify_decisions(world, p, world.start)
            if not math.isfinite(dset.exploit_cost):
                continue
            for cand in dset.candidates:
                checked += 1
                if cand.lower_bound > dset.exploit_cost + tol:
                    violations += 1
    return violations == 0, {"worlds": n_worlds, "candidates": checked,
                             "violations": violations}


def _prior_status_distribution(world: LatticeWorld, kernel: Kernel,
                               n_nodes: int = 6) -> StatusDistribution:
    centers = np.array([o.center for o in world.obstacles])
    K = kernel_matrix(kernel, centers)
    ids = list(range(world.n_obstacles))
    return StatusDistribution.from_gaussian(ids, np.zeros(len(ids)), K, n_nodes)


@_timed("pruning-safety")
def pruning_safety_check(n_instances: int = 50, seed: int = 3,
                         tol: float = 1e-9):
    worst = 0.0
    discarded_total = 0
    for k in range(n_instances):
        world, spec = _random_scenario(seed=20_000 + k, n_obstacles=6,
                                       width=20, height=10, radius=1.6)
        sdist = _prior_status_distribution(world, spec.kernel)
        part = SimPartition(0, (1 << world.n_obstacles) - 1)
        dset = identify_decisions(world, part, world.start)
        discarded = prune_search_space(world, part, world.start, dset)
        full = ExactSolver(world, sdist).value(world.start)
        if discarded:
            discarded_total += len(discarded)
            pruned = ExactSolver(world, sdist,
                                 excluded=frozenset(discarded)).value(world.start)
            worst = max(worst, abs(full - pruned))
    ok = worst <= tol
    return ok, {"instances": n_instances, "discarded": discarded_total,
                "max_diff": f"{worst:.2e}"}


# -- distributional refinement ---------------------------------------------------


@_timed("refinement-stability")
def refinement_stability_check(n_events: int = 10_000, seed: int = 4,
                               tol: float = 1e-12):
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n_events):
        k = int(rng.integers(2, 12))
        spacing = float(rng.uniform(0.3, 2.0))
        support = np.cumsum(rng.uniform(0.2 * spacing, spacing, k)) * 1.0
        alpha = rng.uniform(0.2, 5.0, k)
        observed = rng.random(k) < 0.4
        dist = ValueDistribution(support, alpha, observed, spacing)
        lo, hi = support[0] - spacing, support[-1] + spacing
        value = float(rng.uniform(lo, hi))
        mu = dist.mean()
        a_total = float(alpha.sum())
        new = refine_support(dist.copy(), value)
        change = abs(new.mean() - mu)
        if len(new.support) == len(support) - 1:        # merge case
            j = int(np.searchsorted(support, value)) - 1
            bound = (abs(value - mu)
                     + (alpha[j] + alpha[j + 1]) * spacing) / (a_total + 1.0)
        else:                                           # insert or count bump
            bound = abs(value - mu) / (a_total + 1.0) + spacing * 0.0
            if len(new.support) == len(support):        # exact-match increment
                hit = int(np.argmin(np.abs(support - value)))
                bound = abs(support[hit] - mu) / (a_total + 1.0)
        if change > bound + tol:
            violations += 1
    return violations == 0, {"events": n_events, "violations": violations}


# -- bonus shaping ---------------------------------------------------------------


@_timed("bonus-benefit")
def bonus_benefit_check(n_instances: int = 20, seed: int = 5,
                        tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    violations = 0
    worst_order = worst_gap = 0.0
    for k in range(n_instances):
        n_obs = int(rng.integers(2, 5))
        world, spec = _random_scenario(seed=30_000 + k, n_obstacles=n_obs,
                                       width=16, height=9, radius=1.5)
        sdist = _prior_status_distribution(world, spec.kernel)
        sigma2 = SensorModel(1.5, 6.0).noise_variance
        gains = {o.id: mutual_information(
            np.array([[spec.kernel.sigma_f**2]]), sigma2)
            for o in world.obstacles}

        def bonus_fn(vertex, cand):
            if cand.is_goal:
                return 0.0
            return math.sqrt(max(gains[cand.obstacle_id], 0.0))

        base = ExactSolver(world, sdist)
        shaped = ExactSolver(world, sdist, bonus_fn=bonus_fn)
        j_base = base.value(world.start)
        j_shaped = shaped.value(world.start)
        expected_bonus = base.expected_bonus_along_policy(world.start, bonus_fn)
        if j_shaped > j_base + tol:
            violations += 1
            worst_order = max(worst_order, j_shaped - j_base)
        if (j_base - j_shaped) < expected_bonus - tol:
            violations += 1
            worst_gap = max(worst_gap, expected_bonus - (j_base - j_shaped))
    return violations == 0, {"instances": n_instances, "violations": violations,
                             "worst_order": f"{worst_order:.2e}",
                             "worst_gap": f"{worst_gap:.2e}"}


# -- OPI convergence ---------------------------------------------------------------


@_timed("opi-convergence")
def convergence_check(n_instances: int = 10, seed: int = 6):
    flags = 0
    iters = []
    for k in range(n_instances):
        spec = ScenarioSpec(width=50, height=25, n_obstacles=20, radius=3.5,
                            sensor_range=12.5, sensor_noise=1.5,
                            n_environments=1, n_replicates=1,
                            master_seed=40_000 + k)
        scen = build_replicates(spec)
        world = build_world(spec, scen.environments[0].centers)
        belief = BeliefState(scen.environments[0].centers, spec.kernel)
        sensor = SensorModel(spec.sensor_noise, spec.sensor_range)
        cfg = OpiConfig(eta=0.5, max_iterations=2000)
        _, log = opi_train(world, belief, sensor, cfg,
                           np.random.default_rng(seed * 1000 + k))
        iters.append(log.iterations)
        if not log.converged:
            flags += 1
    return flags == 0, {"instances": n_instances, "nonconverged": flags,
                        "median_iters": int(np.median(iters))}


# -- traces: accounting and determinism ----------------------------------------------


@_timed("accounting-determinism")
def accounting_determinism_check(seed: int = 7):
    spec = ScenarioSpec(width=24, height=12, n_obstacles=8, radius=2.0,
                        sensor_range=7.0, sensor_noise=1.5,
                        n_environments=1, n_replicates=2, master_seed=seed)
    scen = build_replicates(spec)
    env = scen.environments[0]
    world = build_world(spec, env.centers)
    sensor = SensorModel(spec.sensor_noise, spec.sensor_range)
    ocfg = OpiConfig(max_iterations=120)
    rcfg = RolloutConfig(m_roll=6)
    mismatched = 0
    identity_bad = 0
    for pid in ("ts-greedy", "ts-drl", "ro-optimism", "penalty-rd"):
        for rep in range(2):
            outs = []
            for _ in range(2):
                belief = BeliefState(env.centers, spec.kernel)
                model, _ = train_policy(pid, world, belief, sensor, ocfg,
                                        np.random.default_rng(100))
                pol = make_policy(pid, model, sensor, rcfg, ocfg)
                tr = execute_episode(world, env.replicates[rep], belief, pol,
                                     sensor, rcfg, np.random.default_rng(55 + rep))
                total = sum(s.segment_cost for s in tr.steps) \
                    + sum(s.disambiguation[2] for s in tr.steps if s.disambiguation)
                if total != tr.total_raw:
                    identity_bad += 1
                outs.append("\n".join(trace_to_lines(tr, {"policy": pid, "rep": rep})))
            if outs[0] != outs[1]:
                mismatched += 1
    ok = mismatched == 0 and identity_bad == 0
    return ok, {"episodes": 8, "identity_violations": identity_bad,
                "nondeterministic": mismatched}


DEFAULT_CHECKS = (posterior_identity_check, submodularity_check,
                  pruning_safety_check, refinement_stability_check)

ALL_CHECKS = (posterior_identity_check, submodularity_check,
              decision_soundness_check, pruning_safety_check,
              refinement_stability_check, bonus_benefit_check,
              convergence_check, accounting_determinism_check)


def run_checks(checks=DEFAULT_CHECKS) -> list[CheckResult]:
    results = []
    for check in checks:
        res = check()
        print(res.line(), flush=True)
        results.append(res)
    return results
