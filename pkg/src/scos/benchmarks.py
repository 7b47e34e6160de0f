"""Scaled benchmark runs reproducing the qualitative policy orderings.

These drive the full policy set over seeded scenario matrices and report
paired per-environment cost differences with normal-approximation 95%
confidence half-widths.  A comparison is "confirmed" when its mean clears
the half-width, "inconclusive" when the interval straddles zero, and
"violated" when the interval lies on the wrong side.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

from .generate import ScenarioSpec, build_replicates
from .harness import (CellResult, RunPlan, aggregate, paired_difference,
                      persist_results, run_matrix)
from .mc_values import OpiConfig
from .policies import POLICY_IDS
from .rollout import RolloutConfig


def verdict(mean: float, halfwidth: float) -> str:
    if mean - halfwidth > 0:
        return "confirmed"
    if mean + halfwidth < 0:
        return "violated"
    return "inconclusive"


@dataclass
class Comparison:
    label: str
    mean: float
    halfwidth: float

    @property
    def verdict(self) -> str:
        return verdict(self.mean, self.halfwidth)

    def line(self) -> str:
        return (f"{self.label}: diff {self.mean:+.3f} +- {self.halfwidth:.3f} "
                f"[{self.verdict}]")


@dataclass
class BenchmarkConfig:
    envs: int = 15
    reps: int = 5
    scenario_seed: int = 2024
    run_seed: int = 9
    m_roll: int = 12
    train_iterations: int = 400
    workers: int = 1
    policies: tuple[str, ...] = POLICY_IDS

    def opi(self) -> OpiConfig:
        return OpiConfig(max_iterations=self.train_iterations)

    def rollout(self) -> RolloutConfig:
        return RolloutConfig(m_roll=self.m_roll)


def _spec(cfg: BenchmarkConfig, sensor_noise: float,
          sensor_range: float) -> ScenarioSpec:
    return ScenarioSpec(width=50, height=25, n_obstacles=20, radius=3.5,
                        sensor_range=sensor_range, sensor_noise=sensor_noise,
                        n_environments=cfg.envs, n_replicates=cfg.reps,
                        master_seed=cfg.scenario_seed)


def _run(cfg: BenchmarkConfig, sensor_noise: float, sensor_range: float,
         policies, coarsen: bool = False,
         out_dir: str | None = None) -> list[CellResult]:
    scenarios = build_replicates(_spec(cfg, sensor_noise, sensor_range))
    plan = RunPlan(scenarios=scenarios, policies=tuple(policies),
                   opi=cfg.opi(), rollout=cfg.rollout(),
                   run_seed=cfg.run_seed, coarsen=coarsen)
    return run_matrix(plan, out_dir=out_dir, parallelism=cfg.workers)


@dataclass
class OrderingReport:
    noise_effect: dict[str, Comparison] = field(default_factory=dict)
    ordering: list[Comparison] = field(default_factory=list)
    coarsening: Comparison | None = None
    mean_costs: dict[tuple[str, float], float] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = ["noise-level effect (cost at 0.35 minus cost at 2.5; want >= 0):"]
        out += [f"  {c.line()}" for c in self.noise_effect.values()]
        out.append("policy ordering at noise 0.35 (want >= 0):")
        out += [f"  {c.line()}" for c in self.ordering]
        if self.coarsening is not None:
            out.append("correlation-aware vs independence-coarsened (want >= 0):")
            out.append(f"  {self.coarsening.line()}")
        return out


def scaled_ordering_run(cfg: BenchmarkConfig,
                        out_dir: str | None = None) -> OrderingReport:
    """Grid 50x25, N=20, R=12.5, noise in {0.35, 2.5}: per-policy noise
    monotonicity, the ts-drl <= ro-optimism <= penalty-rd ordering at high
    noise, and the correlation-coarsening comparison for ts-greedy."""
    report = OrderingReport()
    by_noise = {}
    for lam in (0.35, 2.5):
        sub = os.path.join(out_dir, f"lam{lam}") if out_dir else None
        by_noise[lam] = _run(cfg, lam, 12.5, cfg.policies, out_dir=sub)
    for policy in cfg.policies:
        lo = [r for r in by_noise[0.35] if r.policy == policy]
        hi = [r for r in by_noise[2.5] if r.policy == policy]
        mean, hw = paired_difference(hi, lo)   # lo-noise cost minus hi-noise cost
        report.noise_effect[policy] = Comparison(f"{policy}", mean, hw)
        for lam in (0.35, 2.5):
            cells = [r for r in by_noise[lam] if r.policy == policy and not r.failed]
            report.mean_costs[(policy, lam)] = (
                sum(r.cost for r in cells) / len(cells))
    for a, b in (("ts-drl", "ro-optimism"), ("ro-optimism", "penalty-rd")):
        if a in cfg.policies and b in cfg.policies:
            mean, hw = paired_difference(
                [r for r in by_noise[0.35] if r.policy == a],
                [r for r in by_noise[0.35] if r.policy == b])
            report.ordering.append(Comparison(f"{a} <= {b}", mean, hw))
    if "ts-greedy" in cfg.policies:
        sub = os.path.join(out_dir, "coarsened") if out_dir else None
        coarse = _run(cfg, 0.35, 12.5, ("ts-greedy",), coarsen=True, out_dir=sub)
        mean, hw = paired_difference(
            [r for r in by_noise[0.35] if r.policy == "ts-greedy"], coarse)
        report.coarsening = Comparison("ts-greedy: coarsened minus correlated",
                                       mean, hw)
    return report


@dataclass
class MonotonicityReport:
    range_effect: dict[str, Comparison] = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = ["sensing-range effect (cost at R=10 minus cost at R=15; want >= 0):"]
        out += [f"  {c.line()}" for c in self.range_effect.values()]
        return out


def sensing_monotonicity_run(cfg: BenchmarkConfig, sensor_noise: float = 0.35,
                             out_dir: str | None = None) -> MonotonicityReport:
    """Same setup with R in {10, 15}: per policy, cost should not increase
    with the sensing range (paired per-environment comparison)."""
    report = MonotonicityReport()
    by_range = {}
    for rng_ in (10.0, 15.0):
        sub = os.path.join(out_dir, f"range{rng_:g}") if out_dir else None
        by_range[rng_] = _run(cfg, sensor_noise, rng_, cfg.policies, out_dir=sub)
    for policy in cfg.policies:
        short = [r for r in by_range[10.0] if r.policy == policy]
        wide = [r for r in by_range[15.0] if r.policy == policy]
        mean, hw = paired_difference(wide, short)   # short-range minus wide-range
        report.range_effect[policy] = Comparison(f"{policy}", mean, hw)
    return report
