"""Policy registry: maps policy ids to trainers and online deciders.

Two-stage policies (ts-*) pair an offline-trained value model with the
posterior-sampling rollout rule and fold realized steps back into the model
after every traversal step.  The ro-* and penalty-* baselines share the same
execution plumbing without a learned model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import heuristic_rollout_step, penalty_policy_step
from .belief import BeliefState
from .decisions import DecisionSet
from .dist_values import DistributionTable, GOAL_DIST, bellman_project
from .information import InfoLedger, in_range_ambiguous, mutual_information
from .mc_values import OpiConfig, ValueTable, mc_update
from .rollout import EpisodeTrace, RolloutConfig, StepRecord, rollout_decide
from .sensor import SensorModel
from .training import drl_train, opi_train
from .world import LatticeWorld

POLICY_IDS = ("ts-greedy", "ts-eps", "ts-softmax", "ts-drl",
              "ro-optimism", "ro-hindsight", "penalty-rd", "penalty-dt")

_TS_EXPLORATION = {"ts-greedy": "greedy", "ts-eps": "eps_greedy",
                   "ts-softmax": "softmax"}


class Policy:
    """Shared no-op hooks; subclasses override decide()."""

    name = "policy"

    def start_episode(self, world: LatticeWorld, belief: BeliefState) -> None:
        pass

    def decide(self, world, belief, v_t, dset: DecisionSet, t, rng):
        raise NotImplementedError

    def observe_step(self, step: StepRecord) -> None:
        pass

    def finish_episode(self, trace: EpisodeTrace) -> None:
        pass


class PenaltyPolicy(Policy):
    def __init__(self, variant: str):
        self.variant = variant
        self.name = f"penalty-{variant}"

    def decide(self, world, belief, v_t, dset, t, rng):
        return penalty_policy_step(world, belief, v_t, self.variant), {}


class HeuristicRolloutPolicy(Policy):
    def __init__(self, kind: str, m_roll: int):
        self.kind = kind
        self.m_roll = m_roll
        self.name = f"ro-{'optimism' if kind == 'optimistic' else 'hindsight'}"

    def decide(self, world, belief, v_t, dset, t, rng):
        idx, _ = heuristic_rollout_step(world, belief, v_t, dset, self.kind,
                                        self.m_roll, rng)
        return dset.candidates[idx], {}


def _next_state(world: LatticeWorld, step: StepRecord):
    return world.goal if step.decision_kind == "goal" else step.stopping_vertex


def apply_step_update(model, kind: str, world: LatticeWorld, step: StepRecord) -> None:
    """Per-step base update: distributional Bellman projection."""
    if kind != "drl":
        return
    dist = model.ensure(step.vertex)
    nxt = model.ensure(_next_state(world, step))
    bellman_project(dist, nxt, step.adjusted_cost)


def apply_final_update(model, kind: str, steps: list[StepRecord],
                       reached_goal: bool) -> None:
    """End-of-traversal base update from cumulative adjusted returns."""
    if not reached_goal or not steps:
        return
    total = 0.0
    visited = []
    for s in reversed(steps):
        total += s.adjusted_cost
        visited.append((s.vertex, total))
    visited.reverse()
    if kind == "drl":
        seen = set()
        for vertex, cum in visited:
            if vertex in seen or vertex == model.goal:
                continue
            seen.add(vertex)
            model.refine(vertex, cum)
    else:
        mc_update(model, visited)


def replay_episode_updates(model, kind: str, world: LatticeWorld,
                           trace: EpisodeTrace) -> None:
    """Re-apply a trace's base updates; used to audit update determinism."""
    for step in trace.steps:
        apply_step_update(model, kind, world, step)
    apply_final_update(model, kind, trace.steps, trace.reached_goal)


class TwoStagePolicy(Policy):
    """Rollout over a trained base model with online incremental updates."""

    def __init__(self, policy_id: str, model, sensor: SensorModel,
                 rollout_cfg: RolloutConfig, gamma_scale: float = 1.0,
                 coarsen: bool = False):
        self.name = policy_id
        self.kind = "drl" if policy_id == "ts-drl" else "point"
        self.model = model
        self.sensor = sensor
        self.cfg = rollout_cfg
        self.gamma_scale = gamma_scale
        self.coarsen = coarsen
        self.ledger = InfoLedger(gamma_scale=gamma_scale)

    def start_episode(self, world, belief):
        self.ledger = InfoLedger(gamma_scale=self.gamma_scale)

    def _candidate_mi(self, world, belief, vertex) -> float:
        ids = in_range_ambiguous(world, belief.ambiguous_ids, vertex,
                                 self.sensor.range)
        if len(ids) == 0:
            return 0.0
        cov = belief.K_pos[np.ix_(ids, ids)]
        if self.coarsen:
            cov = np.diag(np.diag(cov))
        return mutual_information(cov, self.sensor.noise_variance)

    def decide(self, world, belief, v_t, dset, t, rng):
        idx, estimates = rollout_decide(world, belief, v_t, dset,
                                        self.model.value, t, self.cfg, rng,
                                        independent=self.coarsen)
        cand = dset.candidates[idx]
        gamma_max = dset.exploit_cost if math.isfinite(dset.exploit_cost) else math.inf
        gamma = self.ledger.gamma_from_values(
            [c.immediate_cost + e for c, e in zip(dset.candidates, estimates)],
            gamma_max)
        mi = 0.0 if cand.is_goal else self._candidate_mi(world, belief,
                                                         cand.stopping_vertex)
        bonus = self.ledger.bonus(mi, gamma)
        self.ledger.record(mi)
        self._world = world
        return cand, {"info_bonus": bonus, "estimates": estimates}

    def observe_step(self, step: StepRecord) -> None:
        apply_step_update(self.model, self.kind, self._world, step)

    def finish_episode(self, trace: EpisodeTrace) -> None:
        apply_final_update(self.model, self.kind, trace.steps, trace.reached_goal)


def train_policy(policy_id: str, world: LatticeWorld, belief: BeliefState,
                 sensor: SensorModel, cfg: OpiConfig, rng: np.random.Generator,
                 coarsen: bool = False):
    """Offline stage for the policy; (None, None) when the policy has none."""
    if policy_id == "ts-drl":
        return drl_train(world, belief, sensor, cfg, rng, coarsen=coarsen)
    if policy_id in _TS_EXPLORATION:
        import dataclasses
        cfg = dataclasses.replace(cfg, exploration=_TS_EXPLORATION[policy_id])
        return opi_train(world, belief, sensor, cfg, rng, coarsen=coarsen)
    return None, None


def make_policy(policy_id: str, model, sensor: SensorModel,
                rollout_cfg: RolloutConfig, opi_cfg: OpiConfig,
                coarsen: bool = False) -> Policy:
    if policy_id not in POLICY_IDS:
        raise ValueError(f"unknown policy id {policy_id!r}")
    if policy_id.startswith("ts-"):
        if model is None:
            raise ValueError(f"{policy_id} requires a trained model")
        return TwoStagePolicy(policy_id, model, sensor, rollout_cfg,
                              gamma_scale=opi_cfg.gamma_scale, coarsen=coarsen)
    if policy_id == "ro-optimism":
        return HeuristicRolloutPolicy("optimistic", rollout_cfg.m_roll)
    if policy_id == "ro-hindsight":
        return HeuristicRolloutPolicy("hindsight", rollout_cfg.m_roll)
    return PenaltyPolicy(policy_id.split("-", 1)[1])
