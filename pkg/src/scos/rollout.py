"""Online traversal executor and the rollout decision rule.

A traversal alternates macro-decisions with belief updates: identify
candidates, prune, decide, walk the chosen obstacle-free segment, pay to
disambiguate on arrival, collect in-range sensor readings, update the
posterior, and let the policy fold the realized step back into its base
model.  Candidate scoring averages base-policy continuations over posterior
environment samples; at the first step the pre-trained value model is read
directly.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .belief import BeliefState
from .decisions import (Candidate, DecisionSet, NoCandidatesError, SimPartition,
                        identify_decisions, prune_search_space)
from .sensor import Observation, SensorModel, observe_step
from .world import LatticeWorld

Vertex = tuple[int, int]


@dataclass
class RolloutConfig:
    m_roll: int = 32
    step_cap_factor: int = 6
    prune: bool = True


@dataclass
class StepRecord:
    t: int
    vertex: Vertex
    decision_kind: str               # "obstacle" or "goal"
    obstacle_id: int | None
    stopping_vertex: Vertex
    segment: tuple[Vertex, ...]
    segment_cost: float
    disambiguation: tuple[int, int, float] | None   # (id, outcome, cost)
    observations: list[Observation]
    info_bonus: float
    adjusted_cost: float
    belief_hash: str
    discarded: list[int] = field(default_factory=list)


@dataclass
class EpisodeTrace:
    steps: list[StepRecord]
    total_raw: float
    total_adjusted: float
    length_cost: float
    disamb_cost: float
    reached_goal: bool
    failed: bool
    failure_reason: str | None = None
    online_seconds: float = 0.0
    offline_seconds: float = 0.0


class EpisodeFailure(RuntimeError):
    pass


def simulate_base_policy(world: LatticeWorld, part: SimPartition, start: Vertex,
                         sampled: np.ndarray, value_fn, step_cap: int) -> float:
    """Raw cost of running the greedy base policy to the goal in a sampled
    world.  Dead ends and cap hits settle with the exploitation cost from the
    stopping point (or a diameter penalty when even that is unreachable)."""
    v = start
    total = 0.0
    diameter = 4.0 * (world.width + world.height)
    for _ in range(step_cap):
        if v == world.goal:
            return total
        try:
            dset = identify_decisions(world, part, v)
        except NoCandidatesError:
            return total + diameter
        best, best_q = None, math.inf
        for cand in dset.candidates:
            q = cand.immediate_cost + (0.0 if cand.is_goal
                                       else value_fn(cand.stopping_vertex))
            if q < best_q - 1e-12:
                best, best_q = cand, q
        total += best.immediate_cost
        if best.is_goal:
            return total
        part = part.reveal(best.obstacle_id, int(sampled[best.obstacle_id]))
        v = best.stopping_vertex
    # cap hit: finish by pure exploitation
    f = world.field(part.true_mask | part.amb_mask, 0, world.to_index(world.goal))
    rest = float(f.dist[world.to_index(v)])
    return total + (rest if math.isfinite(rest) else diameter)


def rollout_decide(world: LatticeWorld, belief: BeliefState, v_t: Vertex,
                   dset: DecisionSet, value_fn, t: int, cfg: RolloutConfig,
                   rng: np.random.Generator, independent: bool = False):
    """Pick the candidate minimizing immediate cost plus the estimated base
    continuation.

    At t=0 the continuation is the pre-trained value at the stopping vertex;
    afterwards it is the average base-policy cost over m_roll environments
    sampled from the posterior.  m_roll=0 degenerates to the t=0 rule.
    Discarded obstacles are treated as traversable inside the simulations and
    are never disambiguated there.  Returns (index, per-candidate estimates).
    """
    cands = dset.candidates
    if len(cands) == 1:
        est = [0.0 if cands[0].is_goal else value_fn(cands[0].stopping_vertex)]
        return 0, est
    if t == 0 or cfg.m_roll == 0:
        estimates = [0.0 if c.is_goal else value_fn(c.stopping_vertex) for c in cands]
    else:
        part0 = SimPartition(belief.true_mask, belief.amb_mask)
        if dset.discarded:
            part0 = part0.drop_ambiguous(dset.discarded)
        samples = [belief.sample_environment(rng, independent=independent)
                   for _ in range(cfg.m_roll)]
        step_cap = cfg.step_cap_factor * (world.width + world.height)
        estimates = []
        for cand in cands:
            if cand.is_goal:
                estimates.append(0.0)
                continue
            acc = 0.0
            for z in samples:
                part = part0.reveal(cand.obstacle_id, int(z[cand.obstacle_id]))
                acc += simulate_base_policy(world, part, cand.stopping_vertex,
                                            z, value_fn, step_cap)
            estimates.append(acc / len(samples))
    scores = [c.immediate_cost + e for c, e in zip(cands, estimates)]
    best = min(range(len(cands)), key=lambda i: (scores[i], i))
    return best, estimates


def execute_episode(world: LatticeWorld, truth_status: np.ndarray,
                    belief: BeliefState, policy, sensor: SensorModel,
                    cfg: RolloutConfig, rng: np.random.Generator) -> EpisodeTrace:
    """Run one traversal of `policy` against the true statuses."""
    t_start = time.perf_counter()
    policy.start_episode(world, belief)
    v = world.start
    steps: list[StepRecord] = []
    length_cost = 0.0
    disamb_cost = 0.0
    total_adjusted = 0.0
    failed = False
    reason = None
    step_cap = cfg.step_cap_factor * (world.width + world.height)
    t = 0
    while v != world.goal:
        if t >= step_cap:
            failed, reason = True, "STEP_CAP_EXCEEDED"
            break
        try:
            dset = identify_decisions(world, belief, v)
        except NoCandidatesError:
            failed, reason = True, "NO_CANDIDATES"
            break
        discarded = prune_search_space(world, belief, v, dset) if cfg.prune else []
        cand, info = policy.decide(world, belief, v, dset, t, rng)
        seg_cost = cand.segment_length
        length_cost += seg_cost
        disamb = None
        raw = seg_cost
        if not cand.is_goal:
            outcome = int(truth_status[cand.obstacle_id])
            c_x = world.obstacles[cand.obstacle_id].disambiguation_cost
            disamb = (cand.obstacle_id, outcome, c_x)
            disamb_cost += c_x
            raw += c_x
            belief = belief.apply_disambiguation(cand.obstacle_id, outcome)
        v = cand.stopping_vertex if not cand.is_goal else world.goal
        observations: list[Observation] = []
        if v != world.goal:
            observations = observe_step(sensor, v, world.obstacles, belief,
                                        truth_status, rng, step=t)
            belief = belief.with_observations(observations)
        bonus = info.get("info_bonus", 0.0)
        adjusted = raw - bonus
        total_adjusted += adjusted
        steps.append(StepRecord(
            t=t, vertex=dset.origin, decision_kind="goal" if cand.is_goal else "obstacle",
            obstacle_id=cand.obstacle_id, stopping_vertex=cand.stopping_vertex,
            segment=cand.segment, segment_cost=seg_cost, disambiguation=disamb,
            observations=observations, info_bonus=bonus, adjusted_cost=adjusted,
            belief_hash=belief.snapshot_hash(), discarded=list(discarded)))
        policy.observe_step(steps[-1])
        t += 1
    trace = EpisodeTrace(
        steps=steps, total_raw=length_cost + disamb_cost,
        total_adjusted=total_adjusted, length_cost=length_cost,
        disamb_cost=disamb_cost, reached_goal=(v == world.goal and not failed),
        failed=failed, failure_reason=reason,
        online_seconds=time.perf_counter() - t_start)
    policy.finish_episode(trace)
    return trace


# -- trace persistence -----------------------------------------------------------


def _obs_json(o: Observation) -> dict:
    return {"obstacle": o.obstacle_id,
            "reading": o.reading,
            "llr": o.llr if math.isfinite(o.noise_var) else None,
            "noise_var": o.noise_var if math.isfinite(o.noise_var) else None}


def trace_to_lines(trace: EpisodeTrace, header: dict) -> list[str]:
    """JSON-lines encoding: header, one record per step, then a summary.

    Wall times are intentionally kept out so identical seeds produce
    byte-identical files.
    """
    lines = [json.dumps({"header": header}, sort_keys=True)]
    for s in trace.steps:
        rec = {
            "t": s.t, "vertex": list(s.vertex), "kind": s.decision_kind,
            "obstacle": s.obstacle_id, "stop": list(s.stopping_vertex),
            "segment": [list(v) for v in s.segment],
            "segment_cost": s.segment_cost,
            "disambiguation": (None if s.disambiguation is None else
                               {"obstacle": s.disambiguation[0],
                                "outcome": s.disambiguation[1],
                                "cost": s.disambiguation[2]}),
            "observations": [_obs_json(o) for o in s.observations],
            "info_bonus": s.info_bonus,
            "adjusted_cost": s.adjusted_cost,
            "belief": s.belief_hash,
            "discarded": s.discarded,
        }
        lines.append(json.dumps(rec, sort_keys=True))
    summary = {"summary": {
        "total_raw": trace.total_raw, "total_adjusted": trace.total_adjusted,
        "length_cost": trace.length_cost, "disamb_cost": trace.disamb_cost,
        "steps": len(trace.steps), "reached_goal": trace.reached_goal,
        "failed": trace.failed, "failure_reason": trace.failure_reason}}
    lines.append(json.dumps(summary, sort_keys=True))
    return lines


def write_trace(path, trace: EpisodeTrace, header: dict) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(trace_to_lines(trace, header)))
        fh.write("\n")


def read_trace_summary(path) -> dict:
    with open(path) as fh:
        last = [line for line in fh if line.strip()][-1]
    return json.loads(last)["summary"]
