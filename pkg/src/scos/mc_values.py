"""Point-estimate value learning: table, Monte Carlo updates, exploration.

State keys are stopping vertices (disambiguation vertices, the start, and
the goal).  The running-mean update with stepsize 1/N makes each entry the
arithmetic mean of its observed information-adjusted returns; the goal is
pinned at zero.  Unvisited states fall back to an optimistic distance
heuristic supplied at construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

Vertex = tuple[int, int]


@dataclass
class OpiConfig:
    """Knobs for optimistic policy iteration.

    exploration is one of "greedy", "eps_greedy", "softmax"; thompson
    exploration belongs to the distributional learner and ignores these.
    """

    eta: float = 0.5
    max_iterations: int = 2000
    min_iterations: int = 10
    exploration: str = "greedy"
    eps0: float = 0.2
    eps_decay: float = 0.95
    softmax_beta: float = 1.0
    gamma_scale: float = 1.0
    support_spacing: float = 1.0     # distributional support grid
    step_cap_factor: int = 4         # trajectory cap = factor * (width + height)

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if not 0.0 <= self.eps0 <= 1.0:
            raise ValueError("eps0 must lie in [0, 1]")
        if self.softmax_beta <= 0:
            raise ValueError("softmax beta must be positive")


class ValueTable:
    """Vertex-keyed value estimates with visit counts."""

    def __init__(self, goal: Vertex, default_fn=None):
        self.goal = goal
        self.values: dict[Vertex, float] = {}
        self.counts: dict[Vertex, int] = {}
        self.default_fn = default_fn or (lambda v: 0.0)

    def value(self, vertex: Vertex) -> float:
        if vertex == self.goal:
            return 0.0
        if vertex in self.values:
            return self.values[vertex]
        return float(self.default_fn(vertex))

    def visits(self, vertex: Vertex) -> int:
        return self.counts.get(vertex, 0)

    def copy(self) -> "ValueTable":
        t = ValueTable(self.goal, self.default_fn)
        t.values = dict(self.values)
        t.counts = dict(self.counts)
        return t

    def to_json(self) -> dict:
        return {
            "kind": "point",
            "goal": list(self.goal),
            "entries": [
                {"vertex": list(v), "value": self.values[v], "visits": self.counts[v]}
                for v in sorted(self.values)
            ],
        }


def mc_update(table: ValueTable, trajectory: list[tuple[Vertex, float]]) -> ValueTable:
    """First-visit Monte Carlo update from (state, cumulative adjusted cost)
    pairs; all visited states update simultaneously.  Returns the table."""
    seen: set[Vertex] = set()
    for vertex, cum_cost in trajectory:
        if vertex in seen or vertex == table.goal:
            continue
        seen.add(vertex)
        n = table.counts.get(vertex, 0) + 1
        old = table.values.get(vertex, 0.0)
        table.counts[vertex] = n
        table.values[vertex] = (1.0 - 1.0 / n) * old + cum_cost / n
    return table


def improve_policy(q_values, exploration: str, rng: np.random.Generator,
                   step: int, cfg: OpiConfig) -> int:
    """Pick a candidate index from adjusted scores q = C_adj + V(s').

    greedy: argmin with index tie-break; eps_greedy: greedy with probability
    1 - eps0 * decay^step, otherwise uniform over the non-greedy candidates;
    softmax: probabilities proportional to exp(-beta * q).
    """
    q = np.asarray(list(q_values), dtype=np.float64)
    greedy = int(np.argmin(q))
    if len(q) == 1 or exploration == "greedy":
        return greedy
    if exploration == "eps_greedy":
        eps = cfg.eps0 * cfg.eps_decay**step
        if rng.random() < eps:
            others = [i for i in range(len(q)) if i != greedy]
            return int(others[rng.integers(len(others))])
        return greedy
    if exploration == "softmax":
        logits = -cfg.softmax_beta * q
        logits -= logits.max()
        p = np.exp(logits)
        p /= p.sum()
        return int(rng.choice(len(q), p=p))
    raise ValueError(f"unknown exploration strategy {exploration!r}")


def save_table(path, table: ValueTable, meta: dict) -> None:
    payload = {"meta": meta, "model": table.to_json()}
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")
