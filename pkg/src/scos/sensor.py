"""Beta sensor model: noisy probability readings and their LLR encoding.

A reading of an obstacle is a Beta draw whose parameters depend on the true
status; the log-likelihood ratio of the two class densities is treated as a
noisy measurement of the obstacle's latent log-odds.  The Gaussian noise
variance attached to a reading is the variance of the LLR under the
equal-weight two-class mixture, precomputed numerically once per noise level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import betaln


class OutOfRangeError(ValueError):
    """Sensor reading requested beyond the model's range."""


class DomainError(ValueError):
    """Reading outside the open unit interval."""


@dataclass(frozen=True)
class SensorModel:
    """Two-class Beta sensor.

    noise_level in (0, 4): higher values separate the class means
    (alpha_true/8 vs alpha_false/8) further, i.e. a more discriminative
    sensor.  `range` is the detection radius measured to obstacle centers.
    """

    noise_level: float
    range: float

    def __post_init__(self):
        if not 0.0 < self.noise_level < 4.0:
            raise ValueError("noise_level must lie in (0, 4)")
        if self.range < 0:
            raise ValueError("range must be nonnegative")

    @property
    def alpha_true(self) -> float:
        return 4.0 + self.noise_level

    @property
    def beta_true(self) -> float:
        return 4.0 - self.noise_level

    @property
    def alpha_false(self) -> float:
        return 4.0 - self.noise_level

    @property
    def beta_false(self) -> float:
        return 4.0 + self.noise_level

    @property
    def noise_variance(self) -> float:
        return _llr_mixture_variance(self.noise_level)


@dataclass(frozen=True)
class Observation:
    obstacle_id: int
    reading: float | None      # None for out-of-range placeholders
    llr: float
    noise_var: float           # +inf marks a placeholder
    step: int = 0

    @property
    def is_placeholder(self) -> bool:
        return not math.isfinite(self.noise_var)


def llr(model: SensorModel, reading: float) -> float:
    """Exact Beta log-density ratio log f(r|true)/f(r|false).

    With the symmetric parameterization this reduces to
    2 * noise_level * logit(reading).
    """
    if not 0.0 < reading < 1.0:
        raise DomainError(f"reading {reading} outside (0, 1)")
    a_o, b_o = model.alpha_true, model.beta_true
    a_f, b_f = model.alpha_false, model.beta_false
    return (betaln(a_f, b_f) - betaln(a_o, b_o)
            + (a_o - a_f) * math.log(reading)
            + (b_o - b_f) * math.log1p(-reading))


def read_sensor(model: SensorModel, obstacle, status: int,
                rng: np.random.Generator, agent: tuple[float, float] | None = None) -> float:
    """One Beta draw from the class-conditional reading distribution."""
    if agent is not None:
        d = math.hypot(obstacle.center[0] - agent[0], obstacle.center[1] - agent[1])
        if d > model.range:
            raise OutOfRangeError(f"obstacle {obstacle.id} at distance {d:.2f} > {model.range}")
    if status:
        return float(rng.beta(model.alpha_true, model.beta_true))
    return float(rng.beta(model.alpha_false, model.beta_false))


@lru_cache(maxsize=64)
def _llr_mixture_variance(noise_level: float) -> float:
    """Variance of the LLR under the mixture 0.5 Beta_true + 0.5 Beta_false."""
    model = SensorModel(noise_level, 0.0)

    def beta_pdf(r, a, b):
        return math.exp((a - 1) * math.log(r) + (b - 1) * math.log1p(-r)
                        - betaln(a, b))

    def mix_pdf(r):
        return 0.5 * (beta_pdf(r, model.alpha_true, model.beta_true)
                      + beta_pdf(r, model.alpha_false, model.beta_false))

    m1, _ = integrate.quad(lambda r: llr(model, r) * mix_pdf(r), 0.0, 1.0, limit=200)
    m2, _ = integrate.quad(lambda r: llr(model, r) ** 2 * mix_pdf(r), 0.0, 1.0, limit=200)
    return m2 - m1 * m1


def observation_noise(model: SensorModel) -> float:
    return model.noise_variance


def observe_step(model: SensorModel, agent_vertex: tuple[int, int], obstacles,
                 belief, truth_status: np.ndarray, rng: np.random.Generator,
                 step: int = 0) -> list[Observation]:
    """Readings for every ambiguous obstacle within range of the agent.

    Out-of-range ambiguous obstacles yield infinite-noise placeholders so the
    observation list always covers the ambiguous set.  The range test is a
    closed comparison against the obstacle center.
    """
    out: list[Observation] = []
    sigma2 = model.noise_variance
    ax, ay = float(agent_vertex[0]), float(agent_vertex[1])
    for i in belief.ambiguous_ids:
        o = obstacles[int(i)]
        d = math.hypot(o.center[0] - ax, o.center[1] - ay)
        if d <= model.range:
            reading = read_sensor(model, o, int(truth_status[int(i)]), rng)
            out.append(Observation(int(i), reading, llr(model, reading), sigma2, step))
        else:
            out.append(Observation(int(i), None, 0.0, math.inf, step))
    return out
