"""Mutual information of prospective sensor bundles and the decision bonus.

For jointly Gaussian log-odds observed through independent Gaussian noise,
the information carried by a candidate observation set with covariance S is
0.5 * logdet(I + S / sigma^2).  The bonus applied to a decision discounts
that gain through a square-root transform of the episode's accumulated
information, so identical gains are worth less later in the traversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .belief import NumericalError


def mutual_information(cov: np.ndarray, noise_var: float) -> float:
    """0.5 * logdet(I + cov / noise_var); the empty set carries zero."""
    cov = np.atleast_2d(np.asarray(cov, dtype=np.float64))
    if cov.size == 0:
        return 0.0
    if noise_var <= 0:
        raise ValueError("noise variance must be positive")
    m = np.eye(len(cov)) + cov / noise_var
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("information matrix not positive definite") from exc
    return float(np.sum(np.log(np.diag(chol))))


@dataclass
class InfoLedger:
    """Per-traversal record of realized information.

    `gamma_scale` multiplies the squared value-spread when setting the bonus
    weight; `gamma_max` caps it against degenerate early spreads.
    """

    cumulative: float = 0.0
    gamma_scale: float = 1.0

    def bonus(self, candidate_mi: float, gamma: float) -> float:
        """Diminishing-returns bonus sqrt(gamma)(sqrt(I + S) - sqrt(S))."""
        if candidate_mi <= 0.0 or gamma <= 0.0:
            return 0.0
        s = self.cumulative
        return math.sqrt(gamma) * (math.sqrt(candidate_mi + s) - math.sqrt(s))

    def gamma_from_values(self, values, gamma_max: float = math.inf) -> float:
        """Bonus weight from the spread of candidate value estimates."""
        vals = np.asarray(list(values), dtype=np.float64)
        if len(vals) < 2:
            return 0.0
        gamma = self.gamma_scale * float(np.std(vals, ddof=0)) ** 2
        if math.isfinite(gamma_max):
            gamma = min(gamma, gamma_max)
        return max(gamma, 0.0)

    def record(self, realized_mi: float) -> None:
        self.cumulative += max(realized_mi, 0.0)


def info_bonus(ledger: InfoLedger, candidate_mi: float, gamma: float) -> float:
    return ledger.bonus(candidate_mi, gamma)


def in_range_ambiguous(world, belief_amb_ids, vertex: tuple[int, int],
                       sensor_range: float) -> np.ndarray:
    """Ambiguous obstacle ids whose centers lie within sensing range of a vertex."""
    ids = np.asarray(belief_amb_ids, dtype=np.int64)
    if len(ids) == 0:
        return ids
    vx, vy = float(vertex[0]), float(vertex[1])
    keep = [i for i in ids
            if math.hypot(world.obstacles[int(i)].center[0] - vx,
                          world.obstacles[int(i)].center[1] - vy) <= sensor_range]
    return np.asarray(keep, dtype=np.int64)
