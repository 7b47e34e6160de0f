"""Gaussian random field belief over obstacle blockage log-odds.

The latent log-odds vector carries a zero-mean Gaussian prior with squared
exponential kernel.  Noisy log-likelihood-ratio observations (diagonal
Gaussian noise, infinite variance for unobserved obstacles) yield an exact
Gaussian posterior computed in observed-subset (Schur) form, which handles
infinite noise without large-number substitutes.  Posterior means map to
blockage probabilities through the logistic function.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

# Status codes for the belief partition.
AMBIGUOUS = -1
STATUS_FALSE = 0
STATUS_TRUE = 1

# A disambiguation enters the Gaussian machinery as a pseudo-observation at
# +/- LOGODDS_CAP with standard deviation DISAMB_NOISE.
LOGODDS_CAP = 10.0
DISAMB_NOISE = 1e-3     # sigma; variance 1e-6

JITTER_SCALE = 1e-8


class NotAmbiguousError(ValueError):
    """Disambiguation requested for an obstacle whose status is known."""


class NumericalError(RuntimeError):
    """A posterior solve or factorization failed."""


@dataclass(frozen=True)
class Kernel:
    """Squared exponential kernel k(a,b) = sigma_f^2 exp(-|a-b|^2 / (2 l^2))."""

    sigma_f: float = 1.5
    length_scale: float = 4.0

    def __post_init__(self):
        if self.sigma_f <= 0 or self.length_scale <= 0:
            raise ValueError("kernel parameters must be positive")


def kernel_matrix(kernel: Kernel, centers: np.ndarray) -> np.ndarray:
    """Prior covariance over obstacle centers, with diagonal jitter."""
    centers = np.asarray(centers, dtype=np.float64)
    d2 = np.sum((centers[:, None, :] - centers[None, :, :]) ** 2, axis=-1)
    k = kernel.sigma_f**2 * np.exp(-d2 / (2.0 * kernel.length_scale**2))
    k[np.diag_indices_from(k)] += JITTER_SCALE * kernel.sigma_f**2
    return k


def to_probabilities(mu: np.ndarray) -> np.ndarray:
    """Elementwise logistic transform, stable for large |mu|."""
    mu = np.asarray(mu, dtype=np.float64)
    out = np.empty_like(mu)
    pos = mu >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-mu[pos]))
    e = np.exp(mu[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def posterior(K: np.ndarray, y_obs: np.ndarray, noise_var: np.ndarray):
    """Posterior mean and covariance of the latent log-odds.

    `noise_var` is the diagonal observation noise; entries of +inf drop the
    corresponding observation exactly.  With A the observed subset:
        mu  = K[:,A] (K[A,A] + Sigma_A)^-1 y_A
        Kp  = K - K[:,A] (K[A,A] + Sigma_A)^-1 K[A,:]
    which agrees with the precision-form posterior on A.
    """
    n = K.shape[0]
    y_obs = np.asarray(y_obs, dtype=np.float64)
    noise_var = np.asarray(noise_var, dtype=np.float64)
    obs = np.isfinite(noise_var)
    if not obs.any():
        return np.zeros(n), K.copy()
    A = np.nonzero(obs)[0]
    S = K[np.ix_(A, A)] + np.diag(noise_var[A])
    kA = K[:, A]
    try:
        sol = np.linalg.solve(S, np.column_stack([y_obs[A], kA.T]))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError("posterior solve failed") from exc
    mu = kA @ sol[:, 0]
    k_pos = K - kA @ sol[:, 1:]
    return mu, k_pos


class BeliefState:
    """Partitioned obstacle belief with a GRF posterior over log-odds.

    Value semantics: every update returns a new state, so snapshots are safe
    to keep and concurrent readers never see partial updates.  Per obstacle
    the evidence is the running LLR sum with effective noise sigma^2 / m
    after m readings (conditionally independent readings accumulate
    additively on the log-odds scale); a disambiguation adds a near-certain
    pseudo-observation that dominates by precision.  The posterior is
    recomputed from these sufficient statistics, so one-at-a-time and
    batched conditioning agree exactly.
    """

    def __init__(self, centers: np.ndarray, kernel: Kernel,
                 status: np.ndarray | None = None,
                 llr_sum: np.ndarray | None = None,
                 llr_count: np.ndarray | None = None,
                 reading_var: np.ndarray | None = None,
                 disamb_sign: np.ndarray | None = None,
                 prior: np.ndarray | None = None):
        self.centers = np.asarray(centers, dtype=np.float64)
        self.n = len(self.centers)
        self.kernel = kernel
        self.K = prior if prior is not None else kernel_matrix(kernel, self.centers)
        self.status = (status if status is not None
                       else np.full(self.n, AMBIGUOUS, dtype=np.int8))
        self.llr_sum = llr_sum if llr_sum is not None else np.zeros(self.n)
        self.llr_count = (llr_count if llr_count is not None
                          else np.zeros(self.n, dtype=np.int64))
        self.reading_var = (reading_var if reading_var is not None
                            else np.full(self.n, math.inf))
        self.disamb_sign = (disamb_sign if disamb_sign is not None
                            else np.zeros(self.n, dtype=np.int8))
        self._recompute()

    def _recompute(self):
        y, noise = effective_observations(self.llr_sum, self.llr_count,
                                          self.reading_var, self.disamb_sign)
        self.mu_pos, self.K_pos = posterior(self.K, y, noise)
        self.rho = to_probabilities(self.mu_pos)

    # -- partition views ------------------------------------------------------

    @property
    def ambiguous_ids(self) -> np.ndarray:
        return np.nonzero(self.status == AMBIGUOUS)[0]

    @property
    def true_ids(self) -> np.ndarray:
        return np.nonzero(self.status == STATUS_TRUE)[0]

    @property
    def false_ids(self) -> np.ndarray:
        return np.nonzero(self.status == STATUS_FALSE)[0]

    @property
    def true_mask(self) -> int:
        return int(sum(1 << int(i) for i in self.true_ids))

    @property
    def amb_mask(self) -> int:
        return int(sum(1 << int(i) for i in self.ambiguous_ids))

    def _clone(self) -> "BeliefState":
        return BeliefState(self.centers, self.kernel, self.status.copy(),
                           self.llr_sum.copy(), self.llr_count.copy(),
                           self.reading_var.copy(), self.disamb_sign.copy(),
                           prior=self.K)

    # -- updates ---------------------------------------------------------------

    def with_observations(self, observations) -> "BeliefState":
        """Fold a batch of LLR observations in; infinite-noise entries are no-ops."""
        new = self._clone()
        changed = False
        for obs in observations:
            if not math.isfinite(obs.noise_var):
                continue
            i = obs.obstacle_id
            new.llr_sum[i] += obs.llr
            new.llr_count[i] += 1
            new.reading_var[i] = obs.noise_var
            changed = True
        if changed:
            new._recompute()
        return new

    def apply_disambiguation(self, obstacle_id: int, revealed: int) -> "BeliefState":
        """Move an obstacle to the known partition after paying to reveal it.

        A near-certain pseudo-observation at +/-LOGODDS_CAP is folded in so
        correlated neighbors shift toward the revealed status.
        """
        if self.status[obstacle_id] != AMBIGUOUS:
            raise NotAmbiguousError(f"obstacle {obstacle_id} already revealed")
        new = self._clone()
        new.status[obstacle_id] = STATUS_TRUE if revealed else STATUS_FALSE
        new.disamb_sign[obstacle_id] = 1 if revealed else -1
        new._recompute()
        return new

    # -- sampling ---------------------------------------------------------------

    def sample_environment(self, rng: np.random.Generator,
                           independent: bool = False) -> np.ndarray:
        """Draw a full status vector from the posterior (Bernoulli over
        logistic-transformed latent draws); revealed obstacles keep their
        status.  `independent` coarsens the joint to its marginals."""
        z = self.status.copy()
        amb = self.ambiguous_ids
        if len(amb) == 0:
            return z
        mu = self.mu_pos[amb]
        cov = self.K_pos[np.ix_(amb, amb)]
        if independent:
            sd = np.sqrt(np.maximum(np.diag(cov), 0.0))
            y = mu + sd * rng.standard_normal(len(amb))
        else:
            y = mu + _chol(cov) @ rng.standard_normal(len(amb))
        p = to_probabilities(y)
        z[amb] = (rng.random(len(amb)) < p).astype(np.int8)
        return z

    # -- serialization ------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "ambiguous": [int(i) for i in self.ambiguous_ids],
            "true": [int(i) for i in self.true_ids],
            "false": [int(i) for i in self.false_ids],
            "mu_pos": [float(x) for x in self.mu_pos],
            "var_pos": [float(x) for x in np.diag(self.K_pos)],
            "rho": [float(x) for x in self.rho],
        }

    def snapshot_hash(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def effective_observations(llr_sum: np.ndarray, llr_count: np.ndarray,
                           reading_var: np.ndarray,
                           disamb_sign: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Collapse per-obstacle evidence into one Gaussian observation each.

    Sensor evidence is (sum of LLRs, noise sigma^2/m); a disambiguation is
    (+/-LOGODDS_CAP, DISAMB_NOISE^2); both blocks combine by precision.
    Obstacles without evidence get infinite noise.
    """
    n = len(llr_sum)
    y = np.zeros(n)
    noise = np.full(n, math.inf)
    for i in range(n):
        prec = 0.0
        num = 0.0
        if llr_count[i] > 0:
            var = reading_var[i] / llr_count[i]
            prec += 1.0 / var
            num += llr_sum[i] / var
        if disamb_sign[i] != 0:
            var = DISAMB_NOISE**2
            prec += 1.0 / var
            num += disamb_sign[i] * LOGODDS_CAP / var
        if prec > 0.0:
            y[i] = num / prec
            noise[i] = 1.0 / prec
    return y, noise


def _chol(cov: np.ndarray) -> np.ndarray:
    """Cholesky factor with one jitter retry before giving up."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        bump = cov + 1e-6 * max(np.max(np.diag(cov)), 1.0) * np.eye(len(cov))
        try:
            return np.linalg.cholesky(bump)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("posterior covariance not factorizable") from exc


def sample_environment(belief: BeliefState, rng: np.random.Generator,
                       independent: bool = False) -> np.ndarray:
    return belief.sample_environment(rng, independent=independent)
