"""Bootstrap particle filter: beliefs, perfect carries, and tracking error.

The belief over the hidden state is a weighted particle set. Propagation uses
the environment's noise-free transition prediction plus Gaussian proposal
noise; weighting uses the environment's emission log-likelihood. Resampling is
systematic, gated by effective sample size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import Array

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterConfig:
    n_init: int = 512
    n_run: int = 128
    proposal_scale: float = 0.03
    # Observation-noise scale the estimator assumes. The default is the
    # baseline (clear-conditions) scale: a tracker does not know where its
    # sensors degrade, which is what makes degraded regions dangerous.
    # None defers to the environment's own emission model.
    emission_scale: float | None = 0.03
    resample_threshold: float = 0.5  # fraction of n_run

    def __post_init__(self):
        if self.n_init < 1 or self.n_run < 1:
            raise ValueError("particle counts must be >= 1")
        if self.proposal_scale <= 0:
            raise ValueError("proposal_scale must be > 0")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold must be in (0, 1]")


@dataclass(frozen=True)
class ParticleBelief:
    """Weighted particle set; treat as immutable."""

    particles: Array  # (n, state_dim)
    weights: Array  # (n,)

    def __post_init__(self):
        object.__setattr__(self, "particles", np.asarray(self.particles, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if len(self.particles) != len(self.weights):
            raise ValueError("particles and weights must have equal length")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1 within 1e-9")

    def __len__(self) -> int:
        return len(self.particles)


def init_perfect_carry(state: Array, n: int) -> ParticleBelief:
    """Belief that deterministically identifies `state`: n identical
    particles with uniform weights."""
    if n < 1:
        raise ValueError("n must be >= 1")
    state = np.asarray(state, dtype=float)
    return ParticleBelief(np.tile(state, (n, 1)), np.full(n, 1.0 / n))


def point_estimate(belief: ParticleBelief) -> Array:
    return belief.weights @ belief.particles


def tracking_error(belief: ParticleBelief, true_state: Array, diff=None) -> float:
    """Weight-averaged squared distance between particles and the true state.

    `diff` overrides plain subtraction for state spaces with wrapped
    coordinates.
    """
    true_state = np.asarray(true_state, dtype=float)
    d = belief.particles - true_state if diff is None else diff(belief.particles, true_state)
    return float(belief.weights @ np.sum(d * d, axis=-1))


def effective_sample_size(weights: Array) -> float:
    return float(1.0 / np.sum(np.asarray(weights) ** 2))


def systematic_resample(weights: Array, n_out: int, rng: np.random.Generator) -> Array:
    """Indices of a systematic resample: one uniform offset, n_out evenly
    spaced positions against the cumulative weights."""
    positions = (rng.uniform() + np.arange(n_out)) / n_out
    cumulative = np.cumsum(np.asarray(weights, dtype=float))
    cumulative[-1] = 1.0  # guard against rounding at the top end
    return np.searchsorted(cumulative, positions, side="right")


# exp(x) underflows to 0 below this; the divergence fallback triggers when
# every particle's emission likelihood is numerically zero.
_LOG_TINY = float(np.log(np.finfo(float).tiny))


class ParticleFilter:
    """Bootstrap filter bound to one environment and one configuration."""

    def __init__(self, env, config: FilterConfig | None = None):
        self.env = env
        self.config = config or FilterConfig()
        self.divergence_count = 0

    def init_perfect(self, state: Array) -> ParticleBelief:
        return init_perfect_carry(state, self.config.n_run)

    def init_from_prior(self, first_obs: Array, rng: np.random.Generator) -> ParticleBelief:
        """Draw n_init particles from the environment prior and weight them by
        the likelihood of the first observation."""
        particles = self.env.sample_prior_states(self.config.n_init, rng)
        logw = self.env.emission_logpdf(first_obs, particles, scale=self.config.emission_scale)
        return ParticleBelief(particles, _normalise(logw))

    def init_belief(self, init_state, first_obs, rng, mode: str = "perfect") -> ParticleBelief:
        if mode == "perfect":
            return self.init_perfect(init_state)
        if mode == "prior":
            return self.init_from_prior(first_obs, rng)
        raise ValueError(f"unknown belief init mode {mode!r}")

    def step(self, belief: ParticleBelief, control: Array, obs: Array,
             rng: np.random.Generator) -> ParticleBelief:
        """One predict-update-resample cycle; returns a new belief."""
        cfg = self.config
        propagated = self.env.transition_mean(belief.particles, control)
        propagated = propagated + rng.normal(0.0, cfg.proposal_scale, size=propagated.shape)

        loglik = self.env.emission_logpdf(obs, propagated, scale=cfg.emission_scale)
        best = np.max(loglik)
        if not np.isfinite(best) or best < _LOG_TINY:
            # Every particle has numerically zero likelihood: keep the cloud
            # alive with uniform weights so the rollout can record the failure.
            self.divergence_count += 1
            level = logging.WARNING if self.divergence_count == 1 else logging.DEBUG
            log.log(level, "particle filter divergence: all emission likelihoods "
                           "underflowed (event %d)", self.divergence_count)
            weights = np.full(len(propagated), 1.0 / len(propagated))
        else:
            with np.errstate(divide="ignore"):
                logw = np.log(belief.weights) + loglik
            w = np.exp(logw - np.max(logw))
            weights = w / w.sum()

        n_run = cfg.n_run
        if len(propagated) != n_run or \
                effective_sample_size(weights) < cfg.resample_threshold * n_run:
            idx = systematic_resample(weights, n_run, rng)
            propagated = propagated[idx]
            weights = np.full(n_run, 1.0 / n_run)
        return ParticleBelief(propagated, weights)

    def tracking_error(self, belief: ParticleBelief, true_state: Array) -> float:
        diff = getattr(self.env, "state_difference", None)
        return tracking_error(belief, true_state, diff=diff)

    def point_estimate(self, belief: ParticleBelief) -> Array:
        return point_estimate(belief)

    def sample_states(self, belief: ParticleBelief, n: int, rng: np.random.Generator) -> Array:
        """Weighted particle draws, the planner's source of initial states."""
        idx = rng.choice(len(belief), size=n, p=belief.weights)
        return belief.particles[idx]


def _normalise(logw: Array) -> Array:
    peak = np.max(logw)
    if not np.isfinite(peak):
        return np.full(len(logw), 1.0 / len(logw))
    w = np.exp(logw - peak)
    return w / w.sum()
