"""Learning expected future tracking error from closed-loop rollouts.

A rollout records the estimator's error at every visited state. Rollouts are
cut into fixed-length chunks; each chunk's first state is regressed (with a
two-hidden-layer MLP) onto a truncated lambda-return over the chunk's errors,
bootstrapped with a Polyak-averaged copy of the network. The trained network
maps a state to how much estimation error to expect when passing through it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .core import Array, Rollout, derive_seed, simulate_rollout
from .pfilter import FilterConfig, ParticleFilter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RolloutChunk:
    """States (Tc+1, d) and errors (Tc,) of one training segment."""

    states: Array
    errors: Array

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(self, "errors", np.asarray(self.errors, dtype=float))
        if len(self.states) != len(self.errors) + 1:
            raise ValueError("need one more state than errors")


@dataclass(frozen=True)
class TrackTrainConfig:
    lam: float = 0.95
    gamma: float = 0.8
    eta: float = 0.995  # Polyak factor for the target copy
    lr: float = 1e-3
    steps: int = 5000
    batch: int = 512
    chunk_len: int | None = 5  # None: whole rollouts
    accept_error_max: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must be in [0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must be in (0, 1)")


def chunk_rollouts(rollouts, chunk_len: int | None,
                   accept_error_max: float | None = None) -> list:
    """Cut rollouts into non-overlapping chunks of `chunk_len` steps.

    The trailing remainder shorter than `chunk_len` is discarded. With
    `accept_error_max` set, a chunk whose first recorded error is at or above
    the threshold is dropped. `chunk_len=None` keeps whole rollouts.
    """
    if chunk_len is not None and chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    chunks = []
    for r in rollouts:
        n = r.n_steps
        size = n if chunk_len is None else chunk_len
        if size == 0:
            continue
        for start in range(0, n - size + 1, size):
            err = r.errors[start:start + size]
            if accept_error_max is not None and err[0] >= accept_error_max:
                continue
            chunks.append(RolloutChunk(r.states[start:start + size + 1], err))
    return chunks


def lambda_return(errors, bootstrap, lam: float, gamma: float) -> float:
    """Truncated lambda-return over one segment.

    `errors[t]` is the cost at step t+1; `bootstrap[k]` is the target
    network's value at the state reached after k+1 steps. The k-step return is
    G_k = sum_{t=1..k} gamma^(t-1) errors[t-1] + gamma^k bootstrap[k-1];
    the result mixes G_1..G_T with weights (1-lam) lam^(k-1), the final G_T
    carrying the residual weight lam^(T-1) so the weights sum to one and
    lam=1 recovers the full segment return.
    """
    errors = np.asarray(errors, dtype=float)
    bootstrap = np.asarray(bootstrap, dtype=float)
    if errors.ndim != 1 or errors.size == 0:
        raise ValueError("errors must be a nonempty 1-D sequence")
    if bootstrap.shape != errors.shape:
        raise ValueError("bootstrap must match errors in length")
    return float(lambda_return_batch(errors[None, :], bootstrap[None, :], lam, gamma)[0])


def lambda_return_batch(errors: Array, bootstrap: Array, lam: float, gamma: float) -> Array:
    """Vectorized lambda-return for (B, T) error and bootstrap arrays."""
    b, t = errors.shape
    disc = gamma ** np.arange(t)
    partial = np.cumsum(disc * errors, axis=1)  # (B, T): sum_{i<=k} of discounted errors
    returns = partial + (gamma * disc) * bootstrap  # G_k for k = 1..T
    weights = (1.0 - lam) * lam ** np.arange(t)
    weights[-1] = lam ** (t - 1)
    return returns @ weights


@dataclass
class TrainResult:
    net: nn.Mlp
    final_loss: float


def train(chunks, config: TrackTrainConfig, seed: int, feature_fn=None) -> TrainResult:
    """Fit the trackability network by TD(lambda) regression.

    Every step samples a batch of chunks with replacement, builds
    lambda-return targets from the Polyak-averaged target copy, takes one Adam
    step on the squared loss at the chunks' first states, then moves the
    target copy. Deterministic given (chunks, config, seed).
    """
    if not chunks:
        raise ValueError("empty chunk list")
    t_len = len(chunks[0].errors)
    if any(len(c.errors) != t_len for c in chunks):
        raise ValueError("all chunks must have equal length for batched training")

    if feature_fn is None:
        feature_fn = lambda s: s
    first = np.stack([feature_fn(c.states[0]) for c in chunks])  # (N, f)
    boot_states = np.stack([feature_fn(c.states[1:]) for c in chunks])  # (N, T, f)
    errors = np.stack([c.errors for c in chunks])  # (N, T)
    n, feat_dim = first.shape

    rng = np.random.default_rng(seed)
    net = nn.init_mlp(feat_dim, rng)
    target = nn.copy_mlp(net)
    adam = nn.init_adam(net)
    loss = np.nan
    for step in range(config.steps):
        idx = rng.integers(0, n, size=config.batch)
        boot = nn.forward(target, boot_states[idx].reshape(-1, feat_dim))
        targets = lambda_return_batch(errors[idx], boot.reshape(-1, t_len),
                                      config.lam, config.gamma)
        grads, loss = nn.grad_mse(net, first[idx], targets)
        if not np.isfinite(loss):
            raise RuntimeError(f"non-finite training loss at step {step}")
        net, adam = nn.adam_step(net, grads, adam, config.lr)
        target = nn.polyak_update(target, net, config.eta)
        if step % 1000 == 0:
            log.debug("trackability step %d loss %.3g", step, loss)
    return TrainResult(net=net, final_loss=float(loss))


def collect_dataset(env, filter_config: FilterConfig, planner_config, n_rollouts: int,
                    length: int, init_sampler, seed: int, terminal=None,
                    belief_init: str = "perfect") -> list:
    """Roll out an unconstrained MPC policy to gather trackability data.

    `env` may be an environment or a callable rng -> environment for setups
    that resample task parameters per rollout. Each rollout gets its own
    derived seed; the full dataset is reproducible from `seed` alone.
    """
    from .planner import ConstraintSpec, MpcPolicy  # local import to avoid a cycle

    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    rollouts = []
    for i in range(n_rollouts):
        setup_rng = np.random.default_rng(derive_seed(seed, i, 0))
        env_i = env(setup_rng) if callable(env) else env
        filt = ParticleFilter(env_i, filter_config)
        policy = MpcPolicy(env_i, planner_config, ConstraintSpec(enabled=False),
                           terminal=terminal, net=None)
        init_state = init_sampler(setup_rng)
        rollouts.append(simulate_rollout(env_i, policy, filt, init_state, length,
                                         derive_seed(seed, i, 1), belief_init=belief_init))
    return rollouts


def heatmap(net: nn.Mlp, env, resolution: int) -> Array:
    """Network output over the environment's visualization grid, shape
    (resolution, resolution), row-major as defined by `env.grid_states`."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    states = env.grid_states(resolution)
    vals = nn.forward(net, env.trackability_features(states))
    return vals.reshape(resolution, resolution)
