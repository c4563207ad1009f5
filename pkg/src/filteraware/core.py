"""Shared vocabulary for stochastic state-space systems and a generic rollout driver.

States, controls and observations are plain float64 numpy vectors. Environment
objects supply the dynamics; estimator objects supply the belief over the hidden
state; policies map beliefs to controls. Everything stochastic takes an explicit
seed or `numpy.random.Generator`, so equal seeds give bit-identical results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray


@dataclass(frozen=True)
class EnvironmentSpec:
    """Declared dimensions and bounds of an environment.

    `control_bound` is a human-readable description; the environment's
    `clamp_control` implements the actual rule. `gamma_task` is the discount
    of the control task and is independent of any other discount in the system.
    """

    state_dim: int
    control_dim: int
    obs_dim: int
    control_bound: str
    gamma_task: float = 1.0

    def __post_init__(self):
        if min(self.state_dim, self.control_dim, self.obs_dim) < 1:
            raise ValueError("all dimensions must be >= 1")
        if not 0.0 < self.gamma_task <= 1.0:
            raise ValueError(f"gamma_task must be in (0, 1], got {self.gamma_task}")


@dataclass
class Rollout:
    """One simulated trajectory with estimator bookkeeping.

    Shapes: states (T, state_dim), controls (T-1, control_dim),
    observations (T, obs_dim), errors (T-1,), costs (T-1,). `errors[t]` is the
    estimator's tracking error at state t under the belief held when visiting
    it; `costs[t]` is the stage cost charged for step t.
    """

    states: Array
    controls: Array
    observations: Array
    errors: Array
    costs: Array
    seed: int

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        self.observations = np.asarray(self.observations, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        self.costs = np.asarray(self.costs, dtype=float)
        t = len(self.states)
        if t < 1:
            raise ValueError("rollout needs at least one state")
        for name, arr, want in (
            ("controls", self.controls, t - 1),
            ("observations", self.observations, t),
            ("errors", self.errors, t - 1),
            ("costs", self.costs, t - 1),
        ):
            if len(arr) != want:
                raise ValueError(f"{name} has length {len(arr)}, expected {want}")

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1


def split_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """Derive `n` independent generators from one root seed.

    Components drawn from separate children stay reproducible when other
    components are toggled, which keeps ablations comparable.
    """
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def derive_seed(root: int, *key: int) -> int:
    """Stable 64-bit seed for the sub-stream addressed by `key` under `root`.

    Used to hand each rollout (and each component within it) its own stream,
    so records stay reproducible from their stored seed alone.
    """
    ss = np.random.SeedSequence(entropy=root, spawn_key=tuple(key))
    a, b = ss.generate_state(2)
    return int(a) << 32 | int(b)


def discounted_return(costs, gamma: float) -> float:
    """Sum of gamma^(t-1) * costs[t-1]; 0 for an empty sequence."""
    costs = np.asarray(costs, dtype=float)
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must be in (0, 1], got {gamma}")
    if costs.size == 0:
        return 0.0
    if not np.all(np.isfinite(costs)):
        raise ValueError("costs must be finite")
    return float(np.sum(gamma ** np.arange(len(costs)) * costs))


def simulate_rollout(env, policy, filt, init_state, horizon: int, seed: int,
                     belief_init: str = "perfect") -> Rollout:
    """Run the closed loop of environment, state estimator and policy.

    The root seed is split into disjoint streams for environment noise,
    estimator resampling and policy proposals. `belief_init` selects how the
    estimator starts: "perfect" (belief concentrated on `init_state`) or
    "prior" (environment prior reweighted by the first observation).

    The per-step order is: record the tracking error of the current belief,
    ask the policy for a control, charge the stage cost, advance the true
    state, then update the belief with the new observation.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    env_rng, filt_rng, policy_rng = split_rngs(seed, 3)

    state = np.asarray(init_state, dtype=float)
    obs = env.emit(state, env_rng)
    belief = filt.init_belief(state, obs, filt_rng, mode=belief_init)
    if hasattr(policy, "reset"):
        policy.reset()

    states = [state]
    observations = [obs]
    controls, errors, costs = [], [], []
    for t in range(horizon):
        errors.append(filt.tracking_error(belief, state))
        control = np.asarray(policy(belief, policy_rng), dtype=float)
        nxt = env.transition(state, control, env_rng)
        if not np.all(np.isfinite(nxt)):
            raise RuntimeError(f"environment produced a non-finite state at step {t}")
        costs.append(float(env.step_cost(state, control, nxt)))
        obs = env.emit(nxt, env_rng)
        belief = filt.step(belief, control, obs, filt_rng)
        state = nxt
        states.append(state)
        controls.append(control)
        observations.append(obs)

    return Rollout(
        states=np.stack(states),
        controls=np.stack(controls) if controls else np.zeros((0, env.spec.control_dim)),
        observations=np.stack(observations),
        errors=np.array(errors, dtype=float),
        costs=np.array(costs, dtype=float),
        seed=seed,
    )


# --- JSON-lines persistence -------------------------------------------------

def rollout_to_json(rollout: Rollout) -> str:
    payload = {
        "states": rollout.states.tolist(),
        "controls": rollout.controls.tolist(),
        "observations": rollout.observations.tolist(),
        "errors": rollout.errors.tolist(),
        "costs": rollout.costs.tolist(),
        "seed": int(rollout.seed),
    }
    # allow_nan=False: the on-disk format forbids NaN/Inf outright.
    return json.dumps(payload, allow_nan=False)


def rollout_from_json(line: str) -> Rollout:
    d = json.loads(line)
    return Rollout(
        states=np.array(d["states"], dtype=float),
        controls=np.array(d["controls"], dtype=float),
        observations=np.array(d["observations"], dtype=float),
        errors=np.array(d["errors"], dtype=float),
        costs=np.array(d["costs"], dtype=float),
        seed=int(d["seed"]),
    )


def save_rollouts(path, rollouts) -> None:
    with open(path, "w") as fh:
        for r in rollouts:
            fh.write(rollout_to_json(r) + "\n")


def load_rollouts(path) -> list[Rollout]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(rollout_from_json(line))
    return out
