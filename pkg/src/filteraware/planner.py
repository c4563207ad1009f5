"""Random-search MPC with optional trackability constraints.

Candidate control sequences come from an environment-specific proposal
distribution. Each candidate is scored by Monte Carlo simulation through the
stochastic dynamics from states drawn out of the current belief; the objective
is a lambda-return over stage costs with an optional terminal distance field.
With constraints enabled, the trackability network is evaluated at every
simulated future state and candidates are ranked feasible-first, falling back
to the least-violating candidate when nothing satisfies the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geodesic, nn
from .core import Array
from .trackability import lambda_return_batch


@dataclass(frozen=True)
class PlannerConfig:
    n_candidates: int = 100
    horizon: int = 10
    mc_samples: int = 50
    replan_interval: int = 1
    lambda_obj: float = 1.0
    gamma_obj: float = 1.0
    use_terminal: bool = True

    def __post_init__(self):
        if self.n_candidates < 1 or self.horizon < 1 or self.mc_samples < 1:
            raise ValueError("n_candidates, horizon and mc_samples must be >= 1")
        if not 1 <= self.replan_interval <= self.horizon:
            raise ValueError("replan_interval must be in [1, horizon]")


@dataclass(frozen=True)
class ConstraintSpec:
    delta: float = 0.6
    min_prob: float = 1.0  # required fraction of samples satisfying all steps
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 < self.min_prob <= 1.0:
            raise ValueError("min_prob must be in (0, 1]")


@dataclass(frozen=True)
class Plan:
    """A candidate control sequence with its evaluation statistics."""

    controls: Array  # (K, control_dim)
    objective: float
    constraint_satisfaction: float
    violation: float


def propose_plans(env, n: int, horizon: int, rng: np.random.Generator) -> Array:
    """(n, horizon, control_dim) candidates from the environment's proposal."""
    if n < 1 or horizon < 1:
        raise ValueError("n and horizon must be >= 1")
    return env.propose_plans(n, horizon, rng)


def evaluate_plans(plans: Array, belief, env, cfg: PlannerConfig, spec: ConstraintSpec,
                   rng: np.random.Generator, terminal=None, net=None) -> list:
    """Monte Carlo evaluation of a batch of candidate plans.

    All candidates share the same `mc_samples` initial states drawn from the
    belief by weighted particle selection (common random numbers keep the
    ranking comparable). Constraint statistics are computed from the same
    simulated trajectories as the objective.
    """
    plans = np.asarray(plans, dtype=float)
    if plans.ndim != 3:
        raise ValueError("plans must have shape (n, horizon, control_dim)")
    c, k, _ = plans.shape
    s = cfg.mc_samples
    if cfg.use_terminal and terminal is None:
        raise ValueError("use_terminal requires a distance field")
    check_constraint = spec.enabled
    if check_constraint and net is None:
        raise ValueError("constraint checking requires a trackability network")

    idx = rng.choice(len(belief), size=s, p=belief.weights)
    cur = np.tile(belief.particles[idx], (c, 1))  # (c*s, state_dim), candidate-major

    costs = np.empty((k, c * s))
    feats = [] if check_constraint else None
    bootstrap = np.empty((k, c * s)) if cfg.use_terminal and cfg.lambda_obj < 1.0 else None
    final_terminal = None
    for step in range(k):
        u = np.repeat(plans[:, step, :], s, axis=0)
        nxt = env.transition(cur, u, rng)
        costs[step] = env.step_cost(cur, u, nxt)
        if check_constraint:
            feats.append(env.trackability_features(nxt))
        if cfg.use_terminal:
            if bootstrap is not None:
                bootstrap[step] = geodesic.query(terminal, env.position(nxt))
            elif step == k - 1:
                final_terminal = geodesic.query(terminal, env.position(nxt))
        cur = nxt
    # One fused forward pass over all (step, candidate, sample) states.
    phi = nn.forward(net, np.concatenate(feats)).reshape(k, c * s) \
        if check_constraint else None

    disc = cfg.gamma_obj ** np.arange(k)
    if cfg.use_terminal:
        if bootstrap is None:  # lambda_obj == 1: plain K-step objective
            obj = disc @ costs + cfg.gamma_obj**k * final_terminal
        else:
            obj = lambda_return_batch(costs.T, bootstrap.T, cfg.lambda_obj, cfg.gamma_obj)
    else:
        obj = disc @ costs
    objectives = obj.reshape(c, s).mean(axis=1)

    if check_constraint:
        ok = (phi <= spec.delta).all(axis=0).reshape(c, s)
        satisfaction = ok.mean(axis=1)
        excess = np.maximum(phi - spec.delta, 0.0)
        violation = excess.reshape(k, c, s).mean(axis=(0, 2))
    else:
        satisfaction = np.ones(c)
        violation = np.zeros(c)

    return [Plan(controls=plans[i], objective=float(objectives[i]),
                 constraint_satisfaction=float(satisfaction[i]),
                 violation=float(violation[i])) for i in range(c)]


def evaluate_plan(controls: Array, belief, env, cfg: PlannerConfig, spec: ConstraintSpec,
                  rng: np.random.Generator, terminal=None, net=None) -> Plan:
    """Evaluate a single control sequence; see `evaluate_plans`."""
    return evaluate_plans(np.asarray(controls, dtype=float)[None], belief, env,
                          cfg, spec, rng, terminal=terminal, net=net)[0]


def select_plan(plans, spec: ConstraintSpec) -> Plan:
    """Best feasible plan by objective; with no feasible plan, the one with
    minimal violation (ties: lower objective, then lower index)."""
    if not plans:
        raise ValueError("no plans to select from")
    feasible = [i for i, p in enumerate(plans)
                if p.constraint_satisfaction >= spec.min_prob]
    if feasible:
        best = min(feasible, key=lambda i: (plans[i].objective, i))
    else:
        best = min(range(len(plans)),
                   key=lambda i: (plans[i].violation, plans[i].objective, i))
    return plans[best]


def mpc_policy_step(belief, env, cfg: PlannerConfig, spec: ConstraintSpec,
                    rng: np.random.Generator, terminal=None, net=None):
    """Propose, evaluate and select; returns (controls to execute, chosen plan)
    where the controls are the winner's first `replan_interval` steps."""
    plans = propose_plans(env, cfg.n_candidates, cfg.horizon, rng)
    evaluated = evaluate_plans(plans, belief, env, cfg, spec, rng,
                               terminal=terminal, net=net)
    best = select_plan(evaluated, spec)
    return best.controls[:cfg.replan_interval].copy(), best


class MpcPolicy:
    """Receding-horizon policy: replans every `replan_interval` steps and
    plays the buffered controls in between."""

    def __init__(self, env, config: PlannerConfig, constraint: ConstraintSpec | None = None,
                 terminal=None, net=None):
        self.env = env
        self.config = config
        self.constraint = constraint or ConstraintSpec(enabled=False)
        self.terminal = terminal
        # Planning is matmul-bound; the constraint network runs in float32.
        self.net = None if net is None else nn.cast_mlp(net, np.float32)
        if config.use_terminal and terminal is None:
            raise ValueError("planner configured with a terminal cost but none given")
        if self.constraint.enabled and net is None:
            raise ValueError("constraint enabled but no trackability network given")
        self._queue: list = []
        self.last_plan: Plan | None = None

    def reset(self) -> None:
        self._queue = []
        self.last_plan = None

    def __call__(self, belief, rng: np.random.Generator) -> Array:
        if not self._queue:
            controls, plan = mpc_policy_step(belief, self.env, self.config,
                                             self.constraint, rng,
                                             terminal=self.terminal, net=self.net)
            self._queue = list(controls)
            self.last_plan = plan
        return self._queue.pop(0)
