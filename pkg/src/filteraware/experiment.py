"""End-to-end experiment pipeline: configuration, data collection, training,
evaluation, and metrics.

A single TOML file configures everything, one section per component (see
`load_config`). Evaluations derive per-rollout seeds from the root seed by
index, so runs with different modes but the same seed are paired: they share
initial states, targets, and environment noise streams.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import geodesic, nn, trackability
from .arm import ArmConfig, ArmEnv
from .core import Rollout, derive_seed, simulate_rollout
from .darkzone import DarkZoneConfig, DarkZoneEnv
from .pfilter import FilterConfig, ParticleFilter
from .planner import ConstraintSpec, MpcPolicy, PlannerConfig
from .trackability import TrackTrainConfig

EVAL_MODES = ("vanilla", "filteraware", "easy")


@dataclass(frozen=True)
class ExperimentConfig:
    env_name: str = "darkzone"
    seed: int = 0
    darkzone: DarkZoneConfig = field(default_factory=DarkZoneConfig)
    arm: ArmConfig = field(default_factory=ArmConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    collect_planner: PlannerConfig = field(default_factory=lambda: PlannerConfig(horizon=5))
    constraint: ConstraintSpec = field(default_factory=ConstraintSpec)
    track: TrackTrainConfig = field(default_factory=TrackTrainConfig)
    grid_resolution: int = 100
    collect_n: int = 500
    collect_len: int = 30
    eval_n: int = 100
    eval_len: int = 50
    # Dark-zone evaluations start in the east strip, opposite the goal.
    eval_init_region: tuple = (0.85, 0.95, 0.2, 0.8)
    weights_path: str | None = None


def default_config(env_name: str = "darkzone", seed: int = 0) -> ExperimentConfig:
    if env_name == "darkzone":
        return ExperimentConfig(env_name="darkzone", seed=seed)
    if env_name == "arm":
        return ExperimentConfig(
            env_name="arm",
            seed=seed,
            filter=FilterConfig(n_init=100, n_run=100, proposal_scale=0.005,
                                emission_scale=0.001),
            planner=PlannerConfig(n_candidates=300, horizon=22, mc_samples=5,
                                  replan_interval=3, use_terminal=False),
            collect_planner=PlannerConfig(n_candidates=300, horizon=22, mc_samples=5,
                                          replan_interval=3, use_terminal=False),
            constraint=ConstraintSpec(delta=9.0),
            track=TrackTrainConfig(gamma=0.95, lr=1e-5, steps=20000, chunk_len=None),
            collect_n=5000,
            collect_len=50,
            eval_n=100,
            eval_len=200,
        )
    raise ValueError(f"unknown environment {env_name!r}")


_SECTION_TYPES = {
    "filter": ("filter", FilterConfig),
    "planner": ("planner", PlannerConfig),
    "collect_planner": ("collect_planner", PlannerConfig),
    "constraint": ("constraint", ConstraintSpec),
    "trackability": ("track", TrackTrainConfig),
}

_EXPERIMENT_KEYS = ("seed", "grid_resolution", "collect_n", "collect_len",
                    "eval_n", "eval_len", "eval_init_region", "weights_path")


def _coerce(cls, values: dict):
    fields = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - fields
    if unknown:
        raise ValueError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    out = {}
    for k, v in values.items():
        out[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v) \
            if isinstance(v, list) else v
    return out


def load_config(path=None, env_name: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Build a configuration from defaults plus a TOML file.

    Recognised sections: [experiment] (env, seed, sizes, paths),
    [env.darkzone], [env.arm], [filter], [planner], [collect_planner],
    [constraint], [trackability]. CLI-style keyword overrides win over the
    file.
    """
    data = {}
    if path is not None:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)

    exp = data.get("experiment", {})
    name = env_name or exp.get("env", "darkzone")
    cfg = default_config(name)

    replacements = {}
    for key in _EXPERIMENT_KEYS:
        if key in exp:
            val = exp[key]
            replacements[key] = tuple(val) if isinstance(val, list) else val
    env_sections = data.get("env", {})
    if "darkzone" in env_sections:
        replacements["darkzone"] = DarkZoneConfig(
            **_coerce(DarkZoneConfig, env_sections["darkzone"]))
    if "arm" in env_sections:
        replacements["arm"] = ArmConfig(**_coerce(ArmConfig, env_sections["arm"]))
    for section, (attr, cls) in _SECTION_TYPES.items():
        if section in data:
            base = getattr(cfg, attr)
            replacements[attr] = dataclasses.replace(
                base, **_coerce(cls, data[section]))
    if seed is not None:
        replacements["seed"] = seed
    return dataclasses.replace(cfg, **replacements)


def config_echo(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["constraint"]["delta"] = _json_safe(d["constraint"]["delta"])
    return d


def _json_safe(x):
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


# --- environment and artifact construction ----------------------------------

def make_env(cfg: ExperimentConfig, mode: str = "vanilla"):
    """Environment for an evaluation mode; "easy" removes the dark/blind zone."""
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}")
    if cfg.env_name == "darkzone":
        if mode == "easy":
            return DarkZoneEnv(dataclasses.replace(cfg.darkzone, easy=True))
        return DarkZoneEnv(cfg.darkzone)
    if cfg.env_name == "arm":
        if mode == "easy":
            return ArmEnv(dataclasses.replace(cfg.arm, blind_x_threshold=-np.inf))
        return ArmEnv(cfg.arm)
    raise ValueError(f"unknown environment {cfg.env_name!r}")


def build_terminal_field(cfg: ExperimentConfig, env, net=None, delta=None):
    """Geodesic terminal cost for the dark-zone planner; None for the arm.

    With a network and threshold given, cells predicted to violate the
    trackability constraint are treated as obstacles.
    """
    if cfg.env_name != "darkzone":
        return None
    res = cfg.grid_resolution
    cell = 1.0 / res
    obstacles = env.obstacle_mask(res)
    goals = env.goal_mask(res)
    if net is None:
        return geodesic.compute_field(obstacles, goals, cell)
    return geodesic.constrained_field(obstacles, goals, net, delta, cell,
                                      feature_fn=env.trackability_features)


def _collect_init_sampler(cfg: ExperimentConfig, env):
    if cfg.env_name == "darkzone":
        return lambda rng: rng.uniform(0.0, 1.0, size=2)
    return lambda rng: env.sample_init_uniform(rng)


def run_collect(cfg: ExperimentConfig, n: int | None = None,
                length: int | None = None) -> list:
    """Vanilla-MPC rollouts for trackability training, from perfect carries."""
    n = cfg.collect_n if n is None else n
    length = cfg.collect_len if length is None else length
    env = make_env(cfg, "vanilla")
    if cfg.env_name == "darkzone":
        terminal = build_terminal_field(cfg, env)
        env_arg = env
    else:
        terminal = None
        base = env

        def env_arg(rng):
            return base.with_target(base.sample_target(rng))

    return trackability.collect_dataset(
        env_arg, cfg.filter, cfg.collect_planner, n, length,
        _collect_init_sampler(cfg, env), cfg.seed, terminal=terminal,
        belief_init="perfect")


def run_train(cfg: ExperimentConfig, rollouts) -> tuple:
    """Chunk, train, and return (net, metadata, final_loss)."""
    env = make_env(cfg, "vanilla")
    chunks = trackability.chunk_rollouts(rollouts, cfg.track.chunk_len,
                                         cfg.track.accept_error_max)
    if not chunks:
        raise ValueError("no training chunks after filtering")
    result = trackability.train(chunks, cfg.track, cfg.seed,
                                feature_fn=env.trackability_features)
    metadata = {
        "env": cfg.env_name,
        "seed": cfg.seed,
        "train_config": dataclasses.asdict(cfg.track),
        "n_chunks": len(chunks),
        "final_loss": result.final_loss,
    }
    return result.net, metadata, result.final_loss


# --- evaluation --------------------------------------------------------------

@dataclass
class RolloutRecord:
    index: int
    seed: int
    success: bool
    total_cost: float
    mean_tracking_error: float
    blind_fraction: float | None = None


@dataclass
class MetricsReport:
    env: str
    mode: str
    n_rollouts: int
    success_rate: float
    mean_tracking_error: float
    mean_total_cost: float
    planner_hz: float
    seed: int
    records: list
    config: dict

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["records"] = [dataclasses.asdict(r) if not isinstance(r, dict) else r
                        for r in self.records]
        return d

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, allow_nan=False, default=_json_safe)


def run_eval(cfg: ExperimentConfig, mode: str, net: nn.Mlp | None = None,
             n: int | None = None, length: int | None = None) -> MetricsReport:
    """Closed-loop evaluation of one mode.

    vanilla: unconstrained planner on the full problem. filteraware:
    constraint enabled, and (dark-zone) the terminal field recomputed around
    the constrained cells. easy: unconstrained planner on the variant without
    a dark/blind zone. Rollout index i uses the same derived seeds in every
    mode.
    """
    n = cfg.eval_n if n is None else n
    length = cfg.eval_len if length is None else length
    aware = mode == "filteraware"
    if aware and net is None:
        raise ValueError("filteraware mode requires a trained trackability network")
    env = make_env(cfg, mode)
    constraint = cfg.constraint if aware else ConstraintSpec(enabled=False)
    terminal = build_terminal_field(cfg, env, net=net if aware else None,
                                    delta=cfg.constraint.delta)
    belief_init = "prior" if cfg.env_name == "darkzone" else "perfect"

    records = []
    elapsed = 0.0
    for i in range(n):
        setup_rng = np.random.default_rng(derive_seed(cfg.seed, i, 0))
        if cfg.env_name == "darkzone":
            x0, x1, y0, y1 = cfg.eval_init_region
            init = setup_rng.uniform((x0, y0), (x1, y1))
            env_i = env
        else:
            env_i = env.with_target(env.sample_target(setup_rng))
            init = env_i.sample_init_safe(setup_rng)
        filt = ParticleFilter(env_i, cfg.filter)
        policy = MpcPolicy(env_i, cfg.planner, constraint, terminal=terminal,
                           net=net if aware else None)
        rollout_seed = derive_seed(cfg.seed, i, 1)
        t0 = time.perf_counter()
        r = simulate_rollout(env_i, policy, filt, init, length, rollout_seed,
                             belief_init=belief_init)
        elapsed += time.perf_counter() - t0
        records.append(RolloutRecord(
            index=i,
            seed=rollout_seed,
            success=env_i.is_success(r),
            total_cost=float(np.sum(r.costs)),
            mean_tracking_error=float(np.mean(r.errors)) if r.n_steps else 0.0,
            blind_fraction=_blind_fraction(r) if cfg.env_name == "arm" else None,
        ))

    n_success = sum(rec.success for rec in records)
    return MetricsReport(
        env=cfg.env_name,
        mode=mode,
        n_rollouts=n,
        success_rate=n_success / n if n else 0.0,
        mean_tracking_error=float(np.mean([rec.mean_tracking_error for rec in records])) if records else 0.0,
        mean_total_cost=float(np.mean([rec.total_cost for rec in records])) if records else 0.0,
        planner_hz=(n * length) / elapsed if elapsed > 0 else 0.0,
        seed=cfg.seed,
        records=records,
        config=config_echo(cfg),
    )


def _blind_fraction(rollout: Rollout) -> float:
    blind = np.all(rollout.observations == 0.0, axis=-1)
    return float(np.mean(blind))
