"""Planar two-link reacher with a blind zone that zeroes observations.

State is [angle1, angle2, velocity1, velocity2] with relative joint angles
wrapped to (-pi, pi]. Joints follow damped double-integrator dynamics driven by
noisy commands. Observations are the joint angles plus the vector from the arm
tip to the target, all replaced by zeros whenever any probe point along the arm
reaches into the left half-plane past the blind threshold. Reward shaping: the
tip-to-target distance is the dense cost, with a one-time bonus on entering the
success radius that is paid back on leaving it.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import Array, EnvironmentSpec

_LOG_2PI = float(np.log(2.0 * np.pi))


def wrap_angle(x: Array) -> Array:
    """Wrap to (-pi, pi]."""
    y = np.mod(x, 2.0 * np.pi)
    return np.where(y > np.pi, y - 2.0 * np.pi, y)


@dataclass(frozen=True)
class ArmConfig:
    link_lengths: tuple = (0.1, 0.1)
    damping: float = 0.9  # per-step velocity retention
    control_gain: float = 0.05  # rad/step^2 per unit command
    control_noise: float = 0.1  # Gaussian scale on commands
    blind_x_threshold: float = -0.02
    n_probe_points: int = 20
    target: tuple | None = None  # None: sample per rollout
    success_radius: float = 0.05
    bonus: float = 100.0

    def __post_init__(self):
        if min(self.link_lengths) <= 0:
            raise ValueError("link lengths must be > 0")
        if self.n_probe_points < 2:
            raise ValueError("need at least 2 probe points")
        if self.success_radius <= 0:
            raise ValueError("success_radius must be > 0")


class ArmEnv:
    """Two-link reacher environment. Stateless given its config."""

    def __init__(self, config: ArmConfig | None = None):
        self.config = config or ArmConfig()
        self.spec = EnvironmentSpec(
            state_dim=4, control_dim=2, obs_dim=4,
            control_bound="per-joint command in [-1, 1]",
            gamma_task=1.0,
        )
        self._target = None if self.config.target is None \
            else np.asarray(self.config.target, dtype=float)

    @property
    def target(self) -> Array:
        if self._target is None:
            raise ValueError("no target set; use with_target() or fix one in the config")
        return self._target

    def with_target(self, target) -> "ArmEnv":
        return ArmEnv(dataclasses.replace(self.config, target=tuple(np.asarray(target, dtype=float))))

    # -- kinematics -------------------------------------------------------

    def forward_kinematics(self, angles: Array):
        """Probe points and tip of the chain anchored at the origin.

        angles (..., 2) -> (probes (..., P, 2), tip (..., 2)); the probes are
        equally spaced along the arm's arc length from base to tip inclusive,
        so the tip is the last probe point.
        """
        angles = np.asarray(angles, dtype=float)
        l1, l2 = self.config.link_lengths
        a1 = angles[..., 0]
        a2 = angles[..., 0] + angles[..., 1]
        dir1 = np.stack([np.cos(a1), np.sin(a1)], axis=-1)[..., None, :]
        dir2 = np.stack([np.cos(a2), np.sin(a2)], axis=-1)[..., None, :]
        arc = np.linspace(0.0, l1 + l2, self.config.n_probe_points)
        along1 = np.minimum(arc, l1)[:, None]
        along2 = np.clip(arc - l1, 0.0, l2)[:, None]
        probes = along1 * dir1 + along2 * dir2
        return probes, probes[..., -1, :]

    def tip(self, states: Array) -> Array:
        return self.forward_kinematics(np.asarray(states, dtype=float)[..., :2])[1]

    def is_blind(self, states: Array) -> Array:
        probes, _ = self.forward_kinematics(np.asarray(states, dtype=float)[..., :2])
        return np.any(probes[..., 0] < self.config.blind_x_threshold, axis=-1)

    def in_bonus(self, states: Array) -> Array:
        d = np.linalg.norm(self.tip(states) - self.target, axis=-1)
        return d < self.config.success_radius

    # -- dynamics ---------------------------------------------------------

    def clamp_control(self, control: Array) -> Array:
        return np.clip(np.asarray(control, dtype=float), -1.0, 1.0)

    def _advance(self, state: Array, command: Array) -> Array:
        cfg = self.config
        vel = cfg.damping * state[..., 2:] + cfg.control_gain * command
        ang = wrap_angle(state[..., :2] + vel)
        return np.concatenate([ang, vel], axis=-1)

    def transition(self, state: Array, control: Array, rng: np.random.Generator) -> Array:
        state = np.asarray(state, dtype=float)
        control = self.clamp_control(np.broadcast_to(control, state.shape[:-1] + (2,)))
        noise = rng.normal(0.0, self.config.control_noise, size=control.shape)
        return self._advance(state, control + noise)

    def transition_mean(self, state: Array, control: Array) -> Array:
        state = np.asarray(state, dtype=float)
        control = self.clamp_control(np.broadcast_to(control, state.shape[:-1] + (2,)))
        return self._advance(state, control)

    # -- observation ------------------------------------------------------

    def emit(self, state: Array, rng=None) -> Array:
        """Noise-free observation [angles, target - tip], zeroed when blind."""
        state = np.asarray(state, dtype=float)
        obs = np.concatenate([state[..., :2], self.target - self.tip(state)], axis=-1)
        return np.where(self.is_blind(state)[..., None], 0.0, obs)

    def emission_logpdf(self, obs: Array, states: Array, scale=None) -> Array:
        sigma = 0.001 if scale is None else float(scale)
        diff = np.asarray(obs, dtype=float) - self.emit(states)
        d = diff.shape[-1]
        return (-0.5 * np.sum(diff * diff, axis=-1) / sigma**2
                - d * (np.log(sigma) + 0.5 * _LOG_2PI))

    # -- task -------------------------------------------------------------

    def stage_cost(self, state_after: Array, prev_in_bonus) -> Array:
        """Tip distance to target, with -bonus on entering the success radius
        and +bonus on leaving it."""
        dist = np.linalg.norm(self.tip(state_after) - self.target, axis=-1)
        now = dist < self.config.success_radius
        prev = np.asarray(prev_in_bonus, dtype=bool)
        return (dist
                - self.config.bonus * (now & ~prev)
                + self.config.bonus * (prev & ~now))

    def step_cost(self, prev_state, control, next_state) -> Array:
        return self.stage_cost(next_state, self.in_bonus(prev_state))

    def is_success(self, rollout) -> bool:
        return bool(np.any(self.in_bonus(rollout.states)))

    # -- hooks ------------------------------------------------------------

    def sample_prior_states(self, n: int, rng: np.random.Generator) -> Array:
        angles = rng.uniform(-np.pi, np.pi, size=(n, 2))
        return np.concatenate([angles, np.zeros((n, 2))], axis=-1)

    def sample_init_uniform(self, rng: np.random.Generator) -> Array:
        return self.sample_prior_states(1, rng)[0]

    def sample_init_safe(self, rng: np.random.Generator) -> Array:
        """Uniform start resampled until the arm is outside the blind zone."""
        while True:
            state = self.sample_init_uniform(rng)
            if not self.is_blind(state):
                return state

    def sample_target(self, rng: np.random.Generator) -> Array:
        """Uniform over the reachable disk, restricted to x > 0.05 so targets
        sit clear of the blind zone."""
        reach = float(sum(self.config.link_lengths))
        while True:
            radius = reach * np.sqrt(rng.uniform())
            theta = rng.uniform(0.0, 2.0 * np.pi)
            p = radius * np.array([np.cos(theta), np.sin(theta)])
            if p[0] > 0.05:
                return p

    def propose_plans(self, n: int, horizon: int, rng: np.random.Generator) -> Array:
        """Windowed constant commands per joint: a uniform command held over a
        random contiguous window, zero elsewhere. One third of the candidates
        share the window across joints, another third share window and
        command."""
        def windows(count):
            starts = rng.integers(0, horizon, size=count)
            durations = rng.integers(1, horizon + 1, size=count)
            t = np.arange(horizon)
            return (t >= starts[:, None]) & (t < (starts + durations)[:, None])

        n_shared = n // 3
        n_ind = n - 2 * n_shared
        plans = np.zeros((n, horizon, 2))

        for j in range(2):  # fully independent joints
            cmd = rng.uniform(-1.0, 1.0, size=n_ind)
            plans[:n_ind, :, j] = windows(n_ind) * cmd[:, None]
        if n_shared:
            win = windows(n_shared)  # shared window, independent commands
            for j in range(2):
                cmd = rng.uniform(-1.0, 1.0, size=n_shared)
                plans[n_ind:n_ind + n_shared, :, j] = win * cmd[:, None]
            win = windows(n_shared)  # shared window and command
            cmd = rng.uniform(-1.0, 1.0, size=n_shared)
            both = win * cmd[:, None]
            plans[n_ind + n_shared:, :, 0] = both
            plans[n_ind + n_shared:, :, 1] = both
        return plans

    def trackability_features(self, states: Array) -> Array:
        """Joint angles in cosine-sine form, (..., 4)."""
        ang = np.asarray(states, dtype=float)[..., :2]
        return np.concatenate([np.cos(ang), np.sin(ang)], axis=-1)

    def state_difference(self, a: Array, b: Array) -> Array:
        d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        return np.concatenate([wrap_angle(d[..., :2]), d[..., 2:]], axis=-1)

    def position(self, states: Array) -> Array:
        return self.tip(states)

    def grid_states(self, resolution: int) -> Array:
        """Cell-center joint-angle grid over (-pi, pi]^2 at zero velocity,
        row-major with angle2 as the row index."""
        cell = 2.0 * np.pi / resolution
        centers = -np.pi + (np.arange(resolution) + 0.5) * cell
        a1, a2 = np.meshgrid(centers, centers)  # [i_angle2, i_angle1]
        flat = np.stack([a1.ravel(), a2.ravel()], axis=-1)
        return np.concatenate([flat, np.zeros_like(flat)], axis=-1)
