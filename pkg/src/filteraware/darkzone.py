"""2D point-agent navigation with a high-observation-noise circular dark zone.

The agent lives in the unit square, controls its velocity under additive
Gaussian noise, and observes its own position. Observation noise is small
outside a central circle and large inside it, so a state estimator that works
fine elsewhere falls apart in the circle. Walls are line segments; a move whose
segment would cross a wall is replaced by a small step in the opposite
direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Array, EnvironmentSpec

# Boundary walls of the unit square, as (start, end) segments.
BOUNDARY_WALLS = (
    ((0.0, 0.0), (1.0, 0.0)),
    ((1.0, 0.0), (1.0, 1.0)),
    ((1.0, 1.0), (0.0, 1.0)),
    ((0.0, 1.0), (0.0, 0.0)),
)

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class DarkZoneConfig:
    zone_center: tuple = (0.5, 0.5)
    zone_radius: float = 0.3
    noise_out: float = 0.03
    noise_in: float = 1.0
    process_noise: float = 0.03
    speed_limit: float = 0.05
    goal_region: tuple = (0.0, 0.1, 0.4, 0.6)  # (xmin, xmax, ymin, ymax)
    obstacles: tuple = BOUNDARY_WALLS
    bounce_step: float = 0.01
    bounce_eps: float = 1e-4
    easy: bool = False  # uniform observation noise everywhere (no dark zone)

    def __post_init__(self):
        if self.zone_radius <= 0:
            raise ValueError("zone_radius must be > 0")
        if not self.noise_in >= self.noise_out > 0:
            raise ValueError("need noise_in >= noise_out > 0")
        if self.speed_limit <= 0:
            raise ValueError("speed_limit must be > 0")
        xmin, xmax, ymin, ymax = self.goal_region
        if not (0 <= xmin < xmax <= 1 and 0 <= ymin < ymax <= 1):
            raise ValueError("goal_region must be a nonempty rectangle inside [0,1]^2")


def segments_intersect(p0: Array, p1: Array, a: Array, b: Array) -> Array:
    """Whether each segment p0->p1 touches any segment a->b.

    p0, p1: (..., 2) batched segment endpoints. a, b: (M, 2) obstacle
    endpoints. Returns a boolean array of the batch shape. Touching endpoints
    and collinear overlap count as intersections.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    # Orientation tests, written out to avoid (batch, M, 2) temporaries.
    wx, wy = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    e1x = p0[..., 0, None] - a[:, 0]
    e1y = p0[..., 1, None] - a[:, 1]
    sx = (p1[..., 0] - p0[..., 0])[..., None]
    sy = (p1[..., 1] - p0[..., 1])[..., None]
    d1 = wx * e1y - wy * e1x
    d2 = wx * (e1y + sy) - wy * (e1x + sx)
    d3 = sy * e1x - sx * e1y
    gx = p0[..., 0, None] - b[:, 0]
    gy = p0[..., 1, None] - b[:, 1]
    d4 = sy * gx - sx * gy

    proper = ((d1 > 0) != (d2 > 0)) & ((d3 > 0) != (d4 > 0))
    if d1.all() and d2.all() and d3.all() and d4.all():
        return np.any(proper, axis=-1)
    return np.any((proper & (d1 != 0) & (d2 != 0) & (d3 != 0) & (d4 != 0))
                  | _segment_touches(p0, p1, a, b, d1, d2, d3, d4), axis=-1)


def _segment_touches(p0, p1, a, b, d1, d2, d3, d4):
    """Endpoint-on-segment and collinear-overlap cases (zero orientations)."""
    p0 = p0[..., None, :]
    p1 = p1[..., None, :]

    def on_segment(lo, hi, pt):
        return (
            (np.minimum(lo[..., 0], hi[..., 0]) <= pt[..., 0])
            & (pt[..., 0] <= np.maximum(lo[..., 0], hi[..., 0]))
            & (np.minimum(lo[..., 1], hi[..., 1]) <= pt[..., 1])
            & (pt[..., 1] <= np.maximum(lo[..., 1], hi[..., 1]))
        )

    return (
        ((d1 == 0) & on_segment(a, b, p0))
        | ((d2 == 0) & on_segment(a, b, p1))
        | ((d3 == 0) & on_segment(p0, p1, a + 0 * p0))
        | ((d4 == 0) & on_segment(p0, p1, b + 0 * p0))
    )


class DarkZoneEnv:
    """Dark-zone navigation environment. Stateless given its config."""

    def __init__(self, config: DarkZoneConfig | None = None):
        self.config = config or DarkZoneConfig()
        self.spec = EnvironmentSpec(
            state_dim=2, control_dim=2, obs_dim=2,
            control_bound=f"l2 norm <= {self.config.speed_limit}",
            gamma_task=1.0,
        )
        obs = np.asarray(self.config.obstacles, dtype=float)
        self._seg_a = obs[:, 0, :]
        self._seg_b = obs[:, 1, :]
        self._center = np.asarray(self.config.zone_center, dtype=float)

    # -- dynamics -------------------------------------------------------

    def clamp_control(self, control: Array) -> Array:
        control = np.asarray(control, dtype=float)
        norm = np.linalg.norm(control, axis=-1, keepdims=True)
        scale = np.where(norm > self.config.speed_limit,
                         self.config.speed_limit / np.maximum(norm, 1e-300), 1.0)
        return control * scale

    def _move(self, state: Array, noisy_control: Array) -> Array:
        cfg = self.config
        end = state + noisy_control
        hit = segments_intersect(state, end, self._seg_a, self._seg_b)
        norm = np.linalg.norm(noisy_control, axis=-1, keepdims=True)
        bounce = state - cfg.bounce_step * noisy_control / (norm + cfg.bounce_eps)
        return np.where(hit[..., None], bounce, end)

    def transition(self, state: Array, control: Array, rng: np.random.Generator) -> Array:
        state = np.asarray(state, dtype=float)
        control = self.clamp_control(np.broadcast_to(control, state.shape))
        noise = rng.normal(0.0, self.config.process_noise, size=state.shape)
        return self._move(state, control + noise)

    def transition_mean(self, state: Array, control: Array) -> Array:
        """Noise-free prediction, including the wall bounce rule."""
        state = np.asarray(state, dtype=float)
        control = self.clamp_control(np.broadcast_to(control, state.shape))
        return self._move(state, control)

    # -- observation ----------------------------------------------------

    def obs_noise_scale(self, state: Array) -> Array:
        state = np.asarray(state, dtype=float)
        if self.config.easy:
            return np.full(state.shape[:-1], self.config.noise_out)
        dist = np.linalg.norm(state - self._center, axis=-1)
        return np.where(dist >= self.config.zone_radius,
                        self.config.noise_out, self.config.noise_in)

    def emit(self, state: Array, rng: np.random.Generator) -> Array:
        state = np.asarray(state, dtype=float)
        scale = self.obs_noise_scale(state)
        return state + rng.normal(0.0, 1.0, size=state.shape) * scale[..., None]

    def emission_logpdf(self, obs: Array, states: Array, scale=None) -> Array:
        """Log-likelihood of `obs` per state; scale defaults to the true
        state-dependent model (the estimator knows the emission model)."""
        states = np.asarray(states, dtype=float)
        sig = self.obs_noise_scale(states) if scale is None else np.asarray(scale, dtype=float)
        diff = np.asarray(obs, dtype=float) - states
        d = states.shape[-1]
        return (-0.5 * np.sum(diff * diff, axis=-1) / sig**2
                - d * (np.log(sig) + 0.5 * _LOG_2PI))

    # -- task -----------------------------------------------------------

    def in_goal(self, state: Array) -> Array:
        xmin, xmax, ymin, ymax = self.config.goal_region
        state = np.asarray(state, dtype=float)
        x, y = state[..., 0], state[..., 1]
        return (xmin <= x) & (x <= xmax) & (ymin <= y) & (y <= ymax)

    def stage_cost(self, state: Array) -> Array:
        """0 inside the closed goal rectangle, 1 otherwise."""
        return np.where(self.in_goal(state), 0.0, 1.0)

    def step_cost(self, prev_state, control, next_state) -> Array:
        # Cost is charged on the pre-transition state.
        return self.stage_cost(prev_state)

    def is_success(self, rollout, final_only: bool = False) -> bool:
        states = rollout.states
        if final_only:
            return bool(self.in_goal(states[-1]))
        return bool(np.any(self.in_goal(states)))

    # -- hooks for estimator / planner / trackability --------------------

    def sample_prior_states(self, n: int, rng: np.random.Generator) -> Array:
        return rng.uniform(0.0, 1.0, size=(n, 2))

    def propose_plans(self, n: int, horizon: int, rng: np.random.Generator) -> Array:
        """Constant-velocity candidates: uniform direction, uniform speed up
        to the limit, repeated over the whole horizon."""
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        speed = rng.uniform(0.0, self.config.speed_limit, size=n)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1) * speed[:, None]
        return np.repeat(u[:, None, :], horizon, axis=1)

    def trackability_features(self, states: Array) -> Array:
        return np.asarray(states, dtype=float)

    def state_difference(self, a: Array, b: Array) -> Array:
        return np.asarray(a, dtype=float) - np.asarray(b, dtype=float)

    def position(self, states: Array) -> Array:
        return np.asarray(states, dtype=float)

    # -- grids for terminal fields and heatmaps --------------------------

    def grid_states(self, resolution: int) -> Array:
        """Cell-center states of a resolution x resolution grid over [0,1]^2,
        ordered row-major with y as the row index."""
        cell = 1.0 / resolution
        centers = (np.arange(resolution) + 0.5) * cell
        xx, yy = np.meshgrid(centers, centers)  # [iy, ix]
        return np.stack([xx.ravel(), yy.ravel()], axis=-1)

    def goal_mask(self, resolution: int) -> Array:
        return self.in_goal(self.grid_states(resolution)).reshape(resolution, resolution)

    def obstacle_mask(self, resolution: int) -> Array:
        """Cells crossed by non-boundary wall segments (the boundary walls
        coincide with the grid border and are handled by the domain edge)."""
        mask = np.zeros((resolution, resolution), dtype=bool)
        cell = 1.0 / resolution
        boundary = {tuple(map(tuple, np.asarray(w).tolist())) for w in BOUNDARY_WALLS}
        for seg in self.config.obstacles:
            if tuple(map(tuple, np.asarray(seg).tolist())) in boundary:
                continue
            a, b = np.asarray(seg[0], dtype=float), np.asarray(seg[1], dtype=float)
            n = max(2, int(np.ceil(np.linalg.norm(b - a) / (0.25 * cell))))
            pts = a + np.linspace(0.0, 1.0, n)[:, None] * (b - a)
            ix = np.clip((pts[:, 0] / cell).astype(int), 0, resolution - 1)
            iy = np.clip((pts[:, 1] / cell).astype(int), 0, resolution - 1)
            mask[iy, ix] = True
        return mask
