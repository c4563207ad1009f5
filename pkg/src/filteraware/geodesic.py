"""Gridded shortest-path distance fields used as terminal costs.

Multi-source Dijkstra on an 8-connected grid with sqrt(2)-weighted diagonals.
Distances are tracked as integer (straight, diagonal) step counts and only
converted to floats at the end, so two correct implementations produce
bit-identical values and the adjacency invariant holds exactly.

Grid convention throughout: `values[iy, ix]` with the cell center of (ix, iy)
at (origin + (ix + 0.5) * cell_size, origin + (iy + 0.5) * cell_size).
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

from . import nn
from .core import Array

log = logging.getLogger(__name__)

SQRT2 = float(np.sqrt(2.0))

_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


@dataclass(frozen=True)
class DistanceField:
    """Geodesic distances in world units; +inf marks obstacles and
    unreachable cells. Goal cells hold 0."""

    values: Array  # (res_y, res_x)
    cell_size: float
    origin: tuple = (0.0, 0.0)

    @property
    def shape(self):
        return self.values.shape


def compute_field(obstacle_mask: Array, goal_mask: Array, cell_size: float) -> DistanceField:
    """Multi-source shortest path from all goal cells, 8-connected, with
    diagonal steps costing sqrt(2) * cell_size. Obstacle cells get +inf."""
    obstacle_mask = np.asarray(obstacle_mask, dtype=bool)
    goal_mask = np.asarray(goal_mask, dtype=bool)
    if obstacle_mask.shape != goal_mask.shape:
        raise ValueError("masks must have the same shape")
    if not np.any(goal_mask & ~obstacle_mask):
        raise ValueError("need at least one free goal cell")

    ny, nx = obstacle_mask.shape
    straight = np.full((ny, nx), -1, dtype=np.int64)
    diagonal = np.full((ny, nx), -1, dtype=np.int64)
    done = np.zeros((ny, nx), dtype=bool)

    heap = []
    for iy, ix in zip(*np.nonzero(goal_mask & ~obstacle_mask)):
        straight[iy, ix] = 0
        diagonal[iy, ix] = 0
        heapq.heappush(heap, (0.0, int(iy), int(ix)))

    while heap:
        _, iy, ix = heapq.heappop(heap)
        if done[iy, ix]:
            continue
        done[iy, ix] = True
        s0, d0 = straight[iy, ix], diagonal[iy, ix]
        for dy, dx in _NEIGHBORS:
            jy, jx = iy + dy, ix + dx
            if not (0 <= jy < ny and 0 <= jx < nx) or obstacle_mask[jy, jx] or done[jy, jx]:
                continue
            s1, d1 = (s0, d0 + 1) if dy != 0 and dx != 0 else (s0 + 1, d0)
            key = s1 + d1 * SQRT2
            old = straight[jy, jx]
            if old < 0 or key < straight[jy, jx] + diagonal[jy, jx] * SQRT2:
                straight[jy, jx] = s1
                diagonal[jy, jx] = d1
                heapq.heappush(heap, (key, jy, jx))

    values = np.where(straight >= 0, (straight + diagonal * SQRT2) * cell_size, np.inf)
    return DistanceField(values=values, cell_size=float(cell_size))


def query(field: DistanceField, points: Array) -> Array:
    """Bilinear read of the field at continuous points (shape (..., 2)).

    Out-of-domain points are clamped to the boundary. A corner holding +inf is
    replaced by the largest finite corner value plus one cell of penalty; if
    every corner is infinite the result is +inf.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    p = pts[None, :] if single else pts

    ny, nx = field.shape
    cs = field.cell_size
    gx = (p[..., 0] - field.origin[0]) / cs - 0.5
    gy = (p[..., 1] - field.origin[1]) / cs - 0.5
    clipped_x = np.clip(gx, 0.0, nx - 1.0)
    clipped_y = np.clip(gy, 0.0, ny - 1.0)
    if np.any(clipped_x != gx) or np.any(clipped_y != gy):
        log.debug("distance field queried outside its domain; clamping")
    gx, gy = clipped_x, clipped_y

    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    x0 = np.minimum(x0, nx - 2) if nx > 1 else x0
    y0 = np.minimum(y0, ny - 2) if ny > 1 else y0
    x1 = np.minimum(x0 + 1, nx - 1)
    y1 = np.minimum(y0 + 1, ny - 1)
    fx = gx - x0
    fy = gy - y0

    corners = np.stack([
        field.values[y0, x0], field.values[y0, x1],
        field.values[y1, x0], field.values[y1, x1],
    ])
    finite = np.isfinite(corners)
    all_infinite = None
    if not finite.all():
        any_finite = finite.any(axis=0)
        all_infinite = ~any_finite
        cap = np.where(any_finite,
                       np.max(np.where(finite, corners, -np.inf), axis=0) + cs,
                       0.0)  # placeholder; fully infinite cells are set below
        corners = np.where(finite, corners, cap)

    v = (corners[0] * (1 - fx) * (1 - fy) + corners[1] * fx * (1 - fy)
         + corners[2] * (1 - fx) * fy + corners[3] * fx * fy)
    if all_infinite is not None:
        v = np.where(all_infinite, np.inf, v)
    return float(v[0]) if single else v


def constrained_field(obstacle_mask: Array, goal_mask: Array, net: nn.Mlp,
                      delta: float, cell_size: float, feature_fn=None,
                      origin=(0.0, 0.0)) -> DistanceField:
    """Distance field that treats cells violating the trackability threshold
    as obstacles: a cell is blocked when net(center features) > delta."""
    obstacle_mask = np.asarray(obstacle_mask, dtype=bool)
    goal_mask = np.asarray(goal_mask, dtype=bool)
    ny, nx = obstacle_mask.shape
    cx = origin[0] + (np.arange(nx) + 0.5) * cell_size
    cy = origin[1] + (np.arange(ny) + 0.5) * cell_size
    xx, yy = np.meshgrid(cx, cy)
    centers = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    feats = centers if feature_fn is None else feature_fn(centers)
    violating = (nn.forward(net, feats) > delta).reshape(ny, nx)

    # Goal cells always stay sources so the field is well-defined.
    blocked = (obstacle_mask | violating) & ~goal_mask
    out = compute_field(blocked, goal_mask, cell_size)
    free_non_goal = ~blocked & ~goal_mask
    if np.any(free_non_goal) and not np.any(np.isfinite(out.values[free_non_goal])):
        log.warning("constraint threshold %.3g encloses the goal; field is "
                    "infinite outside the goal region", delta)
    return out


def save_field_csv(field: DistanceField, path) -> None:
    """Row-major CSV dump; +inf is serialized as 'inf'."""
    with open(path, "w") as fh:
        for row in field.values:
            fh.write(",".join("inf" if not np.isfinite(v) else repr(float(v))
                              for v in row) + "\n")


def load_field_csv(path, cell_size: float, origin=(0.0, 0.0)) -> DistanceField:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([np.inf if tok == "inf" else float(tok)
                             for tok in line.split(",")])
    return DistanceField(np.array(rows, dtype=float), cell_size, origin)
