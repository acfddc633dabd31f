"""Trajectory scoring: safety, learned cost volume, and comfort/progress rules.

The total is a plain sum of the three subcosts (no outer weighting); each
subcost is itself a dot product of fixed geometric features with its learnable
weight vector, so gradients with respect to the weights are exactly the
features. The cost-volume term additionally passes gradients back into the
decoded grid, which is how the planning loss trains the cost-volume head.

Safety features per candidate, summed over steps:
  collision  occupied cells inside the ego footprint
  margin     occupied cells inside the footprint inflated by the safety
             margin, scaled by that step's speed
  headway    occupied cells in a forward band of length 2s * speed ahead of
             the front bumper
  lane       distance from each waypoint to the nearest perceived lane cell
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..perception.rig import BevSpec
from .sampler import TrajectorySet

EGO_LENGTH = 4.7   # meters
EGO_WIDTH = 1.9
SAFETY_MARGIN = 0.5
HEADWAY_TIME = 2.0  # seconds
CLIP_BOUND = 100.0

SAFETY_TERMS = ("collision", "margin", "headway", "lane")
RULE_TERMS = ("lateral", "jerk", "curvature", "progress")


@dataclass(frozen=True)
class CostBreakdown:
    """Per-candidate subcosts; the total is their exact sum."""

    f_o: np.ndarray  # [N]
    f_v: np.ndarray  # [N]
    f_r: np.ndarray  # [N]

    @property
    def total(self) -> np.ndarray:
        return self.f_o + self.f_v + self.f_r


def footprint_cells(x: float, y: float, heading: float, spec: BevSpec,
                    length: float, width: float,
                    ahead: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Grid cells whose centers fall inside a rotated rectangle.

    The rectangle is centered at (x, y) with the given heading; `ahead`
    extends it that many meters past the front edge only (used for the
    headway band). Returns (rows, cols) index arrays.
    """
    rear = -length / 2.0
    front = length / 2.0 + ahead
    half_w = width / 2.0
    reach = max(abs(rear), abs(front)) + half_w
    i_lo = int(np.floor((x - reach) / spec.resolution + spec.h / 2.0))
    i_hi = int(np.floor((x + reach) / spec.resolution + spec.h / 2.0))
    j_lo = int(np.floor((y - reach) / spec.resolution + spec.w / 2.0))
    j_hi = int(np.floor((y + reach) / spec.resolution + spec.w / 2.0))
    i_lo, i_hi = max(i_lo, 0), min(i_hi, spec.h - 1)
    j_lo, j_hi = max(j_lo, 0), min(j_hi, spec.w - 1)
    if i_lo > i_hi or j_lo > j_hi:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    ii, jj = np.meshgrid(np.arange(i_lo, i_hi + 1), np.arange(j_lo, j_hi + 1),
                         indexing="ij")
    cx = (ii + 0.5 - spec.h / 2.0) * spec.resolution - x
    cy = (jj + 0.5 - spec.w / 2.0) * spec.resolution - y
    c, s = np.cos(heading), np.sin(heading)
    local_x = cx * c + cy * s
    local_y = -cx * s + cy * c
    inside = (local_x >= rear) & (local_x <= front) & (np.abs(local_y) <= half_w)
    return ii[inside].ravel(), jj[inside].ravel()


def headway_cells(x: float, y: float, heading: float, speed: float, spec: BevSpec,
                  length: float = EGO_LENGTH, width: float = EGO_WIDTH,
                  headway_time: float = HEADWAY_TIME):
    """Cells in the forward band of length speed * headway_time."""
    reach = speed * headway_time
    if reach <= 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    # band only: rectangle from the front bumper forward
    mid = length / 2.0 + reach / 2.0
    bx = x + mid * np.cos(heading)
    by = y + mid * np.sin(heading)
    return footprint_cells(bx, by, heading, spec, reach, width)


def safety_features(trajs: TrajectorySet, occupancy: np.ndarray,
                    lane_mask: np.ndarray, spec: BevSpec,
                    length: float = EGO_LENGTH, width: float = EGO_WIDTH,
                    margin: float = SAFETY_MARGIN,
                    headway_time: float = HEADWAY_TIME) -> np.ndarray:
    """Geometric safety features, [N, 4] ordered as SAFETY_TERMS.

    Args:
      occupancy: [H, H_b, W_b] boolean obstacle grids, one per step.
      lane_mask: [H_b, W_b] boolean perceived lane cells (empty mask makes the
        lane term 0).
    """
    if occupancy.shape[0] != trajs.horizon:
        raise ValueError(f"safety_features: {occupancy.shape[0]} occupancy frames for "
                         f"horizon {trajs.horizon}")
    if occupancy.shape[1:] != (spec.h, spec.w):
        raise ValueError(f"safety_features: occupancy {occupancy.shape[1:]} vs "
                         f"grid {(spec.h, spec.w)}")
    lane_xy = None
    if lane_mask is not None and lane_mask.any():
        li, lj = np.nonzero(lane_mask)
        lane_xy = np.stack([(li + 0.5 - spec.h / 2.0) * spec.resolution,
                            (lj + 0.5 - spec.w / 2.0) * spec.resolution], axis=1)
    feats = np.zeros((trajs.n, 4), dtype=np.float64)
    for n in range(trajs.n):
        for k in range(trajs.horizon):
            x, y, psi, v = trajs.states[n, k]
            occ = occupancy[k]
            fi, fj = footprint_cells(x, y, psi, spec, length, width)
            feats[n, 0] += occ[fi, fj].sum()
            mi, mj = footprint_cells(x, y, psi, spec, length + 2 * margin,
                                     width + 2 * margin)
            feats[n, 1] += occ[mi, mj].sum() * v
            hi, hj = headway_cells(x, y, psi, v, spec, length, width, headway_time)
            feats[n, 2] += occ[hi, hj].sum()
            if lane_xy is not None:
                d = np.hypot(lane_xy[:, 0] - x, lane_xy[:, 1] - y)
                feats[n, 3] += d.min()
    return feats


def safety_cost(trajs: TrajectorySet, occupancy: np.ndarray, lane_mask: np.ndarray,
                spec: BevSpec, w_o: np.ndarray, **kwargs):
    """f_o per candidate. Returns ([N] costs, feature matrix for the VJP)."""
    feats = safety_features(trajs, occupancy, lane_mask, spec, **kwargs)
    return feats @ w_o, feats


def costvolume_cost(trajs: TrajectorySet, cost_volume: np.ndarray, w_v: np.ndarray,
                    spec: BevSpec, clip_bound: float = CLIP_BOUND):
    """f_v per candidate: clipped nearest-cell lookups along the trajectory.

    Args:
      cost_volume: [H, H_b, W_b] decoded cost maps, one per step.
      w_v: learnable scalar as shape-[1] array.

    A waypoint outside the grid contributes the clip bound. Returns
    ([N] costs, cache for costvolume_cost_backward).
    """
    if cost_volume.shape[0] != trajs.horizon:
        raise ValueError(f"costvolume_cost: {cost_volume.shape[0]} cost frames for "
                         f"horizon {trajs.horizon}")
    i, j, ok = spec.cell_index(trajs.positions)
    raw = np.full((trajs.n, trajs.horizon), clip_bound, dtype=np.float64)
    kk = np.broadcast_to(np.arange(trajs.horizon), (trajs.n, trajs.horizon))
    raw[ok] = cost_volume[kk[ok], i[ok], j[ok]]
    clipped = np.clip(raw, -clip_bound, clip_bound)
    sums = clipped.sum(axis=1)
    cache = (i, j, ok, np.abs(raw) < clip_bound, cost_volume.shape, sums)
    return float(w_v[0]) * sums, cache


def costvolume_cost_backward(grad: np.ndarray, cache, w_v: np.ndarray):
    """VJP of costvolume_cost.

    grad: [N] upstream gradient per candidate. Returns (grad_cost_volume,
    grad_w_v).
    """
    i, j, ok, open_clip, cv_shape, sums = cache
    gcv = np.zeros(cv_shape, dtype=np.float64)
    n, h = i.shape
    kk = np.broadcast_to(np.arange(h), (n, h))
    live = ok & open_clip
    np.add.at(gcv, (kk[live], i[live], j[live]),
              (float(w_v[0]) * np.broadcast_to(grad[:, None], (n, h)))[live])
    gw_v = np.array([float(grad @ sums)])
    return gcv, gw_v


def rule_features(trajs: TrajectorySet) -> np.ndarray:
    """Comfort and progress features, [N, 4] ordered as RULE_TERMS.

    Per-step curvature is heading change over distance traveled; lateral
    acceleration is speed squared times curvature; jerk is the second
    difference of the speed profile. The progress column is the negative
    arc length, so a positive progress weight rewards moving.
    """
    n, h = trajs.n, trajs.horizon
    psi = np.concatenate([np.full((n, 1), trajs.start.heading), trajs.headings], axis=1)
    dpsi = np.diff(psi, axis=1)                    # [N, H]
    ds = trajs.velocities * trajs.dt               # distance per step
    curv = np.where(ds > 1e-9, dpsi / np.maximum(ds, 1e-9), 0.0)
    lat = trajs.velocities ** 2 * np.abs(curv)
    v_full = np.concatenate([np.full((n, 1), trajs.start.velocity),
                             trajs.velocities], axis=1)
    acc = np.diff(v_full, axis=1) / trajs.dt       # [N, H]
    jerk = np.abs(np.diff(acc, axis=1)) / trajs.dt if h >= 2 else np.zeros((n, 0))
    feats = np.zeros((n, 4), dtype=np.float64)
    feats[:, 0] = lat.mean(axis=1)
    feats[:, 1] = jerk.mean(axis=1) if jerk.shape[1] else 0.0
    feats[:, 2] = np.abs(curv).mean(axis=1)
    feats[:, 3] = -ds.sum(axis=1)
    return feats


def rule_cost(trajs: TrajectorySet, w_r: np.ndarray):
    """f_r per candidate. Returns ([N] costs, feature matrix for the VJP)."""
    feats = rule_features(trajs)
    return feats @ w_r, feats


def evaluate_costs(trajs: TrajectorySet, occupancy: np.ndarray, lane_mask: np.ndarray,
                   cost_volume: np.ndarray, spec: BevSpec,
                   w_o: np.ndarray, w_v: np.ndarray, w_r: np.ndarray,
                   clip_bound: float = CLIP_BOUND, **safety_kwargs):
    """Score every candidate. Returns (CostBreakdown, cache for the VJPs)."""
    f_o, sfeats = safety_cost(trajs, occupancy, lane_mask, spec, w_o, **safety_kwargs)
    f_v, cv_cache = costvolume_cost(trajs, cost_volume, w_v, spec, clip_bound)
    f_r, rfeats = rule_cost(trajs, w_r)
    return CostBreakdown(f_o, f_v, f_r), (sfeats, cv_cache, rfeats)


def evaluate_costs_backward(grad_total: np.ndarray, cache, w_v: np.ndarray):
    """VJP of evaluate_costs with respect to all weights and the cost volume.

    grad_total: [N] gradient on each candidate's total cost. Returns
    (grad_w_o, grad_w_v, grad_w_r, grad_cost_volume).
    """
    sfeats, cv_cache, rfeats = cache
    gw_o = grad_total @ sfeats
    gcv, gw_v = costvolume_cost_backward(grad_total, cv_cache, w_v)
    gw_r = grad_total @ rfeats
    return gw_o, gw_v, gw_r, gcv


def select_best(trajs: TrajectorySet, costs: CostBreakdown, command: str) -> int:
    """Index of the cheapest candidate whose label matches the command."""
    idx = [n for n, lbl in enumerate(trajs.labels) if lbl == command]
    if not idx:
        raise ValueError(f"select_best: no candidate labeled {command!r}")
    totals = costs.total[idx]
    return idx[int(np.argmin(totals))]
