"""Lifting image features into 3D frustums and pooling them onto the BEV grid.

A frustum pairs a [C, D, H_e, W_e] feature block with the ego-frame 3D anchor
of every (depth bin, cell) entry. Alignment across time is a rigid transform
of the anchors only; features are never resampled, so no interpolation error
enters the temporal stack. Pooling then bins each anchor into the BEV cell
containing its (x, y) and sums, which conserves feature mass exactly for
in-bounds points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.pose import Se3Pose
from .rig import BevSpec

HEIGHT_BAND = (-2.0, 4.0)  # meters relative to ego ground


@dataclass(frozen=True)
class FrustumGrid:
    """Lifted features plus the 3D anchor of every entry."""

    features: np.ndarray  # [C, D, H_e, W_e]
    anchors: np.ndarray   # [D, H_e, W_e, 3] float64, ego frame

    def __post_init__(self):
        if self.features.shape[1:] != self.anchors.shape[:3]:
            raise ValueError(f"FrustumGrid: features {self.features.shape} vs "
                             f"anchors {self.anchors.shape}")


def lift(features: np.ndarray, depth: np.ndarray):
    """Outer product of per-cell features with a per-cell depth distribution.

    Args:
      features: [C, H_e, W_e]
      depth: [D, H_e, W_e], each cell's bins summing to 1.

    Returns:
      (lifted [C, D, H_e, W_e], cache). Summing the output over the depth
      axis recovers the input features exactly.
    """
    if features.shape[1:] != depth.shape[1:]:
        raise ValueError(f"lift: spatial extents differ, features {features.shape}, "
                         f"depth {depth.shape}")
    lifted = features[:, None, :, :] * depth[None, :, :, :]
    return lifted, (features, depth)


def lift_backward(grad: np.ndarray, cache):
    """VJP of lift. Returns (grad_features, grad_depth)."""
    features, depth = cache
    gf = (grad * depth[None]).sum(axis=1)
    gd = (grad * features[:, None]).sum(axis=0)
    return gf, gd


def warp_to_current(frustum: FrustumGrid, ego_motion: Se3Pose) -> FrustumGrid:
    """Express a past frustum in the current ego frame.

    ego_motion maps points from the frustum's capture frame into the current
    frame. Only anchors move; the feature block is shared, not copied.
    """
    return FrustumGrid(frustum.features, ego_motion.apply(frustum.anchors))


def voxel_pool(frustums: list[FrustumGrid], spec: BevSpec,
               height_band: tuple[float, float] = HEIGHT_BAND):
    """Sum-pool frustum features into BEV cells by anchor position.

    Every anchor inside the grid extent and the height band adds its feature
    vector to its nearest cell; everything else is dropped and counted.

    Returns:
      (bev [C, H_b, W_b], dropped count, cache)
    """
    if not frustums:
        raise ValueError("voxel_pool: empty frustum list")
    c = frustums[0].features.shape[0]
    bev = np.zeros((c, spec.h * spec.w), dtype=frustums[0].features.dtype)
    dropped = 0
    cache = []
    for fr in frustums:
        if fr.features.shape[0] != c:
            raise ValueError("voxel_pool: frustums disagree on channel count")
        pts = fr.anchors.reshape(-1, 3)
        i, j, ok = spec.cell_index(pts[:, :2])
        ok &= (pts[:, 2] >= height_band[0]) & (pts[:, 2] <= height_band[1])
        dropped += int((~ok).sum())
        flat = i[ok] * spec.w + j[ok]
        feats = fr.features.reshape(c, -1)[:, ok]
        for ch in range(c):
            bev[ch] += np.bincount(flat, weights=feats[ch],
                                   minlength=spec.h * spec.w).astype(bev.dtype)
        cache.append((ok, flat, fr.features.shape))
    return bev.reshape(c, spec.h, spec.w), dropped, cache


def voxel_pool_backward(grad: np.ndarray, cache) -> list[np.ndarray]:
    """VJP of voxel_pool: gather the cell gradient back to each frustum entry."""
    c = grad.shape[0]
    gflat = grad.reshape(c, -1)
    out = []
    for ok, flat, shape in cache:
        g = np.zeros((c, ok.size), dtype=grad.dtype)
        g[:, ok] = gflat[:, flat]
        out.append(g.reshape(shape))
    return out
