"""Temporal fusion of aligned BEV frames.

Two steps. First, discounted accumulation folds every earlier frame into each
timestamp (all frames must already sit in the current ego frame):

    acc_1 = b_1
    acc_t = b_t + sum_{i=1..t-1} alpha^i * acc_{t-i}

Second, a shape-preserving 3D conv block mixes the accumulated stack. Each
frame gets its ego motion appended as 12 constant channels (the flattened
3x4 pose matrix), then three parallel branches run over the stack:

    branch 1   conv3d kernel (2,3,3), same padding, relu
    branch 2   conv3d kernel (1,3,3), same padding, relu
    branch 3   mean pool over (2 frames, all H, all W), broadcast back

Their outputs are concatenated with the augmented input and compressed back
to C channels by a 1x1x1 convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..numerics.conv import conv3d, conv3d_backward
from ..numerics.tensorops import (
    relu,
    relu_backward,
    temporal_window_pool,
    temporal_window_pool_backward,
)
from ..numerics.pose import Se3Pose

ACCUMULATE_DISCOUNT = 0.5
EGO_CHANNELS = 12
POOL_WINDOW = 2


def accumulate(bev_history: np.ndarray, alpha: float = ACCUMULATE_DISCOUNT) -> np.ndarray:
    """Discounted accumulation over aligned BEV frames.

    Args:
      bev_history: [t, C, H, W], oldest frame first, all in the current frame.
      alpha: per-step discount on earlier accumulated frames.

    Returns:
      [t, C, H, W] accumulated frames. Runs the recursion through a single
      running sum: with s_t = sum_i alpha^i * acc_{t-i}, the update
      s_{t+1} = alpha * (acc_t + s_t) folds the whole history in O(t).
    """
    b = np.asarray(bev_history)
    if b.ndim != 4 or b.shape[0] == 0:
        raise ValueError(f"accumulate: expected non-empty [t,C,H,W], got {b.shape}")
    out = np.empty_like(b)
    s = np.zeros_like(b[0])
    for j in range(b.shape[0]):
        out[j] = b[j] + s
        s = alpha * (out[j] + s)
    return out


def accumulate_backward(grad: np.ndarray, alpha: float = ACCUMULATE_DISCOUNT) -> np.ndarray:
    """VJP of accumulate: reverse-mode pass over the running-sum recursion."""
    g = np.asarray(grad)
    out = np.empty_like(g)
    gs = np.zeros_like(g[0])
    for j in range(g.shape[0] - 1, -1, -1):
        gx = g[j] + alpha * gs
        out[j] = gx
        gs = gx + alpha * gs
    return out


@dataclass(frozen=True)
class FusionParams:
    """Weights of the temporal conv block over [C+12, t, H, W] stacks."""

    w_wide: np.ndarray    # [C, C+12, 2, 3, 3]
    b_wide: np.ndarray    # [C]
    w_narrow: np.ndarray  # [C, C+12, 1, 3, 3]
    b_narrow: np.ndarray  # [C]
    w_out: np.ndarray     # [C, 4C+24, 1, 1, 1]
    b_out: np.ndarray     # [C]

    @property
    def channels(self) -> int:
        return self.w_wide.shape[0]

    def map(self, fn) -> "FusionParams":
        return FusionParams(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


def init_fusion_params(channels: int, rng: np.random.Generator,
                       dtype=np.float32, scale: float = 1.0) -> FusionParams:
    cin = channels + EGO_CHANNELS

    def k(shape):
        fan = shape[1] * shape[2] * shape[3] * shape[4]
        return rng.normal(0.0, scale / np.sqrt(fan), size=shape).astype(dtype)

    zeros = np.zeros(channels, dtype=dtype)
    return FusionParams(
        w_wide=k((channels, cin, 2, 3, 3)), b_wide=zeros.copy(),
        w_narrow=k((channels, cin, 1, 3, 3)), b_narrow=zeros.copy(),
        w_out=k((channels, 2 * cin + 2 * channels, 1, 1, 1)), b_out=zeros.copy(),
    )


def identity_fusion_params(channels: int, dtype=np.float32) -> FusionParams:
    """Compression picks the raw feature channels; side branches zeroed.

    With these weights the block is an exact pass-through, which pins the
    channel layout of the concatenation.
    """
    cin = channels + EGO_CHANNELS
    p = FusionParams(
        w_wide=np.zeros((channels, cin, 2, 3, 3), dtype=dtype),
        b_wide=np.zeros(channels, dtype=dtype),
        w_narrow=np.zeros((channels, cin, 1, 3, 3), dtype=dtype),
        b_narrow=np.zeros(channels, dtype=dtype),
        w_out=np.zeros((channels, 2 * cin + 2 * channels, 1, 1, 1), dtype=dtype),
        b_out=np.zeros(channels, dtype=dtype),
    )
    w = p.w_out.copy()
    for c in range(channels):
        w[c, c, 0, 0, 0] = 1.0
    return FusionParams(**{**{f.name: getattr(p, f.name) for f in fields(p)}, "w_out": w})


def _augment(frames: np.ndarray, ego_motions) -> np.ndarray:
    """[t, C, H, W] + poses -> [C+12, t, H, W] with ego channels appended."""
    t, c, h, w = frames.shape
    aug = np.empty((c + EGO_CHANNELS, t, h, w), dtype=frames.dtype)
    aug[:c] = frames.transpose(1, 0, 2, 3)
    for i, pose in enumerate(ego_motions):
        vals = pose.matrix34().reshape(-1).astype(frames.dtype)
        aug[c:, i] = vals[:, None, None]
    return aug


def temporal_fuse(accumulated: np.ndarray, ego_motions, params: FusionParams):
    """Run the conv block over accumulated frames.

    Args:
      accumulated: [t, C, H, W], oldest first.
      ego_motions: one Se3Pose per frame mapping that frame into the current
        one (identity for the current frame).
      params: block weights with channels == C.

    Returns:
      (fused [t, C, H, W], cache)
    """
    t, c, h, w = accumulated.shape
    if len(ego_motions) != t:
        raise ValueError(f"temporal_fuse: {t} frames but {len(ego_motions)} ego motions")
    if params.channels != c:
        raise ValueError(f"temporal_fuse: params carry {params.channels} channels, input {c}")
    aug = _augment(accumulated, ego_motions)
    pre_wide = conv3d(aug, params.w_wide, params.b_wide, padding="same")
    wide = relu(pre_wide)
    pre_narrow = conv3d(aug, params.w_narrow, params.b_narrow, padding="same")
    narrow = relu(pre_narrow)
    pooled = temporal_window_pool(aug, POOL_WINDOW)                   # [C+12, t]
    pooled_b = np.broadcast_to(pooled[:, :, None, None], aug.shape)
    cat = np.concatenate([aug, wide, narrow, pooled_b], axis=0)
    out = conv3d(cat, params.w_out, params.b_out, padding="same")
    cache = (aug, pre_wide, pre_narrow, cat)
    return out.transpose(1, 0, 2, 3), cache


def temporal_fuse_backward(grad: np.ndarray, cache, params: FusionParams):
    """VJP of temporal_fuse. Returns (grad_accumulated [t,C,H,W], FusionParams grads)."""
    aug, pre_wide, pre_narrow, cat = cache
    c = params.channels
    cin = c + EGO_CHANNELS
    g = np.ascontiguousarray(grad.transpose(1, 0, 2, 3))
    gcat, gw_out, gb_out = conv3d_backward(g, cat, params.w_out, padding="same")
    gaug = gcat[:cin].copy()
    gwide = relu_backward(gcat[cin:cin + c], pre_wide)
    gnarrow = relu_backward(gcat[cin + c:cin + 2 * c], pre_narrow)
    gpooled_b = gcat[cin + 2 * c:]
    ga, gw_wide, gb_wide = conv3d_backward(gwide, aug, params.w_wide, padding="same")
    gaug += ga
    ga, gw_narrow, gb_narrow = conv3d_backward(gnarrow, aug, params.w_narrow, padding="same")
    gaug += ga
    gaug += temporal_window_pool_backward(gpooled_b.sum(axis=(2, 3)), aug.shape, POOL_WINDOW)
    grads = FusionParams(w_wide=gw_wide, b_wide=gb_wide,
                         w_narrow=gw_narrow, b_narrow=gb_narrow,
                         w_out=gw_out, b_out=gb_out)
    return np.ascontiguousarray(gaug[:c].transpose(1, 0, 2, 3)), grads
