"""Supervision for the perception and prediction heads.

Segmentation-style heads use cross-entropy over the channel axis, optionally
restricted to the hardest k-fraction of cells since most of the grid is
background. Centerness is plain mean squared error; offset and flow are mean
absolute error over foreground cells only (averaged over cells and channels,
so a constant (1, 0) offset error costs 0.5). Depth supervision is
cross-entropy against the nearest depth bin, with out-of-range pixels masked
out of both the loss and the gradient. Losses for future timestamps are
combined with exponentially decaying weights.
"""

from __future__ import annotations

import numpy as np

from ..perception.rig import DepthBinning
from ..numerics.tensorops import log_softmax, log_softmax_backward

TOPK_FRACTION = 0.25
FUTURE_DISCOUNT = 0.95


def _flat_logits(logits: np.ndarray, labels: np.ndarray):
    if logits.shape[1:] != labels.shape:
        raise ValueError(f"cross entropy: logits {logits.shape} do not match "
                         f"labels {labels.shape}")
    c = logits.shape[0]
    flat = logits.reshape(c, -1)
    lab = labels.reshape(-1).astype(np.int64)
    if lab.size and (lab.min() < 0 or lab.max() >= c):
        raise ValueError(f"cross entropy: label outside [0, {c})")
    return flat, lab


def topk_cross_entropy(logits: np.ndarray, labels: np.ndarray,
                       k_fraction: float = TOPK_FRACTION):
    """Mean cross-entropy over the k-fraction hardest cells.

    Args:
      logits: [C, *spatial] unnormalized scores, channel first.
      labels: [*spatial] integer class per cell.
      k_fraction: in (0, 1]; the count is rounded up, at least one cell.

    Returns (scalar loss, cache).
    """
    if not 0.0 < k_fraction <= 1.0:
        raise ValueError(f"topk_cross_entropy: k fraction {k_fraction} not in (0, 1]")
    flat, lab = _flat_logits(logits, labels)
    n = lab.size
    logp = log_softmax(flat, axis=0)
    ce = -logp[lab, np.arange(n)]
    keep = max(1, int(np.ceil(k_fraction * n)))
    sel = np.argsort(ce)[::-1][:keep]
    loss = float(ce[sel].mean())
    return loss, (logp, lab, sel, logits.shape)


def topk_cross_entropy_backward(grad: float, cache) -> np.ndarray:
    logp, lab, sel, shape = cache
    glogp = np.zeros_like(logp)
    glogp[lab[sel], sel] = -grad / sel.size
    return log_softmax_backward(glogp, logp, axis=0).reshape(shape)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Ordinary mean cross-entropy (used for the map heads)."""
    return topk_cross_entropy(logits, labels, k_fraction=1.0)


cross_entropy_backward = topk_cross_entropy_backward


def centerness_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over every cell. Returns (scalar, cache)."""
    if pred.shape != target.shape:
        raise ValueError(f"centerness_loss: {pred.shape} vs {target.shape}")
    diff = pred - target
    return float((diff * diff).mean()), diff


def centerness_loss_backward(grad: float, cache) -> np.ndarray:
    diff = cache
    return (2.0 * grad / diff.size) * diff


def masked_l1_loss(pred: np.ndarray, target: np.ndarray, foreground: np.ndarray):
    """Mean absolute error over foreground cells, averaged over channels too.

    Args:
      pred, target: [C, *spatial].
      foreground: [*spatial] boolean mask; an empty mask gives loss 0 and a
        zero gradient.

    Returns (scalar, cache).
    """
    if pred.shape != target.shape:
        raise ValueError(f"masked_l1_loss: {pred.shape} vs {target.shape}")
    if pred.shape[1:] != foreground.shape:
        raise ValueError(f"masked_l1_loss: mask {foreground.shape} for "
                         f"fields {pred.shape}")
    count = int(foreground.sum()) * pred.shape[0]
    if count == 0:
        return 0.0, (None, pred.shape, 0)
    diff = (pred - target)[:, foreground]
    return float(np.abs(diff).mean()), (np.sign(diff), pred.shape, foreground)


def masked_l1_loss_backward(grad: float, cache) -> np.ndarray:
    sign, shape, foreground = cache
    g = np.zeros(shape)
    if sign is not None:
        g[:, foreground] = (grad / sign.size) * sign
    return g


def instance_losses(pred_centerness, pred_offset, pred_flow,
                    target_centerness, target_offset, target_flow,
                    foreground: np.ndarray):
    """The three instance-head losses for one frame.

    Returns ({"centerness", "offset", "flow"} -> scalar, caches triple).
    """
    l_center, c_cache = centerness_loss(pred_centerness, target_centerness)
    l_offset, o_cache = masked_l1_loss(pred_offset, target_offset, foreground)
    l_flow, f_cache = masked_l1_loss(pred_flow, target_flow, foreground)
    losses = {"centerness": l_center, "offset": l_offset, "flow": l_flow}
    return losses, (c_cache, o_cache, f_cache)


def instance_losses_backward(grads: dict, caches):
    c_cache, o_cache, f_cache = caches
    return (centerness_loss_backward(grads["centerness"], c_cache),
            masked_l1_loss_backward(grads["offset"], o_cache),
            masked_l1_loss_backward(grads["flow"], f_cache))


def depth_loss(depth_logits: np.ndarray, depth_target: np.ndarray,
               binning: DepthBinning):
    """Cross-entropy between predicted bin scores and the nearest true bin.

    Args:
      depth_logits: [D, *spatial].
      depth_target: [*spatial] metric depth; pixels outside the binning range
        are masked out of the loss and receive exactly zero gradient.

    Returns (scalar loss, all_masked flag, cache).
    """
    if depth_logits.shape[0] != binning.num_bins:
        raise ValueError(f"depth_loss: {depth_logits.shape[0]} score planes for "
                         f"{binning.num_bins} bins")
    if depth_logits.shape[1:] != depth_target.shape:
        raise ValueError(f"depth_loss: logits {depth_logits.shape} vs "
                         f"target {depth_target.shape}")
    d = depth_logits.shape[0]
    flat = depth_logits.reshape(d, -1)
    mask = binning.in_range(depth_target).reshape(-1)
    if not mask.any():
        return 0.0, True, (None, None, None, depth_logits.shape)
    bins = binning.bin_index(depth_target.reshape(-1)[mask])
    logp = log_softmax(flat, axis=0)
    cols = np.nonzero(mask)[0]
    loss = float(-logp[bins, cols].mean())
    return loss, False, (logp, bins, cols, depth_logits.shape)


def depth_loss_backward(grad: float, cache) -> np.ndarray:
    logp, bins, cols, shape = cache
    if logp is None:
        return np.zeros(shape)
    glogp = np.zeros_like(logp)
    glogp[bins, cols] = -grad / cols.size
    gx = log_softmax_backward(glogp, logp, axis=0)
    # columns with no supervision must stay exactly zero
    keep = np.zeros(gx.shape[1], dtype=bool)
    keep[cols] = True
    gx[:, ~keep] = 0.0
    return gx.reshape(shape)


def discounted_future_loss(losses: np.ndarray, gamma: float = FUTURE_DISCOUNT):
    """Combine per-timestep losses for t+1 .. t+H with weights gamma^j.

    Returns (scalar, cache); the weights are normalized so gamma = 1 is the
    ordinary mean.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.ndim != 1 or losses.size == 0:
        raise ValueError(f"discounted_future_loss: need a non-empty 1-d loss "
                         f"sequence, got shape {losses.shape}")
    if gamma <= 0:
        raise ValueError(f"discounted_future_loss: gamma {gamma} must be positive")
    weights = gamma ** np.arange(1, losses.size + 1, dtype=np.float64)
    weights /= weights.sum()
    return float(weights @ losses), weights


def discounted_future_loss_backward(grad: float, cache) -> np.ndarray:
    weights = cache
    return grad * weights
