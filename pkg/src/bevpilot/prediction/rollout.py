"""Dual-pathway future rollout over BEV states.

Two convolutional GRUs predict each future state and a learned gate arbitrates
between them per cell:

  pathway a  input: the sampled latent, broadcast as constant planes;
             hidden: the newest state, then each step's mixture
  pathway b  warmed up over the observed history x_1..x_t (initial hidden
             x_1); afterwards each step consumes the mixture as input and its
             own output as hidden

  gate       3x3 convolution over concat(pa, pb) to 2 channels, softmax over
             the pair, mixture = g0*pa + g1*pb (per-cell convex combination)

The mixture is the predicted state and re-enters both pathways; H steps yield
x̂_{t+1}..x̂_{t+H}.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..numerics.conv import conv2d, conv2d_backward
from ..numerics.gru import GruCellParams, gru_cell, gru_cell_backward, init_gru_params
from ..numerics.tensorops import softmax, softmax_backward

_GRU_FIELDS = tuple(f.name for f in fields(GruCellParams))


@dataclass(frozen=True)
class RolloutParams:
    gru_a: GruCellParams   # input = latent planes, hidden = state
    gru_b: GruCellParams   # input = state, hidden = state
    gate_w: np.ndarray     # [2, 2C, 3, 3]
    gate_b: np.ndarray     # [2]

    def map(self, fn) -> "RolloutParams":
        return RolloutParams(gru_a=self.gru_a.map(fn), gru_b=self.gru_b.map(fn),
                             gate_w=fn(self.gate_w), gate_b=fn(self.gate_b))


def init_rollout_params(channels: int, latent_planes: int, rng: np.random.Generator,
                        dtype=np.float32, scale: float = 1.0) -> RolloutParams:
    return RolloutParams(
        gru_a=init_gru_params(latent_planes, channels, rng, dtype, scale),
        gru_b=init_gru_params(channels, channels, rng, dtype, scale),
        gate_w=rng.normal(0.0, scale / np.sqrt(2 * channels * 9),
                          size=(2, 2 * channels, 3, 3)).astype(dtype),
        gate_b=np.zeros(2, dtype=dtype),
    )


def broadcast_latent(eta: np.ndarray, h: int, w: int) -> np.ndarray:
    """A latent vector becomes constant planes; a grid becomes one plane."""
    if eta.ndim == 1:
        return np.broadcast_to(eta[:, None, None], (eta.shape[0], h, w)).copy()
    if eta.ndim == 2:
        if eta.shape != (h, w):
            raise ValueError(f"broadcast_latent: grid {eta.shape} vs state {h}x{w}")
        return eta[None].copy()
    raise ValueError(f"broadcast_latent: latent rank {eta.ndim} unsupported")


def dual_rollout(history: np.ndarray, eta: np.ndarray, params: RolloutParams, horizon: int):
    """Roll the state forward `horizon` steps.

    Args:
      history: [t, C, H, W] fused past states, oldest first, t >= 1.
      eta: sampled latent, [L] vector or [H, W] grid.
      horizon: number of future steps (0 gives an empty result).

    Returns:
      (futures [horizon, C, H, W], cache)
    """
    if history.ndim != 4 or history.shape[0] == 0:
        raise ValueError(f"dual_rollout: expected non-empty [t,C,H,W], got {history.shape}")
    t, c, h, w = history.shape
    eta_planes = broadcast_latent(eta, h, w).astype(history.dtype)

    warm_caches = []
    hb = history[0]
    for i in range(t):
        hb, cache = gru_cell(history[i], hb, params.gru_b)
        warm_caches.append(cache)

    futures = np.empty((horizon, c, h, w), dtype=history.dtype)
    step_caches = []
    mix = history[-1]
    for k in range(horizon):
        pa, cache_a = gru_cell(eta_planes, mix, params.gru_a)
        pb, cache_b = gru_cell(mix, hb, params.gru_b)
        glogit = conv2d(np.concatenate([pa, pb], axis=0), params.gate_w, params.gate_b)
        gate = softmax(glogit, axis=0)
        mix = gate[0] * pa + gate[1] * pb
        futures[k] = mix
        step_caches.append((cache_a, cache_b, pa, pb, gate))
        hb = pb
    cache = (history.shape, eta.shape, eta_planes, warm_caches, step_caches)
    return futures, cache


def _add_gru(acc: dict, grads: GruCellParams) -> None:
    for name in _GRU_FIELDS:
        acc[name] += getattr(grads, name)


def dual_rollout_backward(grad: np.ndarray, cache, params: RolloutParams):
    """VJP of dual_rollout.

    Returns (grad_history [t,C,H,W], grad_eta matching eta's shape,
    RolloutParams grads).
    """
    hist_shape, eta_shape, eta_planes, warm_caches, step_caches = cache
    t, c, h, w = hist_shape
    acc_a = {n: np.zeros_like(getattr(params.gru_a, n)) for n in _GRU_FIELDS}
    acc_b = {n: np.zeros_like(getattr(params.gru_b, n)) for n in _GRU_FIELDS}
    gw_gate = np.zeros_like(params.gate_w)
    gb_gate = np.zeros_like(params.gate_b)
    geta_planes = np.zeros_like(eta_planes)
    ghist = np.zeros(hist_shape, dtype=grad.dtype)

    gmix = np.zeros((c, h, w), dtype=grad.dtype)
    ghb = np.zeros((c, h, w), dtype=grad.dtype)
    for k in range(len(step_caches) - 1, -1, -1):
        cache_a, cache_b, pa, pb, gate = step_caches[k]
        gm = gmix + grad[k]
        gpa = gm * gate[0]
        gpb = gm * gate[1] + ghb          # pb also became the next hidden
        ggate = np.stack([(gm * pa).sum(axis=0), (gm * pb).sum(axis=0)])
        glogit = softmax_backward(ggate, gate, axis=0)
        gcat, gw, gb = conv2d_backward(glogit, np.concatenate([pa, pb], axis=0), params.gate_w)
        gw_gate += gw
        gb_gate += gb
        gpa = gpa + gcat[:c]
        gpb = gpb + gcat[c:]
        g_eta, g_hidden_a, ga = gru_cell_backward(gpa, cache_a, params.gru_a)
        g_mix_in, g_hb, gbp = gru_cell_backward(gpb, cache_b, params.gru_b)
        _add_gru(acc_a, ga)
        _add_gru(acc_b, gbp)
        geta_planes += g_eta
        gmix = g_hidden_a + g_mix_in
        ghb = g_hb

    # mix_0 was the newest history frame
    ghist[t - 1] += gmix

    # warm-up pass of pathway b, newest step first
    for i in range(t - 1, -1, -1):
        gx, ghb, gbp = gru_cell_backward(ghb, warm_caches[i], params.gru_b)
        ghist[i] += gx
        _add_gru(acc_b, gbp)
    ghist[0] += ghb  # initial hidden of the warm-up

    if len(eta_shape) == 1:
        geta = geta_planes.sum(axis=(1, 2))
    else:
        geta = geta_planes.sum(axis=0)
    pgrads = RolloutParams(gru_a=GruCellParams(**acc_a), gru_b=GruCellParams(**acc_b),
                           gate_w=gw_gate, gate_b=gb_gate)
    return ghist, geta, pgrads
