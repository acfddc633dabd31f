"""Trajectory refinement with a dense GRU.

The hidden state starts from pooled front-camera features (projected to the
hidden size); each step consumes the previous refined position (starting at
the origin), the selected trajectory's next point, and the fixed target
point, then a linear head reads the refined waypoint off the hidden state.
All positions are in the planning frame, meters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.gru import (
    DenseGruParams,
    dense_gru_cell,
    dense_gru_cell_backward,
    init_dense_gru_params,
)
from ..numerics.tensorops import (
    global_avg_pool,
    global_avg_pool_backward,
    linear,
    linear_backward,
)

REFINE_INPUT = 6  # (prev x, prev y, tau x, tau y, target x, target y)


@dataclass(frozen=True)
class RefineParams:
    proj_w: np.ndarray  # [C, nh] front-feature projection
    proj_b: np.ndarray  # [nh]
    gru: DenseGruParams  # input 6, hidden nh
    out_w: np.ndarray   # [nh, 2]
    out_b: np.ndarray   # [2]

    def map(self, fn) -> "RefineParams":
        return RefineParams(proj_w=fn(self.proj_w), proj_b=fn(self.proj_b),
                            gru=self.gru.map(fn), out_w=fn(self.out_w),
                            out_b=fn(self.out_b))


def init_refine_params(feat_channels: int, hidden: int, rng: np.random.Generator,
                       dtype=np.float32, scale: float = 1.0,
                       out_scale: float | None = None) -> RefineParams:
    """out_scale sizes the output head separately: waypoints are meters, so
    the head needs a much larger range than the unit-scale gate weights."""
    if out_scale is None:
        out_scale = scale
    return RefineParams(
        proj_w=rng.normal(0.0, scale / np.sqrt(feat_channels),
                          size=(feat_channels, hidden)).astype(dtype),
        proj_b=np.zeros(hidden, dtype=dtype),
        gru=init_dense_gru_params(REFINE_INPUT, hidden, rng, dtype, scale),
        out_w=rng.normal(0.0, out_scale / np.sqrt(hidden),
                         size=(hidden, 2)).astype(dtype),
        out_b=np.zeros(2, dtype=dtype),
    )


def pool_front_features(features: np.ndarray, params: RefineParams):
    """[C, H_e, W_e] front-camera features -> initial hidden state [nh]."""
    pooled = global_avg_pool(features)
    h0 = linear(pooled, params.proj_w, params.proj_b)
    return h0, (pooled, features.shape)


def pool_front_features_backward(gh0: np.ndarray, cache, params: RefineParams):
    pooled, shape = cache
    gpooled, gw, gb = linear_backward(gh0, pooled, params.proj_w)
    return global_avg_pool_backward(gpooled, shape), gw, gb


def refine(tau: np.ndarray, h0: np.ndarray, target: np.ndarray, params: RefineParams):
    """Refine a selected trajectory.

    Args:
      tau: [H, 2] selected waypoints, H >= 1.
      h0: [nh] initial hidden state (pooled front-view features).
      target: [2] target point.

    Returns (refined [H, 2], cache).
    """
    if tau.ndim != 2 or tau.shape[0] == 0 or tau.shape[1] != 2:
        raise ValueError(f"refine: expected [H>=1, 2] waypoints, got {tau.shape}")
    horizon = tau.shape[0]
    dtype = h0.dtype
    refined = np.empty((horizon, 2), dtype=dtype)
    prev = np.zeros(2, dtype=dtype)
    h = h0
    caches = []
    hiddens = []
    for k in range(horizon):
        inp = np.concatenate([prev, tau[k].astype(dtype), target.astype(dtype)])
        h, c = dense_gru_cell(inp, h, params.gru)
        refined[k] = linear(h, params.out_w, params.out_b)
        caches.append(c)
        hiddens.append(h)
        prev = refined[k]
    return refined, (caches, hiddens, tau.shape)


def refine_backward(grad: np.ndarray, cache, params: RefineParams):
    """VJP of refine.

    grad: [H, 2] gradient on the refined waypoints. Returns
    (grad_tau [H, 2], grad_h0 [nh], grad_target [2], grads: RefineParams with
    zero projection grads — pool_front_features_backward fills those).
    """
    caches, hiddens, tau_shape = cache
    horizon = tau_shape[0]
    acc = {f: np.zeros_like(getattr(params.gru, f)) for f in
           ("wz", "uz", "bz", "wr", "ur", "br", "wn", "un", "bn")}
    gout_w = np.zeros_like(params.out_w)
    gout_b = np.zeros_like(params.out_b)
    gtau = np.zeros(tau_shape, dtype=np.result_type(grad.dtype, np.float32))
    gtarget = np.zeros(2, dtype=gtau.dtype)
    gh = np.zeros_like(hiddens[0])
    gprev = np.zeros(2, dtype=gtau.dtype)
    for k in range(horizon - 1, -1, -1):
        gwp = grad[k] + gprev
        ghk, gw, gb = linear_backward(gwp, hiddens[k], params.out_w)
        gout_w += gw
        gout_b += gb
        gh = gh + ghk
        ginp, gh, gp = dense_gru_cell_backward(gh, caches[k], params.gru)
        for f in acc:
            acc[f] += getattr(gp, f)
        gprev = ginp[:2]
        gtau[k] = ginp[2:4]
        gtarget += ginp[4:6]
    # gprev at k=0 lands on the constant origin and is discarded
    grads = RefineParams(proj_w=np.zeros_like(params.proj_w),
                         proj_b=np.zeros_like(params.proj_b),
                         gru=DenseGruParams(**acc), out_w=gout_w, out_b=gout_b)
    return gtau, gh, gtarget, grads
