"""Gated recurrent cells: convolutional (spatial grids) and dense (vectors).

Gate equations, shared by both variants:

    z = sigmoid(Wz*x + Uz*h + bz)          update gate
    r = sigmoid(Wr*x + Ur*h + br)          reset gate
    n = tanh(Wn*x + Un*(r.h) + bn)         candidate
    h' = (1 - z).h + z.n

where `*` is a 3x3 same-padded 2D convolution for the conv cell and a matrix
product for the dense cell. Forward passes return a cache consumed by the
matching backward pass; caches hold references, never copies the caller may
mutate.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .conv import conv2d, conv2d_backward
from .tensorops import linear, linear_backward, sigmoid, sigmoid_backward, tanh, tanh_backward

GATE_KERNEL = 3  # 3x3, stride 1, same padding


@dataclass(frozen=True)
class GruCellParams:
    """Weights of one convolutional GRU cell.

    Each gate is a pair of 3x3 same-padded convolutions (one over the input,
    one over the hidden state) plus a bias, so the gate output keeps the
    hidden-state shape.
    """

    wz_x: np.ndarray  # [Ch, Cin, 3, 3]
    wz_h: np.ndarray  # [Ch, Ch, 3, 3]
    bz: np.ndarray    # [Ch]
    wr_x: np.ndarray
    wr_h: np.ndarray
    br: np.ndarray
    wn_x: np.ndarray
    wn_h: np.ndarray
    bn: np.ndarray

    @property
    def hidden_channels(self) -> int:
        return self.wz_h.shape[0]

    @property
    def input_channels(self) -> int:
        return self.wz_x.shape[1]

    def map(self, fn) -> "GruCellParams":
        return GruCellParams(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


def init_gru_params(cin: int, ch: int, rng: np.random.Generator,
                    dtype=np.float32, scale: float = 1.0) -> GruCellParams:
    def k(c_out, c_in):
        std = scale / np.sqrt(c_in * GATE_KERNEL * GATE_KERNEL)
        return rng.normal(0.0, std, size=(c_out, c_in, GATE_KERNEL, GATE_KERNEL)).astype(dtype)

    zeros = np.zeros(ch, dtype=dtype)
    return GruCellParams(
        wz_x=k(ch, cin), wz_h=k(ch, ch), bz=zeros.copy(),
        wr_x=k(ch, cin), wr_h=k(ch, ch), br=zeros.copy(),
        wn_x=k(ch, cin), wn_h=k(ch, ch), bn=zeros.copy(),
    )


def gru_cell(x: np.ndarray, h: np.ndarray, p: GruCellParams):
    """One convolutional GRU step: x [Cin,H,W], h [Ch,H,W] -> (h', cache)."""
    if x.shape[1:] != h.shape[1:]:
        raise ValueError(f"gru_cell: spatial extents differ, x {x.shape} vs h {h.shape}")
    if x.shape[0] != p.input_channels or h.shape[0] != p.hidden_channels:
        raise ValueError(
            f"gru_cell: channel mismatch, x {x.shape[0]} vs params {p.input_channels}, "
            f"h {h.shape[0]} vs params {p.hidden_channels}")
    z = sigmoid(conv2d(x, p.wz_x) + conv2d(h, p.wz_h) + p.bz[:, None, None])
    r = sigmoid(conv2d(x, p.wr_x) + conv2d(h, p.wr_h) + p.br[:, None, None])
    rh = r * h
    n = tanh(conv2d(x, p.wn_x) + conv2d(rh, p.wn_h) + p.bn[:, None, None])
    h2 = (1.0 - z) * h + z * n
    cache = (x, h, z, r, rh, n)
    return h2, cache


def gru_cell_backward(grad: np.ndarray, cache, p: GruCellParams):
    """VJP of gru_cell. Returns (grad_x, grad_h, GruCellParams of grads)."""
    x, h, z, r, rh, n = cache
    gz = sigmoid_backward(grad * (n - h), z)
    gn = tanh_backward(grad * z, n)
    gh = grad * (1.0 - z)

    gx_n, gwn_x, gbn = conv2d_backward(gn, x, p.wn_x)
    grh, gwn_h, _ = conv2d_backward(gn, rh, p.wn_h)
    gr = sigmoid_backward(grh * h, r)
    gh += grh * r

    gx_z, gwz_x, gbz = conv2d_backward(gz, x, p.wz_x)
    gh_z, gwz_h, _ = conv2d_backward(gz, h, p.wz_h)
    gx_r, gwr_x, gbr = conv2d_backward(gr, x, p.wr_x)
    gh_r, gwr_h, _ = conv2d_backward(gr, h, p.wr_h)

    gx = gx_n + gx_z + gx_r
    gh += gh_z + gh_r
    grads = GruCellParams(
        wz_x=gwz_x, wz_h=gwz_h, bz=gbz,
        wr_x=gwr_x, wr_h=gwr_h, br=gbr,
        wn_x=gwn_x, wn_h=gwn_h, bn=gbn,
    )
    return gx, gh, grads


@dataclass(frozen=True)
class DenseGruParams:
    """Weights of a plain (non-convolutional) GRU cell over vectors."""

    wz: np.ndarray  # [nx, nh]
    uz: np.ndarray  # [nh, nh]
    bz: np.ndarray  # [nh]
    wr: np.ndarray
    ur: np.ndarray
    br: np.ndarray
    wn: np.ndarray
    un: np.ndarray
    bn: np.ndarray

    def map(self, fn) -> "DenseGruParams":
        return DenseGruParams(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


def init_dense_gru_params(nx: int, nh: int, rng: np.random.Generator,
                          dtype=np.float32, scale: float = 1.0) -> DenseGruParams:
    def m(a, b):
        return rng.normal(0.0, scale / np.sqrt(a), size=(a, b)).astype(dtype)

    zeros = np.zeros(nh, dtype=dtype)
    return DenseGruParams(
        wz=m(nx, nh), uz=m(nh, nh), bz=zeros.copy(),
        wr=m(nx, nh), ur=m(nh, nh), br=zeros.copy(),
        wn=m(nx, nh), un=m(nh, nh), bn=zeros.copy(),
    )


def dense_gru_cell(x: np.ndarray, h: np.ndarray, p: DenseGruParams):
    """One dense GRU step: x [nx], h [nh] -> (h', cache)."""
    z = sigmoid(linear(x, p.wz, p.bz) + h @ p.uz)
    r = sigmoid(linear(x, p.wr, p.br) + h @ p.ur)
    rh = r * h
    n = tanh(linear(x, p.wn, p.bn) + rh @ p.un)
    h2 = (1.0 - z) * h + z * n
    return h2, (x, h, z, r, rh, n)


def dense_gru_cell_backward(grad: np.ndarray, cache, p: DenseGruParams):
    """VJP of dense_gru_cell. Returns (grad_x, grad_h, DenseGruParams of grads)."""
    x, h, z, r, rh, n = cache
    gz = sigmoid_backward(grad * (n - h), z)
    gn = tanh_backward(grad * z, n)
    gh = grad * (1.0 - z)

    gx_n, gwn, gbn = linear_backward(gn, x, p.wn)
    grh, gun = gn @ p.un.T, np.outer(rh, gn)
    gr = sigmoid_backward(grh * h, r)
    gh += grh * r

    gx_z, gwz, gbz = linear_backward(gz, x, p.wz)
    gh += gz @ p.uz.T
    guz = np.outer(h, gz)
    gx_r, gwr, gbr = linear_backward(gr, x, p.wr)
    gh += gr @ p.ur.T
    gur = np.outer(h, gr)

    gx = gx_n + gx_z + gx_r
    grads = DenseGruParams(wz=gwz, uz=guz, bz=gbz, wr=gwr, ur=gur, br=gbr,
                           wn=gwn, un=gun, bn=gbn)
    return gx, gh, grads
