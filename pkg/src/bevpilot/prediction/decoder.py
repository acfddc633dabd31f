"""Decoding BEV states into interpretable heads.

A small shared trunk (3x3 conv, relu, 3x3 conv with an additive skip from the
input, relu) feeds thin 1x1 heads, one per output:

  segmentation 2 | centerness 1 | offset 2 | flow 2 | drivable 2 | lanes 2 |
  cost volume 1

Offsets and flow are measured in grid cells: offset points from a cell toward
its instance center, flow is the displacement a cell will travel by the next
frame. Every timestamp, past and future, is decoded.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..numerics.conv import conv2d, conv2d_backward
from ..numerics.tensorops import relu, relu_backward

HEAD_CHANNELS = {
    "segmentation": 2,
    "centerness": 1,
    "offset": 2,
    "flow": 2,
    "drivable": 2,
    "lanes": 2,
    "cost_volume": 1,
}


@dataclass(frozen=True)
class PredictionBundle:
    """Per-timestamp decoded heads, each [T, channels, H, W]."""

    segmentation: np.ndarray
    centerness: np.ndarray
    offset: np.ndarray
    flow: np.ndarray
    drivable: np.ndarray
    lanes: np.ndarray
    cost_volume: np.ndarray

    def __post_init__(self):
        t = self.segmentation.shape[0]
        for name, ch in HEAD_CHANNELS.items():
            a = getattr(self, name)
            if a.shape[0] != t or a.shape[1] != ch:
                raise ValueError(f"PredictionBundle: {name} has shape {a.shape}, "
                                 f"expected [{t},{ch},H,W]")

    @property
    def horizon(self) -> int:
        return self.segmentation.shape[0]

    def map(self, fn) -> "PredictionBundle":
        return PredictionBundle(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


@dataclass(frozen=True)
class DecoderParams:
    trunk_w1: np.ndarray  # [F, C, 3, 3]
    trunk_b1: np.ndarray  # [F]
    trunk_w2: np.ndarray  # [C, F, 3, 3]
    trunk_b2: np.ndarray  # [C]
    head_w: dict          # name -> [ch, C, 1, 1]
    head_b: dict          # name -> [ch]

    def map(self, fn) -> "DecoderParams":
        return DecoderParams(
            trunk_w1=fn(self.trunk_w1), trunk_b1=fn(self.trunk_b1),
            trunk_w2=fn(self.trunk_w2), trunk_b2=fn(self.trunk_b2),
            head_w={k: fn(v) for k, v in self.head_w.items()},
            head_b={k: fn(v) for k, v in self.head_b.items()},
        )


def init_decoder_params(channels: int, trunk_hidden: int, rng: np.random.Generator,
                        dtype=np.float32, scale: float = 1.0) -> DecoderParams:
    def k(cout, cin, ks):
        return rng.normal(0.0, scale / np.sqrt(cin * ks * ks),
                          size=(cout, cin, ks, ks)).astype(dtype)

    return DecoderParams(
        trunk_w1=k(trunk_hidden, channels, 3),
        trunk_b1=np.zeros(trunk_hidden, dtype=dtype),
        trunk_w2=k(channels, trunk_hidden, 3),
        trunk_b2=np.zeros(channels, dtype=dtype),
        head_w={name: k(ch, channels, 1) for name, ch in HEAD_CHANNELS.items()},
        head_b={name: np.zeros(ch, dtype=dtype) for name, ch in HEAD_CHANNELS.items()},
    )


def decode(states: np.ndarray, params: DecoderParams):
    """Decode every timestamp of [T, C, H, W] into a PredictionBundle."""
    t = states.shape[0]
    outs = {name: [] for name in HEAD_CHANNELS}
    caches = []
    for i in range(t):
        x = states[i]
        pre1 = conv2d(x, params.trunk_w1, params.trunk_b1)
        h1 = relu(pre1)
        pre2 = conv2d(h1, params.trunk_w2, params.trunk_b2) + x
        h2 = relu(pre2)
        for name in HEAD_CHANNELS:
            outs[name].append(conv2d(h2, params.head_w[name], params.head_b[name]))
        caches.append((x, pre1, h1, pre2, h2))
    bundle = PredictionBundle(**{name: np.stack(v) for name, v in outs.items()})
    return bundle, caches


def decode_backward(gbundle: PredictionBundle, caches, params: DecoderParams):
    """VJP of decode. Returns (grad_states [T,C,H,W], DecoderParams grads)."""
    gstates = []
    gw1a = np.zeros_like(params.trunk_w1)
    gb1a = np.zeros_like(params.trunk_b1)
    gw2a = np.zeros_like(params.trunk_w2)
    gb2a = np.zeros_like(params.trunk_b2)
    ghw = {n: np.zeros_like(v) for n, v in params.head_w.items()}
    ghb = {n: np.zeros_like(v) for n, v in params.head_b.items()}
    for i in range(len(caches)):
        x, pre1, h1, pre2, h2 = caches[i]
        gh2 = np.zeros_like(h2)
        for name in HEAD_CHANNELS:
            gh, gw, gb = conv2d_backward(getattr(gbundle, name)[i], h2, params.head_w[name])
            gh2 += gh
            ghw[name] += gw
            ghb[name] += gb
        gpre2 = relu_backward(gh2, pre2)
        gh1, gw2, gb2 = conv2d_backward(gpre2, h1, params.trunk_w2)
        gpre1 = relu_backward(gh1, pre1)
        gx, gw1, gb1 = conv2d_backward(gpre1, x, params.trunk_w1)
        gx += gpre2  # skip connection
        gw1a += gw1
        gb1a += gb1
        gw2a += gw2
        gb2a += gb2
        gstates.append(gx)
    grads = DecoderParams(trunk_w1=gw1a, trunk_b1=gb1a, trunk_w2=gw2a, trunk_b2=gb2a,
                          head_w=ghw, head_b=ghb)
    return np.stack(gstates), grads
