"""Toy training: Adam over the full parameter tree, one sample per step.

Every step logs a JSON line with each loss component and the three effective
task weights, so runs can be compared without a tracking service.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .ptree import named_leaves, tree_from_named
from .stack import (
    StackContext,
    StackParams,
    backward_stack,
    compute_losses,
    forward_stack,
)


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_update(params: StackParams, grads: StackParams, state: AdamState) -> StackParams:
    state.step += 1
    t = state.step
    scale = state.lr * np.sqrt(1.0 - state.beta2 ** t) / (1.0 - state.beta1 ** t)
    new = {}
    for (name, p), (_, g) in zip(named_leaves(params), named_leaves(grads)):
        g64 = np.asarray(g, dtype=np.float64)
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(g64)
            state.v[name] = np.zeros_like(g64)
        v = state.v[name]
        m = state.beta1 * m + (1.0 - state.beta1) * g64
        v = state.beta2 * v + (1.0 - state.beta2) * g64 * g64
        state.m[name] = m
        state.v[name] = v
        new[name] = (p - scale * m / (np.sqrt(v) + state.eps)).astype(p.dtype)
    return tree_from_named(params, new)


def train(params: StackParams, samples: list, ctx: StackContext, config: RunConfig,
          epochs: int, log_path: str | None = None,
          rng: np.random.Generator | None = None) -> StackParams:
    """Run the full objective over the dataset; returns the updated params."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    state = AdamState(lr=config.learning_rate)
    log = open(log_path, "w", encoding="utf-8") if log_path else None
    started = time.monotonic()
    try:
        step = 0
        for epoch in range(epochs):
            order = rng.permutation(len(samples))
            for idx in order:
                sample = samples[idx]
                fwd = forward_stack(params, sample, ctx, mode="train", rng=rng)
                losses, ltape = compute_losses(params, fwd, sample, ctx)
                grads = backward_stack(params, fwd, sample, ctx, ltape)
                params = adam_update(params, grads, state)
                step += 1
                if log is not None:
                    effective = params.loss_weights.effective()
                    record = {"step": step, "epoch": epoch,
                              "wall_s": round(time.monotonic() - started, 3)}
                    record.update({k: round(v, 6) for k, v in losses.items()})
                    record.update({f"weight_{k}": round(float(v), 6)
                                   for k, v in effective.items()})
                    log.write(json.dumps(record) + "\n")
                    log.flush()
    finally:
        if log is not None:
            log.close()
    return params
