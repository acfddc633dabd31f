"""Future-uncertainty heads over the current BEV state.

Two interchangeable parameterizations: a diagonal Gaussian over a compact
latent vector (state pooled globally, then one linear map to mean and
log-variance), or a per-cell Bernoulli occupancy field. Sampling is
deterministic in infer mode (the mean / the probabilities) and reparameterized
in train mode so gradients pass through the draw.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..numerics.conv import conv2d, conv2d_backward
from ..numerics.tensorops import (
    global_avg_pool,
    global_avg_pool_backward,
    linear,
    linear_backward,
    sigmoid,
    sigmoid_backward,
)

LATENT_CHANNELS = 32


@dataclass(frozen=True)
class LatentDistribution:
    """Diagonal Gaussian over the latent future."""

    mean: np.ndarray     # [L]
    log_var: np.ndarray  # [L]

    def __post_init__(self):
        if self.mean.shape != self.log_var.shape or self.mean.ndim != 1:
            raise ValueError(f"LatentDistribution: mean {self.mean.shape}, "
                             f"log_var {self.log_var.shape}")

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_var)


@dataclass(frozen=True)
class BernoulliField:
    """Per-cell occupancy probability grid."""

    prob: np.ndarray  # [H, W] in [0, 1]

    def __post_init__(self):
        if np.any(self.prob < 0) or np.any(self.prob > 1):
            raise ValueError("BernoulliField: probabilities outside [0, 1]")


@dataclass(frozen=True)
class DistributionParams:
    """Both head variants; the run mode selects which one is exercised."""

    gauss_w: np.ndarray  # [C, 2L]
    gauss_b: np.ndarray  # [2L]
    bern_w: np.ndarray   # [1, C, 1, 1]
    bern_b: np.ndarray   # [1]

    def map(self, fn) -> "DistributionParams":
        return DistributionParams(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


def init_distribution_params(channels: int, latent: int, rng: np.random.Generator,
                             dtype=np.float32, scale: float = 1.0) -> DistributionParams:
    return DistributionParams(
        gauss_w=rng.normal(0.0, scale / np.sqrt(channels),
                           size=(channels, 2 * latent)).astype(dtype),
        gauss_b=np.zeros(2 * latent, dtype=dtype),
        bern_w=rng.normal(0.0, scale / np.sqrt(channels),
                          size=(1, channels, 1, 1)).astype(dtype),
        bern_b=np.zeros(1, dtype=dtype),
    )


def encode_gaussian(x: np.ndarray, params: DistributionParams):
    """[C, H, W] -> LatentDistribution via global pooling and one linear map."""
    pooled = global_avg_pool(x)
    out = linear(pooled, params.gauss_w, params.gauss_b)
    latent = out.shape[0] // 2
    dist = LatentDistribution(out[:latent], out[latent:])
    return dist, (pooled, x.shape)


def encode_gaussian_backward(gmean: np.ndarray, glog_var: np.ndarray, cache,
                             params: DistributionParams):
    pooled, x_shape = cache
    gout = np.concatenate([gmean, glog_var])
    gpooled, gw, gb = linear_backward(gout, pooled, params.gauss_w)
    gx = global_avg_pool_backward(gpooled, x_shape)
    return gx, gw, gb


def encode_bernoulli(x: np.ndarray, params: DistributionParams):
    """[C, H, W] -> BernoulliField via a 1x1 sigmoid head."""
    logits = conv2d(x, params.bern_w, params.bern_b)
    prob = sigmoid(logits[0])
    return BernoulliField(prob), (x, prob)


def encode_bernoulli_backward(gprob: np.ndarray, cache, params: DistributionParams):
    x, prob = cache
    glogits = sigmoid_backward(gprob, prob)[None]
    gx, gw, gb = conv2d_backward(glogits, x, params.bern_w)
    return gx, gw, gb


def sample_latent(dist: LatentDistribution, mode: str, rng: np.random.Generator | None = None):
    """Draw the latent vector.

    train: mean + std * eps with eps ~ N(0, I) (reparameterized, so the
      returned cache lets gradients reach mean and log-variance).
    infer: exactly the mean.

    Returns (eta [L], cache).
    """
    if mode == "infer":
        return dist.mean.copy(), (None,)
    if mode != "train":
        raise ValueError(f"sample_latent: unknown mode {mode!r}")
    if rng is None:
        raise ValueError("sample_latent: train mode needs an rng")
    eps = rng.standard_normal(dist.mean.shape[0]).astype(dist.mean.dtype)
    std = np.exp(0.5 * dist.log_var)
    return dist.mean + std * eps, (eps, std)


def sample_latent_backward(geta: np.ndarray, cache, dist: LatentDistribution):
    """VJP of sample_latent onto (mean, log_var)."""
    if cache[0] is None:  # infer: eta == mean
        return geta.copy(), np.zeros_like(geta)
    eps, std = cache
    # d eta / d log_var = 0.5 * std * eps
    return geta.copy(), geta * 0.5 * std * eps


def sample_bernoulli(field: BernoulliField, mode: str,
                     rng: np.random.Generator | None = None):
    """Draw the occupancy field.

    train: a straight-through draw, p + (sample - p) treated as constant, so
      the value is a hard 0/1 grid while the gradient flows to p unchanged.
    infer: the probabilities themselves.

    Returns (eta [H, W], cache).
    """
    if mode == "infer":
        return field.prob.copy(), None
    if mode != "train":
        raise ValueError(f"sample_bernoulli: unknown mode {mode!r}")
    if rng is None:
        raise ValueError("sample_bernoulli: train mode needs an rng")
    draw = (rng.random(field.prob.shape) < field.prob).astype(field.prob.dtype)
    return draw, None


def sample_bernoulli_backward(geta: np.ndarray, cache) -> np.ndarray:
    # both infer (identity) and the straight-through estimator pass the
    # gradient to the probabilities unchanged
    return geta.copy()
