"""Probabilistic future prediction: latent heads, dual-pathway rollout, decoding."""

from .distribution import (
    BernoulliField,
    DistributionParams,
    LATENT_CHANNELS,
    LatentDistribution,
    encode_bernoulli,
    encode_bernoulli_backward,
    encode_gaussian,
    encode_gaussian_backward,
    init_distribution_params,
    sample_bernoulli,
    sample_bernoulli_backward,
    sample_latent,
    sample_latent_backward,
)
from .rollout import (
    RolloutParams,
    broadcast_latent,
    dual_rollout,
    dual_rollout_backward,
    init_rollout_params,
)
from .decoder import (
    DecoderParams,
    HEAD_CHANNELS,
    PredictionBundle,
    decode,
    decode_backward,
    init_decoder_params,
)
from .instances import MATCH_RADIUS_CELLS, assign_cells, find_centers, instance_postprocess

__all__ = [
    "BernoulliField",
    "DistributionParams",
    "LATENT_CHANNELS",
    "LatentDistribution",
    "encode_bernoulli",
    "encode_bernoulli_backward",
    "encode_gaussian",
    "encode_gaussian_backward",
    "init_distribution_params",
    "sample_bernoulli",
    "sample_bernoulli_backward",
    "sample_latent",
    "sample_latent_backward",
    "RolloutParams",
    "broadcast_latent",
    "dual_rollout",
    "dual_rollout_backward",
    "init_rollout_params",
    "DecoderParams",
    "HEAD_CHANNELS",
    "PredictionBundle",
    "decode",
    "decode_backward",
    "init_decoder_params",
    "MATCH_RADIUS_CELLS",
    "assign_cells",
    "find_centers",
    "instance_postprocess",
]
