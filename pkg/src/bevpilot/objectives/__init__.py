"""Training losses: hard-cell segmentation, instance regression, depth
supervision, discounted future weighting, max-margin planning, and learnable
task balancing."""

from .losses import (
    FUTURE_DISCOUNT,
    TOPK_FRACTION,
    centerness_loss,
    centerness_loss_backward,
    cross_entropy,
    cross_entropy_backward,
    depth_loss,
    depth_loss_backward,
    discounted_future_loss,
    discounted_future_loss_backward,
    instance_losses,
    instance_losses_backward,
    masked_l1_loss,
    masked_l1_loss_backward,
    topk_cross_entropy,
    topk_cross_entropy_backward,
)
from .planning import (
    planning_loss,
    planning_loss_backward,
    trajectory_distance,
    trajectory_distance_backward,
)
from .weighting import (
    LossWeights,
    init_loss_weights,
    total_loss,
    total_loss_backward,
)

__all__ = [
    "FUTURE_DISCOUNT",
    "TOPK_FRACTION",
    "LossWeights",
    "centerness_loss",
    "centerness_loss_backward",
    "cross_entropy",
    "cross_entropy_backward",
    "depth_loss",
    "depth_loss_backward",
    "discounted_future_loss",
    "discounted_future_loss_backward",
    "init_loss_weights",
    "instance_losses",
    "instance_losses_backward",
    "masked_l1_loss",
    "masked_l1_loss_backward",
    "planning_loss",
    "planning_loss_backward",
    "topk_cross_entropy",
    "topk_cross_entropy_backward",
    "total_loss",
    "total_loss_backward",
    "trajectory_distance",
    "trajectory_distance_backward",
]
