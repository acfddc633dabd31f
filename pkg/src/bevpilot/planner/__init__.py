"""Sampling-based motion planner: candidate rollout, cost ranking, refinement."""

from .costs import (
    CLIP_BOUND,
    EGO_LENGTH,
    EGO_WIDTH,
    HEADWAY_TIME,
    RULE_TERMS,
    SAFETY_MARGIN,
    SAFETY_TERMS,
    CostBreakdown,
    costvolume_cost,
    costvolume_cost_backward,
    evaluate_costs,
    evaluate_costs_backward,
    footprint_cells,
    headway_cells,
    rule_cost,
    rule_features,
    safety_cost,
    safety_features,
    select_best,
)
from .refine import (
    REFINE_INPUT,
    RefineParams,
    init_refine_params,
    pool_front_features,
    pool_front_features_backward,
    refine,
    refine_backward,
)
from .report import build_report, render_report
from .sampler import (
    COMMAND_ANGLE_DEG,
    DEFAULT_ACCELS,
    DEFAULT_STEERINGS,
    FORWARD,
    TURN_LEFT,
    TURN_RIGHT,
    EgoState,
    TrajectorySet,
    label_command,
    roll_bicycle,
    sample_trajectories,
    trajectory_from_waypoints,
)

__all__ = [
    "CLIP_BOUND",
    "COMMAND_ANGLE_DEG",
    "DEFAULT_ACCELS",
    "DEFAULT_STEERINGS",
    "EGO_LENGTH",
    "EGO_WIDTH",
    "FORWARD",
    "HEADWAY_TIME",
    "REFINE_INPUT",
    "RULE_TERMS",
    "SAFETY_MARGIN",
    "SAFETY_TERMS",
    "TURN_LEFT",
    "TURN_RIGHT",
    "CostBreakdown",
    "EgoState",
    "RefineParams",
    "TrajectorySet",
    "build_report",
    "costvolume_cost",
    "costvolume_cost_backward",
    "evaluate_costs",
    "evaluate_costs_backward",
    "footprint_cells",
    "headway_cells",
    "init_refine_params",
    "label_command",
    "pool_front_features",
    "pool_front_features_backward",
    "refine",
    "refine_backward",
    "render_report",
    "roll_bicycle",
    "rule_cost",
    "rule_features",
    "safety_cost",
    "safety_features",
    "sample_trajectories",
    "select_best",
    "trajectory_from_waypoints",
]
