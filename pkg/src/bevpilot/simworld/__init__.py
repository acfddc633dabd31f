"""Synthetic driving world: map, agents, renderer, labels, expert, metrics."""

from .expert import CRUISE_SPEED, expert_control, expert_rollout
from .labels import CENTER_SIGMA, frame_centers, instance_targets
from .metrics import (
    PENALTIES,
    EpisodeResult,
    metric_closedloop,
    metric_iou,
    metric_planning,
    metric_pq,
)
from .render import (
    FrameObservation,
    LANE_STRIPE_HALF_WIDTH,
    downsample_depth,
    ego_pose_of,
    rasterize_bev,
    render_camera,
    render_frame,
)
from .scenario import (
    SCENARIO_VERSION,
    VARIANTS,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    straight_road_scenario,
)
from .world import (
    EGO_LENGTH,
    EGO_WIDTH,
    FRAME_DT,
    STATIC,
    VEHICLE,
    AgentSpec,
    Scenario,
    StepEvents,
    WorldState,
    agent_positions_at,
    box_corners,
    boxes_overlap,
    distance_to_polylines,
    initial_world,
    point_in_polygons,
    route_progress,
    step_world,
)

__all__ = [
    "CENTER_SIGMA",
    "CRUISE_SPEED",
    "EGO_LENGTH",
    "EGO_WIDTH",
    "FRAME_DT",
    "LANE_STRIPE_HALF_WIDTH",
    "PENALTIES",
    "SCENARIO_VERSION",
    "STATIC",
    "VARIANTS",
    "VEHICLE",
    "AgentSpec",
    "EpisodeResult",
    "FrameObservation",
    "Scenario",
    "StepEvents",
    "WorldState",
    "agent_positions_at",
    "box_corners",
    "boxes_overlap",
    "distance_to_polylines",
    "downsample_depth",
    "ego_pose_of",
    "expert_control",
    "expert_rollout",
    "frame_centers",
    "initial_world",
    "instance_targets",
    "load_scenario",
    "metric_closedloop",
    "metric_iou",
    "metric_planning",
    "metric_pq",
    "point_in_polygons",
    "rasterize_bev",
    "render_camera",
    "render_frame",
    "route_progress",
    "save_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "step_world",
    "straight_road_scenario",
]
