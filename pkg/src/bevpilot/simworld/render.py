"""Flat-shaded multi-camera renderer with true depth, plus BEV ground truth.

Each pixel casts a ray; the nearest hit among agent boxes wins, otherwise
the ray lands on the ground plane (colored by drivable area and lane
stripes) or the sky. Depth is the hit's z coordinate in the camera frame
(the same convention the feature lifting uses); sky pixels carry +inf so
depth supervision masks them out. BEV rasterizations are produced from the
same world state, in the frame of a reference ego pose, which lets future
world states be labeled in the current frame's coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.pose import Se3Pose
from ..perception.rig import BevSpec, CameraRig
from .world import (
    Scenario,
    WorldState,
    box_corners,
    distance_to_polylines,
    point_in_polygons,
    VEHICLE,
)

LANE_STRIPE_HALF_WIDTH = 0.3  # meters; covers a cell row on a 0.5 m grid

COLOR_SKY = (0.53, 0.81, 0.92)
COLOR_GROUND = (0.36, 0.44, 0.30)
COLOR_ROAD = (0.26, 0.26, 0.29)
COLOR_LANE = (0.95, 0.93, 0.80)
COLOR_VEHICLE = (0.82, 0.16, 0.16)
COLOR_STATIC = (0.55, 0.37, 0.17)


@dataclass(frozen=True)
class FrameObservation:
    """Everything one world frame offers the model and the losses."""

    images: np.ndarray        # [n_cam, 3, H, W] float32
    depths: np.ndarray        # [n_cam, H, W] float64, +inf where sky
    ego_pose: Se3Pose         # ego-to-world
    bev_vehicle: np.ndarray   # [H_b, W_b] bool
    bev_instance: np.ndarray  # [H_b, W_b] int32, 0 background
    bev_drivable: np.ndarray  # [H_b, W_b] bool
    bev_lanes: np.ndarray     # [H_b, W_b] bool


def ego_pose_of(state_ego) -> Se3Pose:
    return Se3Pose.from_yaw(state_ego.heading, (state_ego.x, state_ego.y, 0.0))


def _ray_box_depth(origins, dirs, center_xy, heading, length, width, height):
    """Entry depth of rays into one upright box, +inf where missed.

    origins/dirs are [N, 3] in world coordinates; the parameter t is the
    camera z depth because dirs carry unit camera-z by construction.
    """
    c, s = np.cos(heading), np.sin(heading)
    rot = np.array([[c, s], [-s, c]])  # world -> box frame
    o_xy = (origins[:, :2] - center_xy) @ rot.T
    d_xy = dirs[:, :2] @ rot.T
    o = np.stack([o_xy[:, 0], o_xy[:, 1], origins[:, 2]], axis=1)
    d = np.stack([d_xy[:, 0], d_xy[:, 1], dirs[:, 2]], axis=1)
    lo = np.array([-length / 2.0, -width / 2.0, 0.0])
    hi = np.array([length / 2.0, width / 2.0, height])
    t_enter = np.zeros(o.shape[0])
    t_exit = np.full(o.shape[0], np.inf)
    ok = np.ones(o.shape[0], dtype=bool)
    for ax in range(3):
        parallel = np.abs(d[:, ax]) < 1e-12
        ok &= ~parallel | ((o[:, ax] >= lo[ax]) & (o[:, ax] <= hi[ax]))
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[ax] - o[:, ax]) / d[:, ax]
            t2 = (hi[ax] - o[:, ax]) / d[:, ax]
        near = np.minimum(t1, t2)
        far = np.maximum(t1, t2)
        t_enter = np.where(parallel, t_enter, np.maximum(t_enter, near))
        t_exit = np.where(parallel, t_exit, np.minimum(t_exit, far))
    ok &= (t_enter <= t_exit) & (t_exit > 0)
    return np.where(ok, np.maximum(t_enter, 0.0), np.inf)


def render_camera(scenario: Scenario, agent_xy: np.ndarray, ego_pose: Se3Pose,
                  camera) -> tuple:
    """One camera view. Returns (image [3, H, W] float32, depth [H, W])."""
    h, w = camera.image_h, camera.image_w
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64) ,
                         np.arange(h, dtype=np.float64), indexing="xy")
    pix = np.stack([us.ravel(), vs.ravel(), np.ones(h * w)], axis=1)
    rays_cam = pix @ np.linalg.inv(camera.intrinsics).T  # unit camera z
    cam_to_world = ego_pose.compose(camera.cam_to_ego)
    dirs = rays_cam @ cam_to_world.rotation.T
    origin = np.broadcast_to(cam_to_world.translation, dirs.shape)

    depth = np.full(h * w, np.inf)
    color_id = np.zeros(h * w, dtype=np.int64)  # 0 sky
    palette = np.array([COLOR_SKY, COLOR_GROUND, COLOR_ROAD, COLOR_LANE,
                        COLOR_VEHICLE, COLOR_STATIC])

    # ground plane z = 0
    down = dirs[:, 2] < -1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ground = -origin[:, 2] / dirs[:, 2]
    ground_hit = down & (t_ground > 0)
    if ground_hit.any():
        pts = origin[ground_hit, :2] + t_ground[ground_hit, None] * dirs[ground_hit, :2]
        on_road = point_in_polygons(pts, scenario.polygons)
        near_lane = distance_to_polylines(pts, scenario.lanes) <= LANE_STRIPE_HALF_WIDTH \
            if scenario.lanes else np.zeros(pts.shape[0], dtype=bool)
        ground_color = np.where(near_lane, 3, np.where(on_road, 2, 1))
        depth[ground_hit] = t_ground[ground_hit]
        color_id[ground_hit] = ground_color

    for i, agent in enumerate(scenario.agents):
        t_box = _ray_box_depth(origin, dirs, agent_xy[i], agent.heading,
                               agent.length, agent.width, agent.height)
        closer = t_box < depth
        depth[closer] = t_box[closer]
        color_id[closer] = 4 if agent.kind == VEHICLE else 5

    image = palette[color_id].T.reshape(3, h, w).astype(np.float32)
    return image, depth.reshape(h, w)


def rasterize_bev(scenario: Scenario, agent_xy: np.ndarray, ego_pose: Se3Pose,
                  spec: BevSpec) -> dict:
    """Ground-truth grids in the reference ego frame.

    agent_xy may come from any timestep; rasterizing future agent positions
    against the current ego pose produces aligned future labels.
    """
    centers = spec.cell_centers().reshape(-1, 2)
    world = centers @ np.array([[np.cos(ego_pose.yaw), np.sin(ego_pose.yaw)],
                                [-np.sin(ego_pose.yaw), np.cos(ego_pose.yaw)]])
    world += ego_pose.translation[:2]

    vehicle = np.zeros(centers.shape[0], dtype=bool)
    instance = np.zeros(centers.shape[0], dtype=np.int32)
    for i, agent in enumerate(scenario.agents):
        corners = box_corners(agent_xy[i, 0], agent_xy[i, 1], agent.heading,
                              agent.length, agent.width)
        inside = point_in_polygons(world, (corners,))
        if agent.kind == VEHICLE:
            vehicle |= inside
            instance[inside] = i + 1
    drivable = point_in_polygons(world, scenario.polygons)
    lanes = distance_to_polylines(world, scenario.lanes) <= LANE_STRIPE_HALF_WIDTH \
        if scenario.lanes else np.zeros(centers.shape[0], dtype=bool)
    shape = (spec.h, spec.w)
    return {"vehicle": vehicle.reshape(shape), "instance": instance.reshape(shape),
            "drivable": drivable.reshape(shape), "lanes": lanes.reshape(shape)}


def render_frame(scenario: Scenario, state: WorldState, rig: CameraRig,
                 spec: BevSpec) -> FrameObservation:
    ego_pose = ego_pose_of(state.ego)
    images = []
    depths = []
    for camera in rig.cameras:
        image, depth = render_camera(scenario, state.agent_xy, ego_pose, camera)
        images.append(image)
        depths.append(depth)
    bev = rasterize_bev(scenario, state.agent_xy, ego_pose, spec)
    return FrameObservation(images=np.stack(images), depths=np.stack(depths),
                            ego_pose=ego_pose, bev_vehicle=bev["vehicle"],
                            bev_instance=bev["instance"],
                            bev_drivable=bev["drivable"], bev_lanes=bev["lanes"])


def downsample_depth(depth: np.ndarray, patch: int) -> np.ndarray:
    """Depth target at feature resolution: the patch-center pixel's depth."""
    h, w = depth.shape
    rows = np.clip(np.rint((np.arange(h // patch) + 0.5) * patch - 0.5), 0,
                   h - 1).astype(np.int64)
    cols = np.clip(np.rint((np.arange(w // patch) + 0.5) * patch - 0.5), 0,
                   w - 1).astype(np.int64)
    return depth[np.ix_(rows, cols)]
