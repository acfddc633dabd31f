"""Flat kinematic driving world.

The map is a set of drivable polygons with lane centerlines on the ground
plane (z = 0). Agents are rectangular boxes that move along their fixed
heading following a scripted per-step speed profile. The ego is a bicycle:
it either integrates a control pair or jumps to a commanded waypoint.
Collisions are rectangle overlap, tested with the separating-axis rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..planner.costs import EGO_LENGTH, EGO_WIDTH
from ..planner.sampler import EgoState, FORWARD

FRAME_DT = 0.5  # seconds between world frames

VEHICLE = "vehicle"
STATIC = "static"


@dataclass(frozen=True)
class AgentSpec:
    kind: str                 # "vehicle" or "static"
    x: float
    y: float
    heading: float
    length: float = 4.5
    width: float = 1.8
    height: float = 1.6
    speeds: tuple = ()        # m/s per step; empty means parked

    def __post_init__(self):
        if self.kind not in (VEHICLE, STATIC):
            raise ValueError(f"AgentSpec: unknown kind {self.kind!r}")
        if self.length <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("AgentSpec: non-positive box size")

    def speed_at(self, step: int) -> float:
        if not self.speeds:
            return 0.0
        return float(self.speeds[min(step, len(self.speeds) - 1)])


@dataclass(frozen=True)
class Scenario:
    polygons: tuple           # drivable area, each an [M, 2] float array
    lanes: tuple              # lane centerlines, each an [M, 2] float array
    agents: tuple             # AgentSpec
    ego: EgoState
    goal: np.ndarray          # [2]
    commands: tuple           # (from_step, command) pairs, sorted
    steps: int
    dt: float = FRAME_DT
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.dt <= 0:
            raise ValueError(f"Scenario: bad episode length {self.steps} @ {self.dt}")
        if not self.polygons:
            raise ValueError("Scenario: no drivable area")
        if not point_in_polygons(np.array([[self.ego.x, self.ego.y]]),
                                 self.polygons)[0]:
            raise ValueError("Scenario: ego start outside drivable area")
        for a in self.agents:
            if a.speeds and len(a.speeds) < self.steps:
                raise ValueError(f"Scenario: agent script covers {len(a.speeds)} "
                                 f"of {self.steps} steps")

    def command_at(self, step: int) -> str:
        current = FORWARD
        for start, cmd in self.commands:
            if step >= start:
                current = cmd
        return current


@dataclass(frozen=True)
class WorldState:
    step_index: int
    ego: EgoState
    agent_xy: np.ndarray      # [K, 2]
    in_contact: np.ndarray    # [K] bool, overlap at the previous step


@dataclass
class StepEvents:
    collisions: np.ndarray      # [K] bool, overlap after this step
    new_collisions: np.ndarray  # [K] bool, contact that started this step


def box_corners(x: float, y: float, heading: float,
                length: float, width: float) -> np.ndarray:
    """[4, 2] rectangle corners, counterclockwise."""
    half_l, half_w = length / 2.0, width / 2.0
    local = np.array([[half_l, half_w], [-half_l, half_w],
                      [-half_l, -half_w], [half_l, -half_w]])
    c, s = np.cos(heading), np.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([x, y])


def boxes_overlap(a: tuple, b: tuple) -> bool:
    """Separating-axis overlap of (x, y, heading, length, width) rectangles."""
    ca = box_corners(*a)
    cb = box_corners(*b)
    for heading in (a[2], b[2]):
        c, s = np.cos(heading), np.sin(heading)
        for axis in ((c, s), (-s, c)):
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def point_in_polygons(points: np.ndarray, polygons: tuple) -> np.ndarray:
    """Even-odd test of [N, 2] points against a set of [M, 2] polygons."""
    points = np.asarray(points, dtype=np.float64)
    inside = np.zeros(points.shape[0], dtype=bool)
    for poly in polygons:
        poly = np.asarray(poly, dtype=np.float64)
        crossings = np.zeros(points.shape[0], dtype=np.int64)
        m = poly.shape[0]
        for v in range(m):
            x1, y1 = poly[v]
            x2, y2 = poly[(v + 1) % m]
            straddles = (y1 <= points[:, 1]) != (y2 <= points[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                x_hit = x1 + (points[:, 1] - y1) / (y2 - y1) * (x2 - x1)
            crossings += (straddles & (points[:, 0] < x_hit)).astype(np.int64)
        inside |= crossings % 2 == 1
    return inside


def distance_to_polylines(points: np.ndarray, lines: tuple) -> np.ndarray:
    """Distance from [N, 2] points to the nearest segment of any polyline."""
    points = np.asarray(points, dtype=np.float64)
    best = np.full(points.shape[0], np.inf)
    for line in lines:
        line = np.asarray(line, dtype=np.float64)
        for v in range(line.shape[0] - 1):
            a, b = line[v], line[v + 1]
            ab = b - a
            denom = float(ab @ ab)
            if denom < 1e-18:
                t = np.zeros(points.shape[0])
            else:
                t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            best = np.minimum(best, np.hypot(*(points - proj).T))
    return best


def initial_world(scenario: Scenario) -> WorldState:
    xy = np.array([[a.x, a.y] for a in scenario.agents], dtype=np.float64)
    xy = xy.reshape(len(scenario.agents), 2)
    return WorldState(step_index=0, ego=scenario.ego, agent_xy=xy,
                      in_contact=np.zeros(len(scenario.agents), dtype=bool))


def agent_positions_at(scenario: Scenario, step: int) -> np.ndarray:
    """Agent (x, y) after integrating the scripts for `step` steps."""
    xy = np.array([[a.x, a.y] for a in scenario.agents], dtype=np.float64)
    xy = xy.reshape(len(scenario.agents), 2)
    for i, a in enumerate(scenario.agents):
        dist = sum(a.speed_at(k) for k in range(step)) * scenario.dt
        xy[i] += dist * np.array([np.cos(a.heading), np.sin(a.heading)])
    return xy


def step_world(scenario: Scenario, state: WorldState,
               waypoint: np.ndarray | None = None,
               control: tuple | None = None) -> tuple:
    """Advance one frame. Exactly one of waypoint / control drives the ego.

    Waypoint mode teleports the ego to the commanded point, deriving heading
    and speed from the displacement. Control mode integrates (accel, steer)
    bicycle dynamics. Returns (new WorldState, StepEvents).
    """
    if (waypoint is None) == (control is None):
        raise ValueError("step_world: pass exactly one of waypoint or control")
    dt = scenario.dt
    ego = state.ego
    if waypoint is not None:
        dx = float(waypoint[0]) - ego.x
        dy = float(waypoint[1]) - ego.y
        dist = np.hypot(dx, dy)
        heading = np.arctan2(dy, dx) if dist > 1e-9 else ego.heading
        ego2 = EgoState(x=float(waypoint[0]), y=float(waypoint[1]),
                        heading=float(heading), velocity=float(dist / dt),
                        wheelbase=ego.wheelbase)
    else:
        accel, steer = control
        v = max(ego.velocity + accel * dt, 0.0)
        heading = ego.heading + (v / ego.wheelbase) * np.tan(steer) * dt
        ego2 = EgoState(x=ego.x + v * dt * np.cos(heading),
                        y=ego.y + v * dt * np.sin(heading),
                        heading=float(heading), velocity=float(v),
                        wheelbase=ego.wheelbase)

    xy2 = state.agent_xy.copy()
    for i, a in enumerate(scenario.agents):
        speed = a.speed_at(state.step_index)
        xy2[i] += speed * dt * np.array([np.cos(a.heading), np.sin(a.heading)])

    ego_box = (ego2.x, ego2.y, ego2.heading, EGO_LENGTH, EGO_WIDTH)
    hits = np.zeros(len(scenario.agents), dtype=bool)
    for i, a in enumerate(scenario.agents):
        hits[i] = boxes_overlap(ego_box, (xy2[i, 0], xy2[i, 1], a.heading,
                                          a.length, a.width))
    events = StepEvents(collisions=hits, new_collisions=hits & ~state.in_contact)
    new_state = WorldState(step_index=state.step_index + 1, ego=ego2,
                           agent_xy=xy2, in_contact=hits)
    return new_state, events


def route_progress(scenario: Scenario, xy) -> float:
    """Fraction of the start-to-goal segment covered, clipped to [0, 1]."""
    start = np.array([scenario.ego.x, scenario.ego.y])
    span = np.asarray(scenario.goal, dtype=np.float64) - start
    denom = float(span @ span)
    if denom < 1e-18:
        return 1.0
    t = float((np.asarray(xy, dtype=np.float64) - start) @ span / denom)
    return float(np.clip(t, 0.0, 1.0))
