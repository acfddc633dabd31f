"""Scripted expert driver used to label training data.

A Stanley-style steering law tracks the start-to-goal line; longitudinal
control holds a cruise speed unless a slower agent sits in the ego corridor,
in which case the expert brakes to keep a two-second gap (hard when the gap
is badly violated). The expert is deterministic given the scenario.
"""

from __future__ import annotations

import numpy as np

from .world import EGO_LENGTH, Scenario, WorldState, step_world

CRUISE_SPEED = 5.0       # m/s
CORRIDOR_HALF_WIDTH = 1.6
HEADWAY_GAP = 2.0        # seconds
STANDSTILL_GAP = 5.0     # meters
MAX_STEER = 0.6


def _wrap_angle(a: float) -> float:
    return float(np.arctan2(np.sin(a), np.cos(a)))


def expert_control(scenario: Scenario, state: WorldState,
                   cruise: float = CRUISE_SPEED) -> tuple:
    """(accel, steer) for the current world state."""
    ego = state.ego
    # The route line is anchored laterally at the goal, not at the spawn
    # pose: an ego that spawns offset from the route should be steered back
    # onto it, producing recovery behavior rather than a redefined route.
    start = np.array([scenario.ego.x, float(scenario.goal[1])])
    span = np.asarray(scenario.goal, dtype=np.float64) - start
    route_heading = float(np.arctan2(span[1], span[0]))
    rel = np.array([ego.x, ego.y]) - start
    # signed lateral offset, positive when left of the route line
    lateral = float(np.cos(route_heading) * rel[1] - np.sin(route_heading) * rel[0])
    heading_err = _wrap_angle(route_heading - ego.heading)
    steer = heading_err + np.arctan2(-1.2 * lateral, max(ego.velocity, 1.0))
    steer = float(np.clip(steer, -MAX_STEER, MAX_STEER))

    fwd = np.array([np.cos(ego.heading), np.sin(ego.heading)])
    left = np.array([-fwd[1], fwd[0]])
    gap = np.inf
    for i, agent in enumerate(scenario.agents):
        off = state.agent_xy[i] - np.array([ego.x, ego.y])
        ahead = float(off @ fwd)
        if ahead <= 0 or abs(float(off @ left)) > CORRIDOR_HALF_WIDTH:
            continue
        # closing speed matters only if the agent is not escaping faster
        agent_fwd_speed = agent.speed_at(state.step_index) * np.cos(
            agent.heading - ego.heading)
        if agent_fwd_speed >= ego.velocity + 0.5 and ahead > STANDSTILL_GAP:
            continue
        gap = min(gap, ahead - (EGO_LENGTH + agent.length) / 2.0)

    desired = STANDSTILL_GAP + HEADWAY_GAP * ego.velocity
    if gap < 0.6 * desired:
        accel = -4.0
    elif gap < desired:
        accel = -2.0
    elif ego.velocity < cruise:
        accel = 2.0
    elif ego.velocity > cruise + 0.5:
        accel = -2.0
    else:
        accel = 0.0
    return float(accel), steer


def expert_rollout(scenario: Scenario, state: WorldState, horizon: int,
                   cruise: float = CRUISE_SPEED) -> np.ndarray:
    """Expert waypoints for the next `horizon` frames, in the frame of the
    ego pose at `state` (x forward, y left). Returns [horizon, 2]."""
    origin = np.array([state.ego.x, state.ego.y])
    c, s = np.cos(state.ego.heading), np.sin(state.ego.heading)
    world = state
    points = np.empty((horizon, 2), dtype=np.float64)
    for k in range(horizon):
        control = expert_control(scenario, world, cruise)
        world, _ = step_world(scenario, world, control=control)
        rel = np.array([world.ego.x, world.ego.y]) - origin
        points[k] = (c * rel[0] + s * rel[1], -s * rel[0] + c * rel[1])
    return points
