"""Kinematic trajectory sampling over a constant-control grid.

Each candidate holds one (acceleration, steering) pair fixed over the horizon
and integrates the bicycle model:

    v       <- max(v + a*dt, 0)
    heading <- heading + (v / wheelbase) * tan(steer) * dt
    x, y    <- advance v*dt along the new heading

Candidates are labeled forward / turn-left / turn-right by their net heading
change, so a high-level driving command can gate the search.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FORWARD = "forward"
TURN_LEFT = "turn-left"
TURN_RIGHT = "turn-right"

COMMAND_ANGLE_DEG = 15.0  # net heading change that separates a turn

DEFAULT_ACCELS = (-4.0, -2.0, 0.0, 2.0)          # m/s^2
DEFAULT_STEERINGS = tuple(np.linspace(-0.6, 0.6, 13))  # rad


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    heading: float
    velocity: float
    wheelbase: float = 2.8

    def __post_init__(self):
        if self.wheelbase <= 0:
            raise ValueError(f"EgoState: wheelbase {self.wheelbase} must be positive")
        if self.velocity < 0:
            raise ValueError(f"EgoState: velocity {self.velocity} must be non-negative")


@dataclass(frozen=True)
class TrajectorySet:
    """Sampled candidates: N trajectories of H states each.

    states[n, k] = (x, y, heading, velocity) after step k+1; the start state
    is not included. controls[n] = (acceleration, steering), constant over
    the horizon. labels[n] is the command bucket of candidate n.
    """

    states: np.ndarray    # [N, H, 4] float64
    controls: np.ndarray  # [N, 2] float64
    labels: tuple
    start: EgoState
    dt: float

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, :, :2]

    @property
    def headings(self) -> np.ndarray:
        return self.states[:, :, 2]

    @property
    def velocities(self) -> np.ndarray:
        return self.states[:, :, 3]


def roll_bicycle(state: EgoState, accel: float, steer: float,
                 horizon: int, dt: float) -> np.ndarray:
    """Integrate one constant-control candidate. Returns [H, 4] states."""
    out = np.empty((horizon, 4), dtype=np.float64)
    x, y, psi, v = state.x, state.y, state.heading, state.velocity
    for k in range(horizon):
        v = max(v + accel * dt, 0.0)
        psi = psi + (v / state.wheelbase) * np.tan(steer) * dt
        x += v * dt * np.cos(psi)
        y += v * dt * np.sin(psi)
        out[k] = (x, y, psi, v)
    return out


def label_command(net_heading_change: float) -> str:
    limit = np.deg2rad(COMMAND_ANGLE_DEG)
    if net_heading_change > limit:
        return TURN_LEFT
    if net_heading_change < -limit:
        return TURN_RIGHT
    return FORWARD


def trajectory_from_waypoints(waypoints: np.ndarray, state: EgoState,
                              dt: float) -> TrajectorySet:
    """Wrap an externally produced [H, 2] path (e.g. the expert's) as a
    single-candidate TrajectorySet so the cost terms can score it. Headings
    and speeds are recovered from consecutive point differences."""
    waypoints = np.asarray(waypoints, dtype=np.float64)
    if waypoints.ndim != 2 or waypoints.shape[0] < 1 or waypoints.shape[1] != 2:
        raise ValueError(f"trajectory_from_waypoints: bad shape {waypoints.shape}")
    if dt <= 0:
        raise ValueError(f"trajectory_from_waypoints: dt {dt} must be positive")
    horizon = waypoints.shape[0]
    states = np.empty((1, horizon, 4), dtype=np.float64)
    states[0, :, :2] = waypoints
    prev = np.array([state.x, state.y])
    heading = state.heading
    for k in range(horizon):
        step = waypoints[k] - prev
        dist = np.hypot(step[0], step[1])
        if dist > 1e-9:
            heading = np.arctan2(step[1], step[0])
        states[0, k, 2] = heading
        states[0, k, 3] = dist / dt
        prev = waypoints[k]
    label = label_command(states[0, -1, 2] - state.heading)
    return TrajectorySet(states, np.zeros((1, 2)), (label,), state, dt)


def sample_trajectories(state: EgoState, horizon: int, dt: float,
                        accels=DEFAULT_ACCELS,
                        steerings=DEFAULT_STEERINGS) -> TrajectorySet:
    """Sample the constant-control candidate set.

    Args:
      state: current ego state (positions in the planning frame).
      horizon: number of future steps, >= 1.
      dt: step length in seconds, > 0.
      accels, steerings: the control grid; every pair becomes a candidate.

    Returns a TrajectorySet of len(accels) * len(steerings) candidates.
    """
    if dt <= 0:
        raise ValueError(f"sample_trajectories: dt {dt} must be positive")
    if horizon < 1:
        raise ValueError(f"sample_trajectories: horizon {horizon} must be >= 1")
    accels = tuple(accels)
    steerings = tuple(steerings)
    if not accels or not steerings:
        raise ValueError("sample_trajectories: empty control grid")
    states = []
    controls = []
    labels = []
    for a in accels:
        for s in steerings:
            traj = roll_bicycle(state, a, s, horizon, dt)
            states.append(traj)
            controls.append((a, s))
            labels.append(label_command(traj[-1, 2] - state.heading))
    return TrajectorySet(np.stack(states), np.asarray(controls, dtype=np.float64),
                         tuple(labels), state, dt)
