"""Training and evaluation samples generated from scripted scenarios.

An expert drives each scenario once; windows along its path become samples.
All label grids are rasterized against the pose of the window's newest frame,
so future frames land in the same coordinates the network predicts in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..simworld import (
    Scenario,
    agent_positions_at,
    expert_control,
    initial_world,
    rasterize_bev,
    render_frame,
    step_world,
    straight_road_scenario,
)
from ..simworld.render import downsample_depth, ego_pose_of
from .config import RunConfig
from .stack import StackContext, StackSample


@dataclass(frozen=True)
class EpisodeRecord:
    scenario: Scenario
    worlds: tuple  # WorldState at steps 0..steps
    collided: bool


def run_expert_episode(scenario: Scenario) -> EpisodeRecord:
    """Drive the scripted expert through the whole scenario."""
    worlds = [initial_world(scenario)]
    collided = False
    for _ in range(scenario.steps):
        state = worlds[-1]
        control = expert_control(scenario, state)
        state, events = step_world(scenario, state, control=control)
        collided = collided or bool(events.collisions.any())
        worlds.append(state)
    return EpisodeRecord(scenario=scenario, worlds=tuple(worlds), collided=collided)


def _to_ego(points: np.ndarray, x: float, y: float, heading: float) -> np.ndarray:
    d = np.asarray(points, dtype=np.float64) - np.array([x, y])
    c, s = np.cos(heading), np.sin(heading)
    return d @ np.array([[c, -s], [s, c]])


def build_sample(episode: EpisodeRecord, step: int, ctx: StackContext) -> StackSample:
    """One labeled window ending at `step` of an expert episode.

    Windows earlier than a full history pad by repeating the first frame,
    the same rule the closed-loop driver applies at episode start, so the
    model trains on the history shapes it will actually see.
    """
    cfg = ctx.config
    scenario = episode.scenario
    t, p = cfg.past_frames, cfg.plan_horizon
    if step < 0 or step + p > scenario.steps:
        raise ValueError(f"build_sample: step {step} leaves no room for "
                         f"{p} future steps in {scenario.steps}")

    images, depths, poses = [], [], []
    for i in range(step - t + 1, step + 1):
        world = episode.worlds[max(i, 0)]
        obs = render_frame(scenario, world, ctx.rig, ctx.spec)
        images.append(obs.images)
        depths.append(np.stack([downsample_depth(obs.depths[j], cfg.patch)
                                for j in range(len(ctx.rig.cameras))]))
        poses.append(ego_pose_of(world.ego))

    ref = episode.worlds[step].ego
    ref_pose = poses[-1]
    vehicle, instance = [], []
    drivable_label = lane_label = None
    for j in range(p + 1):
        bev = rasterize_bev(scenario, agent_positions_at(scenario, step + j),
                            ref_pose, ctx.spec)
        vehicle.append(bev["vehicle"].astype(np.int64))
        instance.append(bev["instance"])
        if j == 0:
            drivable_label = bev["drivable"].astype(np.int64)
            lane_label = bev["lanes"].astype(np.int64)

    future_xy = np.array([[episode.worlds[step + 1 + k].ego.x,
                           episode.worlds[step + 1 + k].ego.y] for k in range(p)])
    expert_waypoints = _to_ego(future_xy, ref.x, ref.y, ref.heading)
    goal_ego = _to_ego(scenario.goal[None], ref.x, ref.y, ref.heading)[0]

    return StackSample(
        images=np.stack(images),
        poses=tuple(poses),
        velocity=float(ref.velocity),
        command=scenario.command_at(step),
        goal_ego=goal_ego,
        depth_targets=np.stack(depths),
        vehicle_labels=np.stack(vehicle),
        instance_labels=np.stack(instance),
        drivable_label=drivable_label,
        lane_label=lane_label,
        expert_waypoints=expert_waypoints,
    )


def sample_steps(config: RunConfig, steps: int, per_scenario: int) -> list[int]:
    """Evenly spaced valid window ends, deterministic. Step 0 is valid: early
    windows pad their history the way the closed-loop driver does."""
    hi = steps - config.plan_horizon
    if hi < 0:
        raise ValueError(f"scenario of {steps} steps too short for windows "
                         f"({config.plan_horizon} future steps)")
    return sorted(set(int(round(v)) for v in np.linspace(0, hi, per_scenario)))


def make_dataset(config: RunConfig, ctx: StackContext, n_scenarios: int,
                 seed_base: int, per_scenario: int = 1,
                 steps: int | None = None,
                 pose_jitter: float = 0.5) -> list[StackSample]:
    """Expert-driven samples over generated straight-road scenarios.

    Spawn poses are jittered by default so the expert demonstrates steering
    back onto the lane, not just holding it; a model trained only on
    centered driving has no answer to its own small lateral drift.
    """
    need = config.past_frames - 1 + config.plan_horizon
    steps = max(need, steps if steps is not None else need + 4)
    samples = []
    for idx in range(n_scenarios):
        scenario = straight_road_scenario(seed_base + idx, steps=steps,
                                          dt=config.dt, pose_jitter=pose_jitter)
        episode = run_expert_episode(scenario)
        for s in sample_steps(config, scenario.steps, per_scenario):
            samples.append(build_sample(episode, s, ctx))
    return samples
