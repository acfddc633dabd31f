"""Evaluation entry points: open-loop metrics, closed-loop episodes, and the
end-to-end gradient check.

Open-loop scores the frozen model against expert-labeled windows. Closed-loop
puts it in charge of the ego, tracking the first refined waypoint each step.
The gradient check finite-differences the full objective through every
parameter group on a miniature configuration.
"""

from __future__ import annotations

import numpy as np

from ..objectives import trajectory_distance
from ..planner import FORWARD, EgoState
from ..simworld import (
    AgentSpec,
    EpisodeResult,
    Scenario,
    initial_world,
    metric_closedloop,
    metric_iou,
    metric_planning,
    metric_pq,
    render_frame,
    route_progress,
    step_world,
)
from ..simworld.render import ego_pose_of
from ..prediction import instance_postprocess
from .config import RunConfig, config_from_dict
from .data import build_sample, make_dataset, run_expert_episode
from .ptree import named_leaves
from .stack import (
    StackContext,
    StackParams,
    StackSample,
    backward_stack,
    compute_losses,
    forward_stack,
    init_stack_params,
    make_context,
    refine_without_prior,
)

# ---------------------------------------------------------------- open loop


def _straight_line(velocity: float, horizon: int, dt: float) -> np.ndarray:
    k = np.arange(1, horizon + 1)
    return np.stack([k * velocity * dt, np.zeros(horizon)], axis=1)


def evaluate_open_loop(params: StackParams, samples: list, ctx: StackContext,
                       oracle: bool = False) -> dict:
    """Mean metrics over labeled windows.

    With oracle=True the ground-truth grids stand in for the network's
    perception outputs, pinning the metric plumbing at its ideal point.
    """
    cfg = ctx.config
    h, p = cfg.horizon, cfg.plan_horizon
    acc = {"iou_now": [], "iou_future": [], "pq": [], "sq": [], "rq": [],
           "collision_rate": [], "baseline_collision_rate": [],
           "l1_sampler_refine": [], "l1_sampler_only": [], "l1_refine_only": []}
    l2_sum = np.zeros(p)
    for sample in samples:
        fwd = forward_stack(params, sample, ctx, mode="infer")
        gt_vehicle = sample.vehicle_labels.astype(bool)
        if oracle:
            pred_vehicle = gt_vehicle[:h + 1]
            pred_instances = sample.instance_labels[0][None]
        else:
            pred_vehicle = fwd.bundle.segmentation.argmax(axis=1) == 1
            pred_instances = instance_postprocess(pred_vehicle[:1],
                                                  fwd.bundle.centerness[:1],
                                                  fwd.bundle.offset[:1],
                                                  fwd.bundle.flow[:1])
        acc["iou_now"].append(metric_iou(pred_vehicle[0], gt_vehicle[0]))
        acc["iou_future"].append(np.mean([metric_iou(pred_vehicle[f], gt_vehicle[f])
                                          for f in range(1, h + 1)]))
        pq, sq, rq = metric_pq(pred_instances[0], sample.instance_labels[0])
        acc["pq"].append(pq)
        acc["sq"].append(sq)
        acc["rq"].append(rq)

        occupancy_gt = gt_vehicle[1:p + 1]
        l2, rate = metric_planning(fwd.refined, sample.expert_waypoints,
                                   occupancy_gt, ctx.spec)
        l2_sum += l2
        acc["collision_rate"].append(rate)
        straight = _straight_line(sample.velocity, p, cfg.dt)
        _, base_rate = metric_planning(straight, sample.expert_waypoints,
                                       occupancy_gt, ctx.spec)
        acc["baseline_collision_rate"].append(base_rate)

        tau_best = fwd.trajs.positions[fwd.best]
        refined_solo = refine_without_prior(params, fwd, sample, ctx)
        acc["l1_sampler_refine"].append(
            trajectory_distance(fwd.refined, sample.expert_waypoints)[0])
        acc["l1_sampler_only"].append(
            trajectory_distance(tau_best, sample.expert_waypoints)[0])
        acc["l1_refine_only"].append(
            trajectory_distance(refined_solo, sample.expert_waypoints)[0])

    out = {k: float(np.mean(v)) for k, v in acc.items()}
    l2_mean = l2_sum / max(len(samples), 1)
    for seconds in (1.0, 2.0, 3.0):
        idx = int(round(seconds / cfg.dt)) - 1
        if 0 <= idx < p:
            out[f"l2_{seconds:.0f}s"] = float(l2_mean[idx])
    out["n_samples"] = len(samples)
    return out


# ---------------------------------------------------------------- closed loop


def run_closed_loop(params: StackParams, scenario: Scenario,
                    ctx: StackContext) -> tuple:
    """Drive one scenario with the model in the loop.

    Returns (EpisodeResult, (route completion, driving score)).
    """
    cfg = ctx.config
    world = initial_world(scenario)
    frames = []  # (images, pose) of recent steps
    path = []
    collision_steps = []
    infractions: dict = {}
    in_contact_kinds = set()
    progress = route_progress(scenario, [world.ego.x, world.ego.y])

    for _ in range(scenario.steps):
        obs = render_frame(scenario, world, ctx.rig, ctx.spec)
        frames.append((obs.images, ego_pose_of(world.ego)))
        window = frames[-cfg.past_frames:]
        while len(window) < cfg.past_frames:
            window = [window[0]] + window

        ego = world.ego
        c, s = np.cos(ego.heading), np.sin(ego.heading)
        goal_ego = np.array([[c, -s], [s, c]]).T @ (scenario.goal -
                                                    np.array([ego.x, ego.y]))
        inputs = StackSample(
            images=np.stack([w[0] for w in window]),
            poses=tuple(w[1] for w in window),
            velocity=float(ego.velocity),
            command=scenario.command_at(world.step_index),
            goal_ego=goal_ego)
        fwd = forward_stack(params, inputs, ctx, mode="infer")
        # Steer toward a lookahead point on the refined plan and advance at
        # the selected candidate's pace. The candidate's first-step speed is
        # dynamically feasible and carries the cost model's braking
        # decisions; the lookahead smooths the plan's per-waypoint noise so
        # a small geometric wobble does not turn into a heading wobble.
        v_cmd = float(fwd.trajs.velocities[fwd.best][0])
        step_len = v_cmd * cfg.dt
        dists = np.hypot(fwd.refined[:, 0], fwd.refined[:, 1])
        reach = dists >= max(3.0, 2.0 * step_len)
        target = fwd.refined[int(np.argmax(reach)) if reach.any() else -1]
        norm = float(np.hypot(target[0], target[1]))
        if norm > 1e-6 and step_len > 1e-6:
            wp_ego = target * (step_len / norm)
        else:
            wp_ego = np.zeros(2)
        wp_world = np.array([ego.x, ego.y]) + np.array([[c, -s], [s, c]]) @ wp_ego

        world, events = step_world(scenario, world, waypoint=wp_world)
        path.append([world.ego.x, world.ego.y])
        collision_steps.append(bool(events.collisions.any()))
        for k in np.nonzero(events.new_collisions)[0]:
            kind = scenario.agents[int(k)].kind
            infractions[kind] = infractions.get(kind, 0) + 1
            in_contact_kinds.add(kind)
        progress = max(progress, route_progress(scenario, path[-1]))
        if progress >= 1.0:
            break

    result = EpisodeResult(path=np.array(path),
                           collision_steps=np.array(collision_steps, dtype=bool),
                           route_completion=float(progress),
                           infractions=infractions)
    return result, metric_closedloop(result)


# ---------------------------------------------------------------- gradcheck


GRADCHECK_CONFIG = {
    "bev_h": 12, "bev_w": 12, "bev_resolution": 1.0,
    "past_frames": 2, "horizon": 2, "plan_horizon": 2, "dt": 0.5,
    "depth_min": 2.0, "depth_max": 6.0, "depth_spacing": 1.0,
    "n_cameras": 2, "image_h": 16, "image_w": 24, "patch": 4,
    "channels": 6, "hidden": 8, "trunk_hidden": 8, "refine_hidden": 8,
    "latent": 4, "accels": [-2.0, 0.0, 2.0], "steer_count": 5,
}


def _gradcheck_sample(ctx: StackContext) -> StackSample:
    """A compact handmade scene: one mover ahead, ego rolling forward."""
    road = np.array([[-20.0, -6.0], [60.0, -6.0], [60.0, 6.0], [-20.0, 6.0]])
    lanes = (np.array([[-20.0, -1.75], [60.0, -1.75]]),
             np.array([[-20.0, 1.75], [60.0, 1.75]]))
    steps = ctx.config.past_frames - 1 + ctx.config.plan_horizon
    agent = AgentSpec(kind="vehicle", x=4.5, y=1.75, heading=0.0,
                      speeds=(2.0,) * steps)
    scenario = Scenario(polygons=(road,), lanes=lanes, agents=(agent,),
                        ego=EgoState(x=0.0, y=-1.75, heading=0.0, velocity=3.0),
                        goal=np.array([30.0, -1.75]), commands=((0, FORWARD),),
                        steps=steps, dt=ctx.config.dt)
    episode = run_expert_episode(scenario)
    return build_sample(episode, ctx.config.past_frames - 1, ctx)


def gradcheck_stack(mode: str = "gaussian", seed: int = 0,
                    entries_per_group: int = 6, step: float = 1e-5) -> dict:
    """Finite-difference the full objective through each parameter group.

    Returns {group name: max relative error}. Runs everything in float64 on a
    miniature configuration; sampling uses the deterministic path so repeated
    evaluations see identical values.
    """
    config = config_from_dict(dict(GRADCHECK_CONFIG, mode=mode, seed=seed))
    ctx = make_context(config)
    sample = _gradcheck_sample(ctx)
    rng = np.random.default_rng(seed)
    params = init_stack_params(config, rng, dtype=np.float64)

    def objective(p: StackParams) -> float:
        fwd = forward_stack(p, sample, ctx, mode="infer")
        losses, _ = compute_losses(p, fwd, sample, ctx)
        return losses["total"]

    fwd = forward_stack(params, sample, ctx, mode="infer")
    losses, ltape = compute_losses(params, fwd, sample, ctx)
    grads = backward_stack(params, fwd, sample, ctx, ltape)
    grad_map = dict(named_leaves(grads))

    worst: dict = {}
    for name, leaf in named_leaves(params):
        group = name.split(".")[0]
        picks = min(entries_per_group, leaf.size)
        idxs = rng.choice(leaf.size, size=picks, replace=False)
        for flat_idx in idxs:
            coord = np.unravel_index(int(flat_idx), leaf.shape)
            base = leaf[coord]
            leaf[coord] = base + step
            f_plus = objective(params)
            leaf[coord] = base - step
            f_minus = objective(params)
            leaf[coord] = base
            fd = (f_plus - f_minus) / (2.0 * step)
            a = float(grad_map[name][coord])
            rel = abs(a - fd) / max(abs(a), abs(fd), 1.0)
            worst[group] = max(worst.get(group, 0.0), rel)
    return worst


# ---------------------------------------------------------------- utilities


def held_out_samples(config: RunConfig, ctx: StackContext, n_scenarios: int,
                     seed_base: int, per_scenario: int | None = None,
                     steps: int = 16) -> list:
    """Evaluation windows over held-out scenarios, every valid window by
    default. Dense windows matter: the approach phase where a constant-speed
    extrapolation still runs into traffic is only a few steps long, and a
    sparse slice can miss it entirely.
    """
    if per_scenario is None:
        per_scenario = steps - config.plan_horizon + 1
    return make_dataset(config, ctx, n_scenarios, seed_base,
                        per_scenario=per_scenario, steps=steps)
