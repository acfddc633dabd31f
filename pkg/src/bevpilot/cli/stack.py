"""Full pipeline composition: cameras to refined trajectory, and back.

forward_stack runs perception, prediction, and planning on one observation
window. compute_losses scores the result against a labeled sample, and
backward_stack pushes the total objective back into every parameter group.
The three stay separate so evaluation can stop after the forward pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..numerics.tensorops import softmax, softmax_backward
from ..objectives import (
    LossWeights,
    cross_entropy,
    cross_entropy_backward,
    depth_loss,
    depth_loss_backward,
    discounted_future_loss,
    discounted_future_loss_backward,
    init_loss_weights,
    instance_losses,
    instance_losses_backward,
    planning_loss,
    planning_loss_backward,
    topk_cross_entropy,
    topk_cross_entropy_backward,
    total_loss,
    total_loss_backward,
)
from ..perception import (
    BevSpec,
    CameraRig,
    DepthBinning,
    EncoderParams,
    FrustumGrid,
    FusionParams,
    accumulate,
    accumulate_backward,
    encode_image,
    encode_image_backward,
    frustum_anchors,
    init_encoder_params,
    init_fusion_params,
    lift,
    lift_backward,
    temporal_fuse,
    temporal_fuse_backward,
    voxel_pool,
    voxel_pool_backward,
    warp_to_current,
)
from ..planner import (
    EgoState,
    RefineParams,
    evaluate_costs,
    evaluate_costs_backward,
    init_refine_params,
    pool_front_features,
    pool_front_features_backward,
    refine,
    refine_backward,
    sample_trajectories,
    select_best,
    trajectory_from_waypoints,
)
from ..prediction import (
    DecoderParams,
    DistributionParams,
    RolloutParams,
    decode,
    decode_backward,
    dual_rollout,
    dual_rollout_backward,
    encode_bernoulli,
    encode_bernoulli_backward,
    encode_gaussian,
    encode_gaussian_backward,
    init_decoder_params,
    init_distribution_params,
    init_rollout_params,
    sample_bernoulli,
    sample_bernoulli_backward,
    sample_latent,
    sample_latent_backward,
)
from ..simworld import instance_targets
from .config import RunConfig


@dataclass(frozen=True)
class StackParams:
    """Every learnable tensor in the pipeline, one field per stage."""

    encoder: EncoderParams
    fusion: FusionParams
    distribution: DistributionParams
    rollout: RolloutParams
    decoder: DecoderParams
    refine: RefineParams
    w_safety: np.ndarray   # [4], ordered as SAFETY_TERMS
    w_costvol: np.ndarray  # [1]
    w_rules: np.ndarray    # [4], ordered as RULE_TERMS
    loss_weights: LossWeights


def init_stack_params(config: RunConfig, rng: np.random.Generator,
                      dtype=np.float32) -> StackParams:
    feat_h = config.image_h // config.patch
    feat_w = config.image_w // config.patch
    latent_planes = config.latent if config.mode == "gaussian" else 1
    return StackParams(
        encoder=init_encoder_params(feat_h, feat_w, config.patch, config.hidden,
                                    config.channels, config.binning().num_bins,
                                    rng, dtype),
        fusion=init_fusion_params(config.channels, rng, dtype),
        distribution=init_distribution_params(config.channels, config.latent,
                                              rng, dtype),
        rollout=init_rollout_params(config.channels, latent_planes, rng, dtype),
        decoder=init_decoder_params(config.channels, config.trunk_hidden, rng, dtype),
        refine=init_refine_params(config.channels, config.refine_hidden, rng, dtype,
                                  0.1, out_scale=8.0),
        # positive seeds keep occupied cells repulsive before any training
        w_safety=np.array([1.0, 0.1, 0.5, 0.02], dtype=np.float64),
        w_costvol=np.array([0.05], dtype=np.float64),
        w_rules=np.array([0.05, 0.02, 0.1, 0.05], dtype=np.float64),
        loss_weights=init_loss_weights(),
    )


@dataclass(frozen=True)
class StackContext:
    """Config-derived immutables shared by every forward pass."""

    config: RunConfig
    rig: CameraRig
    spec: BevSpec
    binning: DepthBinning
    anchors: tuple  # per camera, float64 [D, H_e, W_e, 3]


def make_context(config: RunConfig) -> StackContext:
    rig = config.rig()
    binning = config.binning()
    anchors = tuple(frustum_anchors(cam, rig, binning) for cam in rig.cameras)
    return StackContext(config=config, rig=rig, spec=config.bev_spec(),
                        binning=binning, anchors=anchors)


@dataclass(frozen=True)
class StackSample:
    """One observation window, optionally with training labels.

    Grids are aligned to the pose of the newest frame. Label fields hold
    1 + plan_horizon timesteps (now plus each future step); expert waypoints
    and the goal live in the newest frame's ego coordinates.
    """

    images: np.ndarray        # [t, n_cam, 3, H, W] float32
    poses: tuple              # t ego poses, oldest first
    velocity: float
    command: str
    goal_ego: np.ndarray      # [2]
    depth_targets: np.ndarray | None = None   # [t, n_cam, H_e, W_e] meters
    vehicle_labels: np.ndarray | None = None  # [1+P, H_b, W_b] {0,1}
    instance_labels: np.ndarray | None = None  # [1+P, H_b, W_b] int ids
    drivable_label: np.ndarray | None = None  # [H_b, W_b] {0,1}
    lane_label: np.ndarray | None = None      # [H_b, W_b] {0,1}
    expert_waypoints: np.ndarray | None = None  # [P, 2] ego frame


@dataclass
class StackForward:
    """Forward results plus every cache the backward pass consumes."""

    bundle: object            # PredictionBundle
    occupancy: np.ndarray     # [P, H_b, W_b] bool, padded to plan horizon
    lane_mask: np.ndarray     # [H_b, W_b] bool
    cost_volume: np.ndarray   # [P, H_b, W_b]
    trajs: object             # TrajectorySet of candidates
    breakdown: object         # CostBreakdown over candidates
    best: int
    refined: np.ndarray       # [P, 2]
    fused: np.ndarray
    dist: object
    tape: dict


TARGET_RADIUS = 20.0  # meters; keeps refinement inputs in a bounded range


def local_target(goal_ego: np.ndarray) -> np.ndarray:
    """The route goal pulled onto a disc around the ego.

    A distant goal carries no more local information than its direction, and
    raw coordinates tens of meters out swamp the refinement GRU's gates.
    """
    goal = np.asarray(goal_ego, dtype=np.float64)
    dist = float(np.hypot(goal[0], goal[1]))
    if dist <= TARGET_RADIUS:
        return goal
    return goal * (TARGET_RADIUS / dist)


def _ego_state(inputs: StackSample, config: RunConfig) -> EgoState:
    return EgoState(x=0.0, y=0.0, heading=0.0,
                    velocity=float(inputs.velocity), wheelbase=config.wheelbase)


def _pad_index(config: RunConfig) -> np.ndarray:
    """Plan step -> prediction frame, repeating the last predicted frame."""
    return np.clip(np.arange(config.plan_horizon), 0, config.horizon - 1)


def forward_stack(params: StackParams, inputs: StackSample, ctx: StackContext,
                  mode: str = "infer", rng: np.random.Generator | None = None) -> StackForward:
    cfg = ctx.config
    t, n_cam = inputs.images.shape[:2]
    if n_cam != len(ctx.rig.cameras):
        raise ValueError(f"forward_stack: {n_cam} camera images for a rig of "
                         f"{len(ctx.rig.cameras)}")
    current = inputs.poses[-1]
    motions = [current.inverse().compose(p) for p in inputs.poses]

    enc_caches = [[None] * n_cam for _ in range(t)]
    lift_caches = [[None] * n_cam for _ in range(t)]
    depth_probs = [[None] * n_cam for _ in range(t)]
    depth_logits = [[None] * n_cam for _ in range(t)]
    front_feat = None
    pool_caches = []
    bev_frames = []
    for i in range(t):
        frustums = []
        for j in range(n_cam):
            feat, dlog, ecache = encode_image(inputs.images[i, j], params.encoder,
                                              cfg.patch)
            dprob = softmax(dlog, axis=0)
            lifted, lcache = lift(feat, dprob)
            frustums.append(warp_to_current(FrustumGrid(lifted, ctx.anchors[j]),
                                            motions[i]))
            enc_caches[i][j] = ecache
            lift_caches[i][j] = lcache
            depth_probs[i][j] = dprob
            depth_logits[i][j] = dlog
            if i == t - 1 and j == 0:
                front_feat = feat
        b, _, pcache = voxel_pool(frustums, ctx.spec)
        bev_frames.append(b)
        pool_caches.append(pcache)

    bev = np.stack(bev_frames)
    acc = accumulate(bev)
    fused, fuse_cache = temporal_fuse(acc, motions, params.fusion)
    present = fused[-1]

    if cfg.mode == "gaussian":
        dist, dist_cache = encode_gaussian(present, params.distribution)
        eta, sample_cache = sample_latent(dist, mode, rng)
    else:
        dist, dist_cache = encode_bernoulli(present, params.distribution)
        eta, sample_cache = sample_bernoulli(dist, mode, rng)

    futures, roll_cache = dual_rollout(fused, eta, params.rollout, cfg.horizon)
    states = np.concatenate([present[None], futures], axis=0)
    bundle, decode_caches = decode(states, params.decoder)

    pad = _pad_index(cfg)
    occupancy = (bundle.segmentation[1:].argmax(axis=1) == 1)[pad]
    lane_mask = bundle.lanes[0].argmax(axis=0) == 1
    cost_volume = bundle.cost_volume[1:, 0][pad]

    trajs = sample_trajectories(_ego_state(inputs, cfg), cfg.plan_horizon, cfg.dt,
                                cfg.accels, cfg.steerings())
    breakdown, cost_cache = evaluate_costs(trajs, occupancy, lane_mask, cost_volume,
                                           ctx.spec, params.w_safety, params.w_costvol,
                                           params.w_rules, cfg.clip_bound,
                                           margin=cfg.safety_margin)
    best = select_best(trajs, breakdown, inputs.command)

    h0, front_cache = pool_front_features(front_feat, params.refine)
    refined, refine_cache = refine(trajs.positions[best], h0,
                                   local_target(inputs.goal_ego), params.refine)

    tape = {
        "motions": motions,
        "enc": enc_caches, "lift": lift_caches,
        "depth_probs": depth_probs, "depth_logits": depth_logits,
        "pool": pool_caches, "fuse": fuse_cache,
        "dist_cache": dist_cache, "sample_cache": sample_cache,
        "roll": roll_cache, "decode": decode_caches,
        "cost": cost_cache, "front": front_cache, "refine": refine_cache,
        "front_feat": front_feat,
    }
    return StackForward(bundle=bundle, occupancy=occupancy, lane_mask=lane_mask,
                        cost_volume=cost_volume, trajs=trajs, breakdown=breakdown,
                        best=best, refined=refined, fused=fused, dist=dist, tape=tape)


def refine_without_prior(params: StackParams, fwd: StackForward,
                         inputs: StackSample, ctx: StackContext) -> np.ndarray:
    """The refinement head alone: a zeroed prior trajectory, same features."""
    h0, _ = pool_front_features(fwd.tape["front_feat"], params.refine)
    zero_prior = np.zeros((ctx.config.plan_horizon, 2))
    refined, _ = refine(zero_prior, h0, local_target(inputs.goal_ego), params.refine)
    return refined


def compute_losses(params: StackParams, fwd: StackForward, sample: StackSample,
                   ctx: StackContext):
    """Score a forward pass against its labels.

    Returns (losses dict, loss tape). The dict carries every component plus
    the uncertainty-weighted total.
    """
    cfg = ctx.config
    h = cfg.horizon
    bundle = fwd.bundle

    seg_losses, seg_caches = [], []
    for f in range(h + 1):
        l, c = topk_cross_entropy(bundle.segmentation[f],
                                  sample.vehicle_labels[f], cfg.topk_fraction)
        seg_losses.append(l)
        seg_caches.append(c)

    targets = instance_targets(sample.instance_labels[:h + 1])
    inst_losses, inst_caches = [], []
    for f in range(h + 1):
        l, c = instance_losses(bundle.centerness[f], bundle.offset[f], bundle.flow[f],
                               targets["centerness"][f], targets["offset"][f],
                               targets["flow"][f], targets["foreground"][f])
        inst_losses.append(l)
        inst_caches.append(c)

    l_drivable, drivable_cache = cross_entropy(bundle.drivable[0], sample.drivable_label)
    l_lanes, lanes_cache = cross_entropy(bundle.lanes[0], sample.lane_label)

    depth_caches = []
    depth_sum = 0.0
    t, n_cam = sample.images.shape[:2]
    for i in range(t):
        for j in range(n_cam):
            l, _, c = depth_loss(fwd.tape["depth_logits"][i][j],
                                 sample.depth_targets[i, j], ctx.binning)
            depth_sum += l
            depth_caches.append(c)
    l_depth = depth_sum / (t * n_cam)

    l_per = (seg_losses[0] + sum(inst_losses[0][k] for k in ("centerness", "offset", "flow"))
             + l_drivable + l_lanes + l_depth)

    fut = {
        "segmentation": np.array(seg_losses[1:]),
        "centerness": np.array([d["centerness"] for d in inst_losses[1:]]),
        "offset": np.array([d["offset"] for d in inst_losses[1:]]),
        "flow": np.array([d["flow"] for d in inst_losses[1:]]),
    }
    l_pre = 0.0
    fut_caches = {}
    for name, arr in fut.items():
        l, c = discounted_future_loss(arr, cfg.future_discount)
        l_pre += l
        fut_caches[name] = c

    expert_trajs = trajectory_from_waypoints(sample.expert_waypoints,
                                             _ego_state(sample, cfg), cfg.dt)
    expert_breakdown, expert_cache = evaluate_costs(
        expert_trajs, fwd.occupancy, fwd.lane_mask, fwd.cost_volume, ctx.spec,
        params.w_safety, params.w_costvol, params.w_rules, cfg.clip_bound,
        margin=cfg.safety_margin)
    l_pla, plan_cache = planning_loss(fwd.breakdown.total, fwd.trajs.positions,
                                      float(expert_breakdown.total[0]),
                                      expert_trajs.positions[0], fwd.refined)

    total, weight_cache = total_loss(l_per, l_pre, l_pla, params.loss_weights)

    losses = {
        "total": float(total),
        "perception": float(l_per), "prediction": float(l_pre),
        "planning": float(l_pla),
        "segmentation_now": float(seg_losses[0]),
        "segmentation_future": float(np.mean(fut["segmentation"])) if h else 0.0,
        "centerness": float(inst_losses[0]["centerness"]),
        "offset": float(inst_losses[0]["offset"]),
        "flow": float(inst_losses[0]["flow"]),
        "drivable": float(l_drivable), "lanes": float(l_lanes),
        "depth": float(l_depth),
    }
    tape = {
        "seg_caches": seg_caches, "inst_caches": inst_caches,
        "drivable_cache": drivable_cache, "lanes_cache": lanes_cache,
        "depth_caches": depth_caches, "fut_caches": fut_caches,
        "expert_cache": expert_cache, "plan_cache": plan_cache,
        "weight_cache": weight_cache, "t": t, "n_cam": n_cam,
    }
    return losses, tape


def backward_stack(params: StackParams, fwd: StackForward, sample: StackSample,
                   ctx: StackContext, ltape: dict) -> StackParams:
    """Gradient of the total objective for every parameter group."""
    cfg = ctx.config
    h = cfg.horizon
    t, n_cam = ltape["t"], ltape["n_cam"]
    bundle = fwd.bundle

    g_per, g_pre, g_pla, g_loss_weights = total_loss_backward(1.0, ltape["weight_cache"])

    # planning group: margin over candidates, imitation through refinement
    g_costs, g_expert_cost, g_refined = planning_loss_backward(g_pla, ltape["plan_cache"])
    gw_o, gw_v, gw_r, gcv = evaluate_costs_backward(g_costs, fwd.tape["cost"],
                                                    params.w_costvol)
    ew_o, ew_v, ew_r, ecv = evaluate_costs_backward(np.array([g_expert_cost]),
                                                    ltape["expert_cache"], params.w_costvol)
    gw_o, gw_v, gw_r = gw_o + ew_o, gw_v + ew_v, gw_r + ew_r
    gcv = gcv + ecv

    _, gh0, _, g_refine = refine_backward(g_refined, fwd.tape["refine"], params.refine)
    g_front, g_proj_w, g_proj_b = pool_front_features_backward(gh0, fwd.tape["front"],
                                                               params.refine)
    g_refine = replace(g_refine, proj_w=g_refine.proj_w + g_proj_w,
                       proj_b=g_refine.proj_b + g_proj_b)

    # head gradients
    gb = {name: np.zeros(getattr(bundle, name).shape)
          for name in ("segmentation", "centerness", "offset", "flow",
                       "drivable", "lanes", "cost_volume")}

    gb["segmentation"][0] = topk_cross_entropy_backward(g_per, ltape["seg_caches"][0])
    gc, go, gf = instance_losses_backward(
        {"centerness": g_per, "offset": g_per, "flow": g_per}, ltape["inst_caches"][0])
    gb["centerness"][0], gb["offset"][0], gb["flow"][0] = gc, go, gf
    gb["drivable"][0] = cross_entropy_backward(g_per, ltape["drivable_cache"])
    gb["lanes"][0] = cross_entropy_backward(g_per, ltape["lanes_cache"])

    fut_grads = {name: discounted_future_loss_backward(g_pre, cache)
                 for name, cache in ltape["fut_caches"].items()}
    for f in range(1, h + 1):
        gb["segmentation"][f] = topk_cross_entropy_backward(
            fut_grads["segmentation"][f - 1], ltape["seg_caches"][f])
        gc, go, gf = instance_losses_backward(
            {"centerness": fut_grads["centerness"][f - 1],
             "offset": fut_grads["offset"][f - 1],
             "flow": fut_grads["flow"][f - 1]}, ltape["inst_caches"][f])
        gb["centerness"][f] += gc
        gb["offset"][f] += go
        gb["flow"][f] += gf

    pad = _pad_index(cfg)
    for k in range(cfg.plan_horizon):
        gb["cost_volume"][1 + pad[k], 0] += gcv[k]

    gbundle = type(bundle)(**gb)
    gstates, g_decoder = decode_backward(gbundle, fwd.tape["decode"], params.decoder)

    gpresent = gstates[0].copy()
    ghist, geta, g_rollout = dual_rollout_backward(gstates[1:], fwd.tape["roll"],
                                                   params.rollout)

    if cfg.mode == "gaussian":
        gmean, glogvar = sample_latent_backward(geta, fwd.tape["sample_cache"], fwd.dist)
        gx, ggw, ggb = encode_gaussian_backward(gmean, glogvar, fwd.tape["dist_cache"],
                                                params.distribution)
        g_distribution = DistributionParams(
            gauss_w=ggw, gauss_b=ggb,
            bern_w=np.zeros_like(params.distribution.bern_w),
            bern_b=np.zeros_like(params.distribution.bern_b))
    else:
        gprob = sample_bernoulli_backward(geta, fwd.tape["sample_cache"])
        gx, gbw, gbb = encode_bernoulli_backward(gprob, fwd.tape["dist_cache"],
                                                 params.distribution)
        g_distribution = DistributionParams(
            gauss_w=np.zeros_like(params.distribution.gauss_w),
            gauss_b=np.zeros_like(params.distribution.gauss_b),
            bern_w=gbw, bern_b=gbb)
    gpresent += gx

    gfused = ghist.copy()
    gfused[-1] += gpresent
    gacc, g_fusion = temporal_fuse_backward(gfused, fwd.tape["fuse"], params.fusion)
    gbev = accumulate_backward(gacc)

    g_encoder = params.encoder.map(np.zeros_like)
    depth_scale = g_per / (t * n_cam)
    for i in range(t):
        g_frustums = voxel_pool_backward(gbev[i], fwd.tape["pool"][i])
        for j in range(n_cam):
            gfeat, gdprob = lift_backward(g_frustums[j], fwd.tape["lift"][i][j])
            gdlog = softmax_backward(gdprob, fwd.tape["depth_probs"][i][j], axis=0)
            gdlog = gdlog + depth_loss_backward(depth_scale,
                                                ltape["depth_caches"][i * n_cam + j])
            if i == t - 1 and j == 0:
                gfeat = gfeat + g_front
            _, genc = encode_image_backward(gfeat, gdlog, fwd.tape["enc"][i][j],
                                            params.encoder)
            g_encoder = EncoderParams(*(a + b for a, b in
                                        zip(_enc_tuple(g_encoder), _enc_tuple(genc))))

    return StackParams(encoder=g_encoder, fusion=g_fusion,
                       distribution=g_distribution, rollout=g_rollout,
                       decoder=g_decoder, refine=g_refine,
                       w_safety=gw_o, w_costvol=gw_v, w_rules=gw_r,
                       loss_weights=g_loss_weights)


def _enc_tuple(p: EncoderParams) -> tuple:
    return (p.patch_w, p.patch_b, p.feat_w, p.feat_b, p.depth_w, p.depth_b)
