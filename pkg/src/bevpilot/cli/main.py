"""Command-line driver: one binary, five subcommands.

    bevpilot gradcheck       finite-difference the full objective
    bevpilot train-toy       train on generated scenarios, save weights
    bevpilot eval-open-loop  segmentation/instance/planning metrics
    bevpilot sim-closed-loop drive scenarios with the model in control
    bevpilot dump-bev        write the BEV tensors of one window to a file

Every command takes --seed and is deterministic under it.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from ..numerics.tensorops import softmax
from ..simworld import load_scenario, straight_road_scenario
from .config import ConfigError, RunConfig, load_config, save_config, toy_config
from .data import build_sample, make_dataset, run_expert_episode
from .evaluate import (
    evaluate_open_loop,
    gradcheck_stack,
    held_out_samples,
    run_closed_loop,
)
from .ptree import named_leaves, tree_from_named
from .stack import forward_stack, init_stack_params, make_context
from .train import train
from .weights import (
    GRIDS_MAGIC,
    ContainerError,
    load_container,
    save_container,
)

GRAD_TOLERANCE = 1e-4


def _load_run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else toy_config()
    if getattr(args, "mode", None):
        config = dataclasses.replace(config, mode=args.mode)
    return config


def _load_params(config: RunConfig, args, require: bool = True):
    rng = np.random.default_rng(config.seed)
    params = init_stack_params(config, rng)
    if args.weights:
        values = load_container(args.weights)
        return tree_from_named(params, values)
    if require:
        raise SystemExit("this command needs --weights (run train-toy first)")
    return params


def _save_params(path: str, params) -> None:
    save_container(path, dict(named_leaves(params)))


def cmd_gradcheck(args) -> int:
    code = 0
    for mode in ("gaussian", "bernoulli"):
        started = time.monotonic()
        errors = gradcheck_stack(mode=mode, seed=args.seed)
        elapsed = time.monotonic() - started
        print(f"[{mode}] checked {len(errors)} parameter groups "
              f"in {elapsed:.1f}s")
        for group in sorted(errors):
            status = "ok" if errors[group] < GRAD_TOLERANCE else "FAIL"
            print(f"  {group:<14} max rel error {errors[group]:.3e}  {status}")
            if errors[group] >= GRAD_TOLERANCE:
                code = 1
    return code


def cmd_train_toy(args) -> int:
    config = _load_run_config(args)
    ctx = make_context(config)
    rng = np.random.default_rng(args.seed if args.seed is not None else config.seed)
    params = init_stack_params(config, rng)
    print(f"generating {args.scenarios} scenarios...", flush=True)
    samples = make_dataset(config, ctx, args.scenarios, seed_base=args.seed or 0,
                           per_scenario=args.samples_per_scenario, steps=16)
    print(f"training on {len(samples)} windows for {args.epochs} epochs...",
          flush=True)
    log_path = None
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        log_path = f"{args.out}/train_log.jsonl"
    started = time.monotonic()
    params = train(params, samples, ctx, config, epochs=args.epochs,
                   log_path=log_path, rng=rng)
    print(f"trained in {time.monotonic() - started:.0f}s")
    weights_path = args.weights or (f"{args.out}/weights.stp3w" if args.out
                                    else "weights.stp3w")
    _save_params(weights_path, params)
    print(f"weights written to {weights_path}")
    return 0


def _eval_samples(config: RunConfig, ctx, args):
    if args.scenario:
        scenario = load_scenario(args.scenario)
        episode = run_expert_episode(scenario)
        steps = [s for s in range(config.past_frames - 1,
                                  scenario.steps - config.plan_horizon + 1)]
        mid = steps[len(steps) // 2]
        return [build_sample(episode, mid, ctx)]
    return held_out_samples(config, ctx, args.scenarios, seed_base=args.seed or 10_000)


def cmd_eval_open_loop(args) -> int:
    config = _load_run_config(args)
    ctx = make_context(config)
    params = _load_params(config, args, require=not args.oracle)
    samples = _eval_samples(config, ctx, args)
    metrics = evaluate_open_loop(params, samples, ctx, oracle=args.oracle)
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def cmd_sim_closed_loop(args) -> int:
    config = _load_run_config(args)
    ctx = make_context(config)
    params = _load_params(config, args)
    if args.scenario:
        scenarios = [load_scenario(args.scenario)]
    else:
        steps = config.past_frames - 1 + config.plan_horizon + 16
        scenarios = [straight_road_scenario(args.seed or 0, variant=args.variant,
                                            steps=steps, dt=config.dt)]
    records = []
    for scenario in scenarios:
        result, (rc, ds) = run_closed_loop(params, scenario, ctx)
        records.append({"route_completion": rc, "driving_score": ds,
                        "collisions": int(result.collision_steps.sum()),
                        "infractions": result.infractions,
                        "steps": int(result.path.shape[0])})
    print(json.dumps(records if len(records) > 1 else records[0],
                     indent=2, sort_keys=True))
    return 0


def cmd_dump_bev(args) -> int:
    config = _load_run_config(args)
    ctx = make_context(config)
    params = _load_params(config, args, require=False)
    if args.scenario:
        scenario = load_scenario(args.scenario)
    else:
        steps = config.past_frames - 1 + config.plan_horizon + 4
        scenario = straight_road_scenario(args.seed or 0, steps=steps, dt=config.dt)
    episode = run_expert_episode(scenario)
    sample = build_sample(episode, config.past_frames - 1, ctx)
    fwd = forward_stack(params, sample, ctx, mode="infer")
    seg_prob = softmax(fwd.bundle.segmentation, axis=1)[:, 1]
    grids = {
        "fused_present": fwd.fused[-1],
        "segmentation_prob": seg_prob,
        "cost_volume": fwd.bundle.cost_volume[:, 0],
        "drivable_prob": softmax(fwd.bundle.drivable[0], axis=0)[1],
        "lanes_prob": softmax(fwd.bundle.lanes[0], axis=0)[1],
        "occupancy_plan": fwd.occupancy.astype(np.float32),
        "label_vehicle": sample.vehicle_labels.astype(np.float32),
        "label_drivable": sample.drivable_label.astype(np.float32),
    }
    out = args.out or "bev_dump.stp3g"
    save_container(out, grids, magic=GRIDS_MAGIC)
    print(f"wrote {len(grids)} grids to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bevpilot",
                                     description="end-to-end BEV driving stack")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="RunConfig JSON file")
        p.add_argument("--weights", help="weight container path")
        p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--mode", choices=("gaussian", "bernoulli"),
                       help="override the latent family")

    p = sub.add_parser("gradcheck", help="finite-difference the full objective")
    common(p)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("train-toy", help="train on generated scenarios")
    common(p)
    p.add_argument("--scenarios", type=int, default=200)
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--samples-per-scenario", type=int, default=3)
    p.set_defaults(fn=cmd_train_toy)

    p = sub.add_parser("eval-open-loop", help="open-loop metrics on held-out data")
    common(p)
    p.add_argument("--scenarios", type=int, default=20)
    p.add_argument("--oracle", action="store_true",
                   help="feed ground-truth grids instead of predictions")
    p.set_defaults(fn=cmd_eval_open_loop)

    p = sub.add_parser("sim-closed-loop", help="drive with the model in control")
    common(p)
    p.add_argument("--variant", default=None,
                   help="scenario variant when generating (empty, lead, ...)")
    p.set_defaults(fn=cmd_sim_closed_loop)

    p = sub.add_parser("dump-bev", help="write BEV grids of one window")
    common(p)
    p.set_defaults(fn=cmd_dump_bev)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None:
        args.seed = 0
    try:
        return args.fn(args)
    except (ConfigError, ContainerError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
