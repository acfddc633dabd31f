"""Scenario files and the toy scenario generator.

A scenario is a JSON document:

    {
      "version": 1,
      "seed": 7,
      "dt": 0.5,
      "steps": 12,
      "map": {"polygons": [[[x, y], ...]], "lanes": [[[x, y], ...]]},
      "agents": [{"kind": "vehicle", "x": 20.0, "y": -1.75, "heading": 0.0,
                  "length": 4.5, "width": 1.8, "height": 1.6,
                  "speeds": [3.0, 3.0, ...]}],
      "ego": {"x": 0.0, "y": -1.75, "heading": 0.0, "velocity": 5.0},
      "goal": [60.0, -1.75],
      "commands": [[0, "forward"]]
    }

The generator builds straight two-lane road scenes with a handful of agent
patterns (empty road, slower lead vehicle, oncoming traffic, roadside
obstacle, stopped vehicle blocking the lane).
"""

from __future__ import annotations

import json

import numpy as np

from ..planner.sampler import EgoState, FORWARD
from .world import AgentSpec, Scenario, STATIC, VEHICLE

SCENARIO_VERSION = 1

VARIANTS = ("empty", "lead", "oncoming", "parked", "blocking")

LANE_HALF_OFFSET = 1.75  # lane centers at +/- this y
ROAD_HALF_WIDTH = 7.0


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "version": SCENARIO_VERSION,
        "seed": s.seed,
        "dt": s.dt,
        "steps": s.steps,
        "map": {
            "polygons": [np.asarray(p).tolist() for p in s.polygons],
            "lanes": [np.asarray(l).tolist() for l in s.lanes],
        },
        "agents": [{
            "kind": a.kind, "x": a.x, "y": a.y, "heading": a.heading,
            "length": a.length, "width": a.width, "height": a.height,
            "speeds": list(a.speeds),
        } for a in s.agents],
        "ego": {"x": s.ego.x, "y": s.ego.y, "heading": s.ego.heading,
                "velocity": s.ego.velocity, "wheelbase": s.ego.wheelbase},
        "goal": np.asarray(s.goal).tolist(),
        "commands": [[int(step), cmd] for step, cmd in s.commands],
    }


def scenario_from_dict(d: dict) -> Scenario:
    version = d.get("version")
    if version != SCENARIO_VERSION:
        raise ValueError(f"scenario version {version!r} unsupported "
                         f"(expected {SCENARIO_VERSION})")
    for key in ("map", "agents", "ego", "goal", "steps"):
        if key not in d:
            raise ValueError(f"scenario missing key {key!r}")
    ego = d["ego"]
    return Scenario(
        polygons=tuple(np.asarray(p, dtype=np.float64) for p in d["map"]["polygons"]),
        lanes=tuple(np.asarray(l, dtype=np.float64) for l in d["map"].get("lanes", [])),
        agents=tuple(AgentSpec(kind=a["kind"], x=a["x"], y=a["y"],
                               heading=a["heading"], length=a.get("length", 4.5),
                               width=a.get("width", 1.8),
                               height=a.get("height", 1.6),
                               speeds=tuple(a.get("speeds", ())))
                     for a in d["agents"]),
        ego=EgoState(x=ego["x"], y=ego["y"], heading=ego["heading"],
                     velocity=ego["velocity"],
                     wheelbase=ego.get("wheelbase", 2.8)),
        goal=np.asarray(d["goal"], dtype=np.float64),
        commands=tuple((int(step), cmd) for step, cmd in d.get("commands", [])),
        steps=int(d["steps"]),
        dt=float(d.get("dt", 0.5)),
        seed=int(d.get("seed", 0)),
    )


def save_scenario(path: str, s: Scenario) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(scenario_to_dict(s), f, indent=1)


def load_scenario(path: str) -> Scenario:
    with open(path, encoding="utf-8") as f:
        return scenario_from_dict(json.load(f))


def straight_road_scenario(seed: int, variant: str | None = None,
                           steps: int = 12, dt: float = 0.5,
                           pose_jitter: float = 0.0) -> Scenario:
    """A deterministic two-lane straight-road scene for the given seed.

    `pose_jitter` is the largest lateral spawn offset in meters; the spawn
    heading is jittered proportionally. The expert steers back onto the lane
    from a jittered spawn, so jittered scenarios carry recovery behavior
    that pure lane-centered driving never shows. Jitter draws come from
    their own stream, so the scene itself is unchanged for a given seed.
    """
    rng = np.random.default_rng(seed)
    if variant is None:
        variant = VARIANTS[int(rng.integers(len(VARIANTS)))]
    if variant not in VARIANTS:
        raise ValueError(f"unknown scenario variant {variant!r}")

    x_min, x_max = -30.0, 160.0
    road = np.array([[x_min, -ROAD_HALF_WIDTH], [x_max, -ROAD_HALF_WIDTH],
                     [x_max, ROAD_HALF_WIDTH], [x_min, ROAD_HALF_WIDTH]])
    lanes = (np.array([[x_min, -LANE_HALF_OFFSET], [x_max, -LANE_HALF_OFFSET]]),
             np.array([[x_min, LANE_HALF_OFFSET], [x_max, LANE_HALF_OFFSET]]))

    ego_v = float(rng.uniform(4.0, 6.0))
    ego_y, ego_heading = -LANE_HALF_OFFSET, 0.0
    if pose_jitter > 0.0:
        jitter_rng = np.random.default_rng((seed, 77))
        ego_y += float(jitter_rng.uniform(-pose_jitter, pose_jitter))
        ego_heading += float(jitter_rng.uniform(-0.25, 0.25)) * pose_jitter
    ego = EgoState(x=0.0, y=ego_y, heading=ego_heading, velocity=ego_v)
    goal = np.array([0.0 + ego_v * dt * steps * 1.2 + 10.0, -LANE_HALF_OFFSET])

    agents = []
    if variant == "lead":
        speed = float(rng.uniform(2.5, 4.0))
        agents.append(AgentSpec(kind=VEHICLE, x=float(rng.uniform(14.0, 24.0)),
                                y=-LANE_HALF_OFFSET, heading=0.0,
                                speeds=(speed,) * steps))
    elif variant == "oncoming":
        speed = float(rng.uniform(4.0, 6.0))
        agents.append(AgentSpec(kind=VEHICLE, x=float(rng.uniform(25.0, 45.0)),
                                y=LANE_HALF_OFFSET, heading=float(np.pi),
                                speeds=(speed,) * steps))
    elif variant == "parked":
        agents.append(AgentSpec(kind=STATIC, x=float(rng.uniform(8.0, 20.0)),
                                y=float(rng.choice([-1.0, 1.0])) * 5.6,
                                heading=0.0, length=3.0, width=1.6))
    elif variant == "blocking":
        agents.append(AgentSpec(kind=VEHICLE, x=float(rng.uniform(16.0, 26.0)),
                                y=-LANE_HALF_OFFSET, heading=0.0,
                                speeds=(0.0,) * steps))
    if variant != "empty" and rng.random() < 0.5:
        # background traffic far in the opposite lane
        agents.append(AgentSpec(kind=VEHICLE, x=float(rng.uniform(50.0, 80.0)),
                                y=LANE_HALF_OFFSET, heading=float(np.pi),
                                speeds=(float(rng.uniform(3.0, 5.0)),) * steps))

    return Scenario(polygons=(road,), lanes=lanes, agents=tuple(agents),
                    ego=ego, goal=goal, commands=((0, FORWARD),),
                    steps=steps, dt=dt, seed=seed)
