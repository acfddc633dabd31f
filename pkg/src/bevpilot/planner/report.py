"""Human-readable planning report.

Collects everything a run of the planner produced into one JSON document:
the control grid that was sampled, every candidate's waypoints and subcost
breakdown, which candidate won, and the refined waypoints.
"""

from __future__ import annotations

import json

import numpy as np

from .costs import CostBreakdown
from .sampler import TrajectorySet


def build_report(trajs: TrajectorySet, costs: CostBreakdown, command: str,
                 selected: int, refined: np.ndarray | None = None) -> dict:
    candidates = []
    for n in range(trajs.n):
        candidates.append({
            "accel": float(trajs.controls[n, 0]),
            "steer": float(trajs.controls[n, 1]),
            "label": trajs.labels[n],
            "waypoints": [[round(float(v), 4) for v in wp]
                          for wp in trajs.positions[n]],
            "cost": {
                "safety": float(costs.f_o[n]),
                "learned": float(costs.f_v[n]),
                "rules": float(costs.f_r[n]),
                "total": float(costs.total[n]),
            },
        })
    report = {
        "command": command,
        "dt": trajs.dt,
        "horizon": trajs.horizon,
        "start": {"x": trajs.start.x, "y": trajs.start.y,
                  "heading": trajs.start.heading, "velocity": trajs.start.velocity},
        "selected": int(selected),
        "candidates": candidates,
    }
    if refined is not None:
        report["refined_waypoints"] = [[round(float(v), 4) for v in wp]
                                       for wp in refined]
    return report


def render_report(report: dict) -> str:
    return json.dumps(report, indent=2)
