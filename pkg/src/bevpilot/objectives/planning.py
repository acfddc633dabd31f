"""Max-margin planning loss with an imitation term on the refined output.

The expert trajectory is the positive example; every sampled candidate is a
negative. A candidate violates the margin when the expert's cost does not
beat the candidate's cost by at least their distance, and only the worst
violation counts. The refined trajectory is additionally pulled toward the
expert with the same distance measure.
"""

from __future__ import annotations

import numpy as np


def trajectory_distance(a: np.ndarray, b: np.ndarray):
    """Mean per-waypoint L1 distance between [H, 2] trajectories."""
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"trajectory_distance: {a.shape} vs {b.shape}")
    diff = a - b
    return float(np.abs(diff).sum(axis=1).mean()), diff


def trajectory_distance_backward(grad: float, cache) -> np.ndarray:
    diff = cache
    return (grad / diff.shape[0]) * np.sign(diff)


def planning_loss(candidate_costs: np.ndarray, candidate_positions: np.ndarray,
                  expert_cost: float, expert_positions: np.ndarray,
                  refined_positions: np.ndarray):
    """Hinge over candidates plus imitation on the refined trajectory.

    Args:
      candidate_costs: [N] total cost per sampled candidate.
      candidate_positions: [N, H, 2] candidate waypoints.
      expert_cost: total cost of the expert trajectory under the same f.
      expert_positions: [H, 2] expert waypoints at the sampler's horizon.
      refined_positions: [H, 2] refined planner output.

    Returns (scalar loss, cache).
    """
    n = candidate_costs.shape[0]
    if candidate_positions.shape[:1] != (n,):
        raise ValueError(f"planning_loss: {n} costs for "
                         f"{candidate_positions.shape[0]} candidates")
    dists = np.abs(candidate_positions - expert_positions).sum(axis=2).mean(axis=1)
    hinges = np.maximum(expert_cost - candidate_costs + dists, 0.0)
    margin = float(hinges.max()) if n else 0.0
    worst = int(np.argmax(hinges)) if n else -1
    imit, imit_cache = trajectory_distance(refined_positions, expert_positions)
    active = margin > 0.0
    return margin + imit, (worst, active, n, imit_cache)


def planning_loss_backward(grad: float, cache):
    """VJP. Returns (grad_candidate_costs [N], grad_expert_cost, grad_refined)."""
    worst, active, n, imit_cache = cache
    g_costs = np.zeros(n)
    g_expert = 0.0
    if active:
        g_costs[worst] = -grad
        g_expert = grad
    g_refined = trajectory_distance_backward(grad, imit_cache)
    return g_costs, g_expert, g_refined
