"""Evaluation metrics: segmentation IoU, panoptic quality over instance
grids, open-loop planning error, and closed-loop route scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..perception.rig import BevSpec
from ..planner.costs import EGO_LENGTH, EGO_WIDTH, footprint_cells

PENALTIES = {"vehicle": 0.60, "static": 0.65}


def metric_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of boolean masks; two empty masks score 1."""
    if pred.shape != gt.shape:
        raise ValueError(f"metric_iou: {pred.shape} vs {gt.shape}")
    pred = pred.astype(bool)
    gt = gt.astype(bool)
    union = int((pred | gt).sum())
    if union == 0:
        return 1.0
    return float((pred & gt).sum() / union)


def _frame_pq_counts(pred: np.ndarray, gt: np.ndarray) -> tuple:
    pred_ids = [int(i) for i in np.unique(pred) if i != 0]
    gt_ids = [int(i) for i in np.unique(gt) if i != 0]
    matched_pred = set()
    matched_ious = []
    for g in gt_ids:
        gmask = gt == g
        for p in pred_ids:
            if p in matched_pred:
                continue
            iou = metric_iou(pred == p, gmask)
            if iou > 0.5:
                matched_pred.add(p)
                matched_ious.append(iou)
                break  # IoU > 0.5 matches are unique
    tp = len(matched_ious)
    return tp, len(pred_ids) - tp, len(gt_ids) - tp, sum(matched_ious)


def metric_pq(pred_instances: np.ndarray, gt_instances: np.ndarray) -> tuple:
    """(PQ, SQ, RQ) over [H, W] or [T, H, W] instance-id grids.

    A prediction matches a ground-truth instance when their IoU exceeds 0.5
    (such a match is unique). With no instances on either side all three
    scores are 1.
    """
    if pred_instances.shape != gt_instances.shape:
        raise ValueError(f"metric_pq: {pred_instances.shape} vs "
                         f"{gt_instances.shape}")
    pred = pred_instances[None] if pred_instances.ndim == 2 else pred_instances
    gt = gt_instances[None] if gt_instances.ndim == 2 else gt_instances
    tp = fp = fn = 0
    iou_sum = 0.0
    for k in range(pred.shape[0]):
        a, b, c, d = _frame_pq_counts(pred[k], gt[k])
        tp, fp, fn, iou_sum = tp + a, fp + b, fn + c, iou_sum + d
    denom = tp + fp / 2.0 + fn / 2.0
    if denom == 0:
        return 1.0, 1.0, 1.0
    sq = iou_sum / tp if tp else 0.0
    rq = tp / denom
    return sq * rq, sq, rq


def metric_planning(planned: np.ndarray, expert: np.ndarray,
                    occupancy: np.ndarray, spec: BevSpec,
                    length: float = EGO_LENGTH, width: float = EGO_WIDTH) -> tuple:
    """Open-loop planning quality for one frame.

    Args:
      planned, expert: [H, 2] waypoints in the planning frame.
      occupancy: [H, H_b, W_b] boolean obstacle grids per step.

    Returns (l2 [H] distance at each horizon step, collision rate: the
    fraction of steps whose ego footprint touches an occupied cell).
    """
    if planned.shape != expert.shape:
        raise ValueError(f"metric_planning: {planned.shape} vs {expert.shape}")
    if occupancy.shape[0] != planned.shape[0]:
        raise ValueError(f"metric_planning: {occupancy.shape[0]} occupancy "
                         f"frames for horizon {planned.shape[0]}")
    l2 = np.linalg.norm(planned - expert, axis=1)
    hits = 0
    prev = np.zeros(2)
    heading = 0.0
    for k in range(planned.shape[0]):
        step = planned[k] - prev
        if np.hypot(step[0], step[1]) > 1e-9:
            heading = float(np.arctan2(step[1], step[0]))
        fi, fj = footprint_cells(planned[k, 0], planned[k, 1], heading, spec,
                                 length, width)
        if occupancy[k][fi, fj].any():
            hits += 1
        prev = planned[k]
    return l2, hits / planned.shape[0]


@dataclass(frozen=True)
class EpisodeResult:
    """Outcome of one closed-loop episode."""

    path: np.ndarray             # [T, 2] executed ego positions
    collision_steps: np.ndarray  # [T] bool, any contact that frame
    route_completion: float      # fraction in [0, 1]
    infractions: dict            # kind -> distinct collision events

    def __post_init__(self):
        if not 0.0 <= self.route_completion <= 1.0:
            raise ValueError(f"EpisodeResult: route completion "
                             f"{self.route_completion} outside [0, 1]")


def metric_closedloop(result: EpisodeResult, penalties: dict = None) -> tuple:
    """(route completion %, driving score): DS = RC * prod(penalty^count)."""
    if penalties is None:
        penalties = PENALTIES
    rc = 100.0 * result.route_completion
    factor = 1.0
    for kind, count in result.infractions.items():
        factor *= penalties.get(kind, 0.5) ** count
    return rc, rc * factor
