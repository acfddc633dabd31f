"""Assembling instance-id grids from centerness, offset, and flow heads.

Per frame: centers are 3x3 local maxima of centerness above a threshold, each
foreground cell votes for the center nearest to (cell + offset). Across
frames: a center warped by its cell's flow claims the nearest center in the
next frame within a fixed radius; unmatched centers open new ids. Ids start at
1; 0 is background.
"""

from __future__ import annotations

import numpy as np

MATCH_RADIUS_CELLS = 2.0


def find_centers(centerness: np.ndarray, threshold: float) -> np.ndarray:
    """3x3 non-maximum suppression over a [H, W] centerness map.

    Returns integer center coordinates [K, 2] (row, col), in descending
    centerness order. A cell is a center if it strictly exceeds the threshold
    and is the maximum of its 3x3 neighborhood (ties broken toward the
    first cell in scan order).
    """
    h, w = centerness.shape
    padded = np.pad(centerness, 1, constant_values=-np.inf)
    shift = {(dy, dx): padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
             for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)}
    neigh_max = np.max(np.stack(list(shift.values())), axis=0)
    # ties on a plateau keep only the first cell in scan order: it must beat
    # every neighbor that precedes it
    earlier = np.stack([shift[k] for k in ((-1, -1), (-1, 0), (-1, 1), (0, -1))])
    keep = ((centerness >= neigh_max) & (centerness > earlier.max(axis=0))
            & (centerness > threshold))
    coords = np.argwhere(keep)
    if coords.size == 0:
        return coords.reshape(0, 2)
    order = np.argsort(-centerness[coords[:, 0], coords[:, 1]], kind="stable")
    return coords[order]


def assign_cells(foreground: np.ndarray, offset: np.ndarray,
                 centers: np.ndarray) -> np.ndarray:
    """Label each foreground cell with the index of its voted center.

    Args:
      foreground: [H, W] bool.
      offset: [2, H, W] (row, col) displacement from each cell toward its
        instance center, in cells.
      centers: [K, 2] center coordinates.

    Returns [H, W] int32: 0 background, 1..K the matching center (1-based).
    """
    ids = np.zeros(foreground.shape, dtype=np.int32)
    if centers.shape[0] == 0:
        return ids
    cells = np.argwhere(foreground)
    if cells.size == 0:
        return ids
    votes = cells + offset[:, cells[:, 0], cells[:, 1]].T
    d = np.linalg.norm(votes[:, None, :] - centers[None, :, :], axis=2)
    ids[cells[:, 0], cells[:, 1]] = np.argmin(d, axis=1).astype(np.int32) + 1
    return ids


def instance_postprocess(foreground: np.ndarray, centerness: np.ndarray,
                         offset: np.ndarray, flow: np.ndarray,
                         threshold: float = 0.25) -> np.ndarray:
    """Build temporally consistent instance-id grids.

    Args:
      foreground: [T, H, W] bool occupancy per frame.
      centerness: [T, 1, H, W] (or [T, H, W]) center scores.
      offset: [T, 2, H, W] cell-to-center displacement, cells.
      flow: [T, 2, H, W] displacement each cell travels by the next frame.
      threshold: minimum centerness for a peak.

    Returns [T, H, W] int32 instance ids, 0 background, stable across frames.
    """
    if centerness.ndim == 4:
        centerness = centerness[:, 0]
    t = foreground.shape[0]
    out = np.zeros(foreground.shape, dtype=np.int32)
    next_id = 1
    prev_centers = np.zeros((0, 2))
    prev_ids: list[int] = []
    prev_flow = None
    for i in range(t):
        centers = find_centers(centerness[i], threshold)
        local = assign_cells(foreground[i], offset[i], centers)

        # carry ids forward: warp the previous centers by their flow
        frame_ids = []
        if prev_centers.shape[0] and centers.shape[0]:
            pc = prev_centers.astype(np.float64)
            fl = prev_flow[:, prev_centers[:, 0], prev_centers[:, 1]].T
            warped = pc + fl
            d = np.linalg.norm(centers[None, :, :] - warped[:, None, :], axis=2)
            taken = set()
            match = {}
            # greedy nearest pair under the radius
            order = np.argsort(d, axis=None)
            for flat in order:
                pi, ci = divmod(int(flat), centers.shape[0])
                if d[pi, ci] >= MATCH_RADIUS_CELLS:
                    break
                if pi in match.values() or ci in taken:
                    continue
                match[ci] = pi
                taken.add(ci)
            for ci in range(centers.shape[0]):
                if ci in match:
                    frame_ids.append(prev_ids[match[ci]])
                else:
                    frame_ids.append(next_id)
                    next_id += 1
        else:
            for _ in range(centers.shape[0]):
                frame_ids.append(next_id)
                next_id += 1

        relabel = np.zeros(centers.shape[0] + 1, dtype=np.int32)
        relabel[1:] = frame_ids
        out[i] = relabel[local]
        prev_centers = centers
        prev_ids = frame_ids
        prev_flow = flow[i]
    return out
