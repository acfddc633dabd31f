"""Training targets for the instance heads, derived from instance-id grids.

Centerness is a Gaussian bump at each instance's center of mass; offsets
point from each instance cell to its center; flow holds the displacement of
the cell's instance center to the next frame. All quantities are in grid
cells, matching what the decoder heads predict.
"""

from __future__ import annotations

import numpy as np

CENTER_SIGMA = 1.5  # cells


def frame_centers(instance: np.ndarray) -> dict:
    """Instance id -> center of mass (row, col) floats for one [H, W] grid."""
    centers = {}
    for iid in np.unique(instance):
        if iid == 0:
            continue
        rows, cols = np.nonzero(instance == iid)
        centers[int(iid)] = np.array([rows.mean(), cols.mean()])
    return centers


def instance_targets(instances: np.ndarray, sigma: float = CENTER_SIGMA) -> dict:
    """Rasterize head targets from [T, H, W] instance-id grids.

    Returns {"centerness": [T, 1, H, W], "offset": [T, 2, H, W],
    "flow": [T, 2, H, W], "foreground": [T, H, W] bool}. Offsets and flow are
    zero outside foreground; flow is zero for instances absent from the next
    frame and everywhere in the last frame.
    """
    if instances.ndim != 3:
        raise ValueError(f"instance_targets: expected [T, H, W], got "
                         f"{instances.shape}")
    t, h, w = instances.shape
    centerness = np.zeros((t, 1, h, w))
    offset = np.zeros((t, 2, h, w))
    flow = np.zeros((t, 2, h, w))
    foreground = instances > 0
    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    per_frame = [frame_centers(instances[k]) for k in range(t)]
    for k in range(t):
        for iid, center in per_frame[k].items():
            d2 = (rr - center[0]) ** 2 + (cc - center[1]) ** 2
            centerness[k, 0] = np.maximum(centerness[k, 0],
                                          np.exp(-d2 / (2.0 * sigma * sigma)))
            mask = instances[k] == iid
            offset[k, 0][mask] = center[0] - rr[mask]
            offset[k, 1][mask] = center[1] - cc[mask]
            if k + 1 < t and iid in per_frame[k + 1]:
                motion = per_frame[k + 1][iid] - center
                flow[k, 0][mask] = motion[0]
                flow[k, 1][mask] = motion[1]
    return {"centerness": centerness, "offset": offset, "flow": flow,
            "foreground": foreground}
