"""Camera rig geometry, depth binning, and the bird's-eye-view grid layout.

Conventions, used everywhere downstream:
  ego frame     x forward, y left, z up, origin at the ego center on the ground
  camera frame  x right, y down, z forward (optical axis); depth is the z
                coordinate of a point in this frame, not the ray length
  pixels        (u, v) = (column, row), pixel centers at integer coordinates
  BEV grid      row index follows ego x, column index follows ego y, ego at
                the grid center, cell (0, 0) at the most negative corner

All geometry is float64; feature payloads stay float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics.pose import Se3Pose


@dataclass(frozen=True)
class DepthBinning:
    """Uniform depth bins along the camera optical axis.

    Bin k has its center at min_depth + k*spacing; the default 2 m to 50 m at
    1 m spacing gives 48 bins with centers 2.0 ... 49.0.
    """

    min_depth: float = 2.0
    max_depth: float = 50.0
    spacing: float = 1.0

    def __post_init__(self):
        if self.max_depth <= self.min_depth or self.spacing <= 0:
            raise ValueError(f"DepthBinning: bad range [{self.min_depth}, {self.max_depth}] "
                             f"or spacing {self.spacing}")

    @property
    def num_bins(self) -> int:
        return int(round((self.max_depth - self.min_depth) / self.spacing))

    def centers(self) -> np.ndarray:
        return self.min_depth + np.arange(self.num_bins, dtype=np.float64) * self.spacing

    def bin_index(self, depth: np.ndarray) -> np.ndarray:
        """Nearest bin per depth value, clipped into range."""
        k = np.rint((np.asarray(depth, dtype=np.float64) - self.min_depth) / self.spacing)
        return np.clip(k, 0, self.num_bins - 1).astype(np.int64)

    def in_range(self, depth: np.ndarray) -> np.ndarray:
        d = np.asarray(depth, dtype=np.float64)
        return (d >= self.min_depth) & (d <= self.max_depth)


@dataclass(frozen=True)
class Camera:
    """One camera: pinhole intrinsics plus its mount pose in the ego frame."""

    intrinsics: np.ndarray  # (3, 3), pixels
    cam_to_ego: Se3Pose
    image_h: int
    image_w: int

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=np.float64)
        if k.shape != (3, 3):
            raise ValueError(f"Camera: intrinsics shape {k.shape}")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValueError("Camera: focal lengths must be positive")
        object.__setattr__(self, "intrinsics", k)
        k.setflags(write=False)


@dataclass(frozen=True)
class CameraRig:
    """A set of cameras sharing one image extent and one feature downsample."""

    cameras: tuple
    patch: int  # image-to-feature downsample factor

    def __post_init__(self):
        if not 1 <= len(self.cameras) <= 6:
            raise ValueError(f"CameraRig: camera count {len(self.cameras)} outside 1..6")
        h, w = self.cameras[0].image_h, self.cameras[0].image_w
        for c in self.cameras:
            if (c.image_h, c.image_w) != (h, w):
                raise ValueError("CameraRig: cameras must share one image extent")
        if h % self.patch or w % self.patch:
            raise ValueError(f"CameraRig: image extent {h}x{w} not divisible by patch {self.patch}")

    @property
    def n(self) -> int:
        return len(self.cameras)

    @property
    def feat_h(self) -> int:
        return self.cameras[0].image_h // self.patch

    @property
    def feat_w(self) -> int:
        return self.cameras[0].image_w // self.patch


def feature_pixel_centers(rig: CameraRig) -> tuple[np.ndarray, np.ndarray]:
    """Pixel (u, v) coordinates of each feature cell's patch center.

    Returns (u [W_e], v [H_e]). With patch p, feature cell j covers pixel
    columns [j*p, (j+1)*p), so its center sits at (j + 0.5)*p - 0.5.
    """
    p = rig.patch
    u = (np.arange(rig.feat_w, dtype=np.float64) + 0.5) * p - 0.5
    v = (np.arange(rig.feat_h, dtype=np.float64) + 0.5) * p - 0.5
    return u, v


def frustum_anchors(camera: Camera, rig: CameraRig, binning: DepthBinning) -> np.ndarray:
    """Ego-frame 3D anchor per (depth bin, feature row, feature col).

    Each feature cell's patch-center pixel is unprojected through the
    intrinsics at every bin center. The unnormalized ray K^-1 [u, v, 1] has
    unit z, so scaling it by a bin center places the point at exactly that
    z depth in the camera frame.

    Returns float64 [D, H_e, W_e, 3].
    """
    u, v = feature_pixel_centers(rig)
    uu, vv = np.meshgrid(u, v)  # [H_e, W_e]
    pix = np.stack([uu, vv, np.ones_like(uu)], axis=-1)  # [H_e, W_e, 3]
    rays = pix @ np.linalg.inv(camera.intrinsics).T     # unit-z directions
    depths = binning.centers()[:, None, None, None]
    cam_pts = rays[None, :, :, :] * depths              # [D, H_e, W_e, 3]
    return camera.cam_to_ego.apply(cam_pts)


@dataclass(frozen=True)
class BevSpec:
    """Geometry of the bird's-eye-view grid: extent, resolution, indexing."""

    h: int
    w: int
    resolution: float

    def __post_init__(self):
        if self.h <= 0 or self.w <= 0 or self.resolution <= 0:
            raise ValueError(f"BevSpec: bad grid {self.h}x{self.w} @ {self.resolution}")

    @property
    def extent_x(self) -> float:
        return self.h * self.resolution

    @property
    def extent_y(self) -> float:
        return self.w * self.resolution

    def cell_index(self, xy: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Map ego (x, y) of shape (..., 2) to (row, col, in_bounds)."""
        xy = np.asarray(xy, dtype=np.float64)
        i = np.floor(xy[..., 0] / self.resolution + self.h / 2.0).astype(np.int64)
        j = np.floor(xy[..., 1] / self.resolution + self.w / 2.0).astype(np.int64)
        ok = (i >= 0) & (i < self.h) & (j >= 0) & (j < self.w)
        return i, j, ok

    def cell_centers(self) -> np.ndarray:
        """Ego (x, y) of every cell center, shape [h, w, 2]."""
        x = (np.arange(self.h, dtype=np.float64) + 0.5 - self.h / 2.0) * self.resolution
        y = (np.arange(self.w, dtype=np.float64) + 0.5 - self.w / 2.0) * self.resolution
        xx, yy = np.meshgrid(x, y, indexing="ij")
        return np.stack([xx, yy], axis=-1)


def _look_rotation(yaw: float, pitch_down: float) -> np.ndarray:
    """Camera-to-ego rotation for a camera looking along (yaw, pitch) with a
    level horizon. Columns are the camera basis vectors in ego coordinates."""
    cp, sp = np.cos(pitch_down), np.sin(pitch_down)
    fwd = np.array([np.cos(yaw) * cp, np.sin(yaw) * cp, -sp])
    right = np.cross(fwd, [0.0, 0.0, 1.0])
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd], axis=1)


def ring_rig(image_h: int, image_w: int, patch: int,
             yaws_deg=(0.0, 90.0, 180.0, 270.0),
             fov_deg: float = 100.0, height: float = 1.6,
             pitch_down_deg: float = 10.0, radius: float = 1.0) -> CameraRig:
    """A surround rig of identical pinhole cameras spaced by yaw.

    Each camera sits `radius` meters from the ego center along its viewing
    yaw at `height` meters, pitched down so the near ground is visible.
    """
    fx = (image_w / 2.0) / np.tan(np.deg2rad(fov_deg) / 2.0)
    k = np.array([[fx, 0.0, (image_w - 1) / 2.0],
                  [0.0, fx, (image_h - 1) / 2.0],
                  [0.0, 0.0, 1.0]])
    cams = []
    for yd in yaws_deg:
        yaw = np.deg2rad(yd)
        rot = _look_rotation(yaw, np.deg2rad(pitch_down_deg))
        t = np.array([radius * np.cos(yaw), radius * np.sin(yaw), height])
        cams.append(Camera(k, Se3Pose(rot, t), image_h, image_w))
    return CameraRig(tuple(cams), patch)
