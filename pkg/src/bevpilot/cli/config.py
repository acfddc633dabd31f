"""Run configuration: one flat record covering the whole pipeline.

Defaults describe the full-scale setup; toy runs override through a JSON
file. Parsing is strict: unknown or mistyped fields are reported by name so a
typo in a config file fails loudly instead of silently using a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..perception import BevSpec, DepthBinning, ring_rig


class ConfigError(ValueError):
    """A config file violated the RunConfig schema."""


@dataclass(frozen=True)
class RunConfig:
    # BEV grid
    bev_h: int = 200
    bev_w: int = 200
    bev_resolution: float = 0.5
    # temporal structure
    past_frames: int = 3
    horizon: int = 4
    plan_horizon: int = 6
    dt: float = 0.5
    # depth binning
    depth_min: float = 2.0
    depth_max: float = 50.0
    depth_spacing: float = 1.0
    # cameras
    n_cameras: int = 6
    image_h: int = 224
    image_w: int = 480
    patch: int = 16
    fov_deg: float = 100.0
    cam_height: float = 1.6
    cam_pitch_deg: float = 10.0
    # network widths
    channels: int = 64
    hidden: int = 64
    trunk_hidden: int = 64
    refine_hidden: int = 64
    latent: int = 32
    mode: str = "gaussian"
    # sampler grid
    accels: tuple = (-4.0, -2.0, 0.0, 2.0)
    steer_max: float = 0.6
    steer_count: int = 13
    wheelbase: float = 2.8
    # cost shaping
    safety_margin: float = 0.5
    clip_bound: float = 100.0
    # objective
    topk_fraction: float = 0.25
    future_discount: float = 0.95
    learning_rate: float = 2e-4
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("gaussian", "bernoulli"):
            raise ConfigError(f"mode: expected gaussian or bernoulli, got {self.mode!r}")
        for name in ("bev_h", "bev_w", "past_frames", "horizon", "plan_horizon",
                     "n_cameras", "image_h", "image_w", "patch", "channels",
                     "hidden", "trunk_hidden", "refine_hidden", "latent",
                     "steer_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name}: must be a positive integer")
        if self.plan_horizon < self.horizon:
            raise ConfigError("plan_horizon: must cover at least `horizon` steps")
        if self.image_h % self.patch or self.image_w % self.patch:
            raise ConfigError("patch: image extent must be divisible by patch")
        if self.dt <= 0:
            raise ConfigError("dt: must be positive")

    # derived geometry ----------------------------------------------------

    def bev_spec(self) -> BevSpec:
        return BevSpec(self.bev_h, self.bev_w, self.bev_resolution)

    def binning(self) -> DepthBinning:
        return DepthBinning(self.depth_min, self.depth_max, self.depth_spacing)

    def rig(self):
        yaws = tuple(np.linspace(0.0, 360.0, self.n_cameras, endpoint=False))
        return ring_rig(image_h=self.image_h, image_w=self.image_w,
                        patch=self.patch, yaws_deg=yaws, fov_deg=self.fov_deg,
                        height=self.cam_height, pitch_down_deg=self.cam_pitch_deg)

    def steerings(self) -> tuple:
        return tuple(np.linspace(-self.steer_max, self.steer_max, self.steer_count))

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["accels"] = list(d["accels"])
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_FIELDS = {n for n, t in _FIELD_TYPES.items() if t == "int"}
_FLOAT_FIELDS = {n for n, t in _FIELD_TYPES.items() if t == "float"}


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError(f"config root must be an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
    out = {}
    for name, value in d.items():
        if name in _INT_FIELDS:
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{name}: expected an integer, got {value!r}")
            out[name] = value
        elif name in _FLOAT_FIELDS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{name}: expected a number, got {value!r}")
            out[name] = float(value)
        elif name == "accels":
            if (not isinstance(value, (list, tuple)) or not value
                    or not all(isinstance(v, (int, float)) for v in value)):
                raise ConfigError(f"accels: expected a non-empty number list, got {value!r}")
            out[name] = tuple(float(v) for v in value)
        elif name == "mode":
            if not isinstance(value, str):
                raise ConfigError(f"mode: expected a string, got {value!r}")
            out[name] = value
    return RunConfig(**out)


def save_config(path: str, config: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {e}") from e
    return config_from_dict(d)


def toy_config() -> RunConfig:
    """The desk-scale preset the CLI uses when no config file is given.

    Sized so train-toy finishes in minutes on one CPU core: a 28.8 m BEV
    square at 0.6 m cells, four 48x80 cameras, depth 2-16 m. The RunConfig
    defaults describe the full-scale model; this preset only shrinks sizes
    and raises the learning rate to suit the shorter schedule.
    """
    return RunConfig(
        bev_h=48, bev_w=48, bev_resolution=0.6,
        past_frames=3, horizon=4, plan_horizon=6, dt=0.5,
        depth_min=2.0, depth_max=16.0, depth_spacing=1.0,
        n_cameras=4, image_h=48, image_w=80, patch=4,
        channels=12, hidden=24, trunk_hidden=16, refine_hidden=16, latent=8,
        learning_rate=2e-3,
    )
