"""Camera-to-BEV perception: encode, lift, align, pool, fuse."""

from .rig import (
    BevSpec,
    Camera,
    CameraRig,
    DepthBinning,
    feature_pixel_centers,
    frustum_anchors,
    ring_rig,
)
from .encoder import EncoderParams, encode_image, encode_image_backward, init_encoder_params
from .lifting import (
    FrustumGrid,
    HEIGHT_BAND,
    lift,
    lift_backward,
    voxel_pool,
    voxel_pool_backward,
    warp_to_current,
)
from .fusion import (
    ACCUMULATE_DISCOUNT,
    FusionParams,
    accumulate,
    accumulate_backward,
    identity_fusion_params,
    init_fusion_params,
    temporal_fuse,
    temporal_fuse_backward,
)

__all__ = [
    "BevSpec",
    "Camera",
    "CameraRig",
    "DepthBinning",
    "feature_pixel_centers",
    "frustum_anchors",
    "ring_rig",
    "EncoderParams",
    "encode_image",
    "encode_image_backward",
    "init_encoder_params",
    "FrustumGrid",
    "HEIGHT_BAND",
    "lift",
    "lift_backward",
    "voxel_pool",
    "voxel_pool_backward",
    "warp_to_current",
    "ACCUMULATE_DISCOUNT",
    "FusionParams",
    "accumulate",
    "accumulate_backward",
    "identity_fusion_params",
    "init_fusion_params",
    "temporal_fuse",
    "temporal_fuse_backward",
]
