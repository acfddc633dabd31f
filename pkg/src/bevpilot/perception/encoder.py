"""Per-camera image encoder: a patch embedding with one hidden layer.

The image is cut into non-overlapping patches, one per feature cell, and each
cell has its own learned linear map into the hidden layer. Untied weights cost
little at these extents and let a cell's depth head condition on where it sits
in the image, which a shared map cannot do on weakly textured input. Two
shared 1x1 heads then read out appearance features and depth logits.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ..numerics.tensorops import relu, relu_backward


@dataclass(frozen=True)
class EncoderParams:
    """Weights of the patch encoder.

    patch_w / patch_b are indexed by flattened feature-cell position; the
    head weights are shared across cells.
    """

    patch_w: np.ndarray  # [P_pos, 3*patch*patch, hidden]
    patch_b: np.ndarray  # [P_pos, hidden]
    feat_w: np.ndarray   # [hidden, C]
    feat_b: np.ndarray   # [C]
    depth_w: np.ndarray  # [hidden, D]
    depth_b: np.ndarray  # [D]

    @property
    def hidden(self) -> int:
        return self.patch_w.shape[2]

    def map(self, fn) -> "EncoderParams":
        return EncoderParams(**{f.name: fn(getattr(self, f.name)) for f in fields(self)})


def init_encoder_params(feat_h: int, feat_w: int, patch: int, hidden: int,
                        channels: int, depth_bins: int, rng: np.random.Generator,
                        dtype=np.float32, scale: float = 1.0) -> EncoderParams:
    p_pos = feat_h * feat_w
    d_in = 3 * patch * patch

    def m(a, b, n=None):
        n = a if n is None else n
        return rng.normal(0.0, scale / np.sqrt(n), size=(a, b)).astype(dtype)

    return EncoderParams(
        patch_w=rng.normal(0.0, scale / np.sqrt(d_in),
                           size=(p_pos, d_in, hidden)).astype(dtype),
        patch_b=np.zeros((p_pos, hidden), dtype=dtype),
        feat_w=m(hidden, channels),
        feat_b=np.zeros(channels, dtype=dtype),
        depth_w=m(hidden, depth_bins),
        depth_b=np.zeros(depth_bins, dtype=dtype),
    )


def _to_patches(image: np.ndarray, patch: int) -> np.ndarray:
    """[3, H, W] -> [P_pos, 3*patch*patch], row-major cell order."""
    c, h, w = image.shape
    fh, fw = h // patch, w // patch
    x = image.reshape(c, fh, patch, fw, patch)
    return x.transpose(1, 3, 0, 2, 4).reshape(fh * fw, c * patch * patch)


def _from_patches(grad: np.ndarray, shape: tuple, patch: int) -> np.ndarray:
    c, h, w = shape
    fh, fw = h // patch, w // patch
    g = grad.reshape(fh, fw, c, patch, patch).transpose(2, 0, 3, 1, 4)
    return g.reshape(c, h, w)


def encode_image(image: np.ndarray, params: EncoderParams, patch: int):
    """Encode one camera image.

    Args:
      image: [3, H, W] with H, W divisible by `patch`.
      params: encoder weights whose P_pos matches (H/patch)*(W/patch).

    Returns:
      (features [C, H_e, W_e], depth_logits [D, H_e, W_e], cache)
    """
    c, h, w = image.shape
    if c != 3:
        raise ValueError(f"encode_image: expected 3 image channels, got {c}")
    if h % patch or w % patch:
        raise ValueError(f"encode_image: extent {h}x{w} not divisible by patch {patch}")
    fh, fw = h // patch, w // patch
    if params.patch_w.shape[0] != fh * fw:
        raise ValueError(f"encode_image: params cover {params.patch_w.shape[0]} cells, "
                         f"image yields {fh * fw}")
    patches = _to_patches(image, patch)
    pre = np.einsum("pd,pdh->ph", patches, params.patch_w, optimize=True) + params.patch_b
    hid = relu(pre)
    feat = hid @ params.feat_w + params.feat_b      # [P_pos, C]
    depth = hid @ params.depth_w + params.depth_b   # [P_pos, D]
    cache = (patches, pre, hid, image.shape, patch)
    to_grid = lambda a, n: a.T.reshape(n, fh, fw)
    return to_grid(feat, feat.shape[1]), to_grid(depth, depth.shape[1]), cache


def encode_image_backward(gfeat: np.ndarray, gdepth: np.ndarray, cache,
                          params: EncoderParams):
    """VJP of encode_image. Returns (grad_image, EncoderParams of grads)."""
    patches, pre, hid, img_shape, patch = cache
    p_pos = patches.shape[0]
    gf = gfeat.reshape(gfeat.shape[0], p_pos).T    # [P_pos, C]
    gd = gdepth.reshape(gdepth.shape[0], p_pos).T  # [P_pos, D]
    ghid = gf @ params.feat_w.T + gd @ params.depth_w.T
    gpre = relu_backward(ghid, pre)
    gpatches = np.einsum("ph,pdh->pd", gpre, params.patch_w, optimize=True)
    grads = EncoderParams(
        patch_w=np.einsum("pd,ph->pdh", patches, gpre, optimize=True),
        patch_b=gpre,
        feat_w=hid.T @ gf,
        feat_b=gf.sum(axis=0),
        depth_w=hid.T @ gd,
        depth_b=gd.sum(axis=0),
    )
    return _from_patches(gpatches, img_shape, patch), grads
