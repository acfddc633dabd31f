"""2D/3D cross-correlation with hand-derived backward passes.

Both ops run at stride 1 with padding mode "same" (zero pad, output extents
equal input extents; even kernels pad one extra cell at the trailing edge) or
"valid" (no pad, output shrinks by kernel-1). Layouts are channel-first and
unbatched: conv2d works on [C,H,W], conv3d on [C,T,H,W].

The implementation slides the kernel by explicit per-offset slicing, which
keeps the backward pass a transparent transpose of the forward loop.
"""

from __future__ import annotations

import numpy as np

_PAD_MODES = ("same", "valid")


def _pad_amount(k: int, mode: str) -> tuple[int, int]:
    if mode == "valid":
        return 0, 0
    lead = (k - 1) // 2
    return lead, k - 1 - lead


def _check_mode(mode: str) -> None:
    if mode not in _PAD_MODES:
        raise ValueError(f"padding mode must be one of {_PAD_MODES}, got {mode!r}")


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
           padding: str = "same") -> np.ndarray:
    """Cross-correlate x [Cin,H,W] with w [Cout,Cin,kh,kw] (+ optional b [Cout])."""
    _check_mode(padding)
    if x.ndim != 3 or w.ndim != 4 or x.shape[0] != w.shape[1]:
        raise ValueError(f"conv2d: incompatible shapes input {x.shape}, kernel {w.shape}")
    cout, cin, kh, kw = w.shape
    ph, pw = _pad_amount(kh, padding), _pad_amount(kw, padding)
    xp = np.pad(x, ((0, 0), ph, pw))
    oh, ow = xp.shape[1] - kh + 1, xp.shape[2] - kw + 1
    if oh <= 0 or ow <= 0:
        raise ValueError(f"conv2d: kernel {w.shape[2:]} exceeds padded input {xp.shape[1:]}")
    y = np.zeros((cout, oh, ow), dtype=x.dtype)
    for dy in range(kh):
        for dx in range(kw):
            patch = xp[:, dy:dy + oh, dx:dx + ow]
            y += np.einsum("chw,oc->ohw", patch, w[:, :, dy, dx], optimize=True)
    if b is not None:
        y += b[:, None, None]
    return y


def conv2d_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray,
                    padding: str = "same"):
    """VJP of conv2d. Returns (grad_x, grad_w, grad_b)."""
    cout, cin, kh, kw = w.shape
    ph, pw = _pad_amount(kh, padding), _pad_amount(kw, padding)
    xp = np.pad(x, ((0, 0), ph, pw))
    oh, ow = grad.shape[1], grad.shape[2]
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for dy in range(kh):
        for dx in range(kw):
            patch = xp[:, dy:dy + oh, dx:dx + ow]
            gw[:, :, dy, dx] = np.einsum("ohw,chw->oc", grad, patch, optimize=True)
            gxp[:, dy:dy + oh, dx:dx + ow] += np.einsum(
                "ohw,oc->chw", grad, w[:, :, dy, dx], optimize=True)
    h, wd = x.shape[1], x.shape[2]
    gx = gxp[:, ph[0]:ph[0] + h, pw[0]:pw[0] + wd]
    gb = grad.sum(axis=(1, 2))
    return gx, gw, gb


def conv3d(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
           padding: str = "same") -> np.ndarray:
    """Cross-correlate x [Cin,T,H,W] with w [Cout,Cin,kt,kh,kw] (+ optional b)."""
    _check_mode(padding)
    if x.ndim != 4 or w.ndim != 5 or x.shape[0] != w.shape[1]:
        raise ValueError(f"conv3d: incompatible shapes input {x.shape}, kernel {w.shape}")
    cout, cin, kt, kh, kw = w.shape
    pt, ph, pw = (_pad_amount(k, padding) for k in (kt, kh, kw))
    xp = np.pad(x, ((0, 0), pt, ph, pw))
    ot = xp.shape[1] - kt + 1
    oh = xp.shape[2] - kh + 1
    ow = xp.shape[3] - kw + 1
    if min(ot, oh, ow) <= 0:
        raise ValueError(f"conv3d: kernel {w.shape[2:]} exceeds padded input {xp.shape[1:]}")
    y = np.zeros((cout, ot, oh, ow), dtype=x.dtype)
    for dt in range(kt):
        for dy in range(kh):
            for dx in range(kw):
                patch = xp[:, dt:dt + ot, dy:dy + oh, dx:dx + ow]
                y += np.einsum("cthw,oc->othw", patch, w[:, :, dt, dy, dx], optimize=True)
    if b is not None:
        y += b[:, None, None, None]
    return y


def conv3d_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray,
                    padding: str = "same"):
    """VJP of conv3d. Returns (grad_x, grad_w, grad_b)."""
    cout, cin, kt, kh, kw = w.shape
    pt, ph, pw = (_pad_amount(k, padding) for k in (kt, kh, kw))
    xp = np.pad(x, ((0, 0), pt, ph, pw))
    ot, oh, ow = grad.shape[1], grad.shape[2], grad.shape[3]
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for dt in range(kt):
        for dy in range(kh):
            for dx in range(kw):
                patch = xp[:, dt:dt + ot, dy:dy + oh, dx:dx + ow]
                gw[:, :, dt, dy, dx] = np.einsum("othw,cthw->oc", grad, patch, optimize=True)
                gxp[:, dt:dt + ot, dy:dy + oh, dx:dx + ow] += np.einsum(
                    "othw,oc->cthw", grad, w[:, :, dt, dy, dx], optimize=True)
    t, h, wd = x.shape[1], x.shape[2], x.shape[3]
    gx = gxp[:, pt[0]:pt[0] + t, ph[0]:ph[0] + h, pw[0]:pw[0] + wd]
    gb = grad.sum(axis=(1, 2, 3))
    return gx, gw, gb
