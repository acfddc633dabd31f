"""Dense-array kernels with hand-derived backward passes.

Every operation here is a pure function over numpy arrays: inputs are never
mutated and identical inputs produce bit-identical outputs, so values are safe
to share across threads. Arrays are float32 by default; gradient checking runs
the same code in float64 (finite differences are unreliable in 32-bit).

Backward functions implement the exact vector-Jacobian product of their
forward op. They are composed explicitly by the pipeline stages; there is no
tape or graph.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DTYPE = np.float32


def as_array(x, dtype=DEFAULT_DTYPE) -> np.ndarray:
    return np.asarray(x, dtype=dtype)


def check_shape(name: str, x: np.ndarray, expected: tuple) -> None:
    """Raise ValueError with a dimension report when `x` is not `expected`."""
    if tuple(x.shape) != tuple(expected):
        raise ValueError(f"{name}: expected shape {tuple(expected)}, got {tuple(x.shape)}")


# ---------------------------------------------------------------------------
# elementwise nonlinearities
# ---------------------------------------------------------------------------

def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign for overflow-free evaluation
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    """VJP given the forward output y = sigmoid(x)."""
    return grad * y * (1.0 - y)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(grad: np.ndarray, y: np.ndarray) -> np.ndarray:
    return grad * (1.0 - y * y)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad * (x > 0)


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------

def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    return a @ b


def matmul_backward(grad: np.ndarray, a: np.ndarray, b: np.ndarray):
    return grad @ b.T, a.T @ grad


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x [N, d_in] @ w [d_in, d_out] + b [d_out]; 1-d x is treated as N=1."""
    squeeze = x.ndim == 1
    x2 = x[None, :] if squeeze else x
    y = matmul(x2, w) + b
    return y[0] if squeeze else y


def linear_backward(grad: np.ndarray, x: np.ndarray, w: np.ndarray):
    squeeze = x.ndim == 1
    x2 = x[None, :] if squeeze else x
    g2 = grad[None, :] if squeeze else grad
    gx, gw = matmul_backward(g2, x2, w)
    gb = g2.sum(axis=0)
    return (gx[0] if squeeze else gx), gw, gb


# ---------------------------------------------------------------------------
# softmax / log-softmax
# ---------------------------------------------------------------------------

def softmax(x: np.ndarray, axis: int = 0) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_backward(grad: np.ndarray, y: np.ndarray, axis: int = 0) -> np.ndarray:
    """VJP of softmax given its output y."""
    dot = (grad * y).sum(axis=axis, keepdims=True)
    return y * (grad - dot)


def log_softmax(x: np.ndarray, axis: int = 0) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def log_softmax_backward(grad: np.ndarray, y: np.ndarray, axis: int = 0) -> np.ndarray:
    """VJP of log_softmax given its output y (so softmax = exp(y))."""
    return grad - np.exp(y) * grad.sum(axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """[C, H, W] -> [C]: mean over the spatial extent."""
    if x.ndim != 3:
        raise ValueError(f"global_avg_pool: expected [C,H,W], got {x.shape}")
    return x.mean(axis=(1, 2))


def global_avg_pool_backward(grad: np.ndarray, shape: tuple) -> np.ndarray:
    c, h, w = shape
    return np.broadcast_to(grad[:, None, None] / (h * w), (c, h, w)).astype(grad.dtype).copy()


def temporal_window_pool(x: np.ndarray, window: int) -> np.ndarray:
    """[C, T, H, W] -> [C, T]: mean over (window frames, all H, all W).

    Window slides over time with stride 1; frames beyond the end are simply
    absent (each output averages over the frames {t .. t+window-1} that
    exist), so the output keeps length T.
    """
    c, t, h, w = x.shape
    frame_mean = x.mean(axis=(2, 3))  # [C, T]
    out = np.empty((c, t), dtype=x.dtype)
    for i in range(t):
        out[:, i] = frame_mean[:, i:min(i + window, t)].mean(axis=1)
    return out


def temporal_window_pool_backward(grad: np.ndarray, shape: tuple, window: int) -> np.ndarray:
    c, t, h, w = shape
    gx_frame = np.zeros((c, t), dtype=grad.dtype)
    for i in range(t):
        n = min(i + window, t) - i
        gx_frame[:, i:i + n] += grad[:, i:i + 1] / n
    return np.broadcast_to(gx_frame[:, :, None, None] / (h * w), shape).astype(grad.dtype).copy()
