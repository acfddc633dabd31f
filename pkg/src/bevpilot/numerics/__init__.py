"""Framework-free tensor math: forward ops with hand-derived backward passes.

Every op follows the same contract: forward returns (output, cache) where a
cache is needed, the matching *_backward consumes the upstream gradient plus
that cache and returns gradients for each differentiable input. There is no
tape; stages are composed by hand.
"""

from .tensorops import (
    DEFAULT_DTYPE,
    as_array,
    check_shape,
    sigmoid,
    sigmoid_backward,
    tanh,
    tanh_backward,
    relu,
    relu_backward,
    matmul,
    matmul_backward,
    linear,
    linear_backward,
    softmax,
    softmax_backward,
    log_softmax,
    log_softmax_backward,
    global_avg_pool,
    global_avg_pool_backward,
    temporal_window_pool,
    temporal_window_pool_backward,
)
from .conv import conv2d, conv2d_backward, conv3d, conv3d_backward
from .gru import (
    GruCellParams,
    DenseGruParams,
    init_gru_params,
    init_dense_gru_params,
    gru_cell,
    gru_cell_backward,
    dense_gru_cell,
    dense_gru_cell_backward,
)
from .pose import Se3Pose
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "DEFAULT_DTYPE",
    "as_array",
    "check_shape",
    "sigmoid",
    "sigmoid_backward",
    "tanh",
    "tanh_backward",
    "relu",
    "relu_backward",
    "matmul",
    "matmul_backward",
    "linear",
    "linear_backward",
    "softmax",
    "softmax_backward",
    "log_softmax",
    "log_softmax_backward",
    "global_avg_pool",
    "global_avg_pool_backward",
    "temporal_window_pool",
    "temporal_window_pool_backward",
    "conv2d",
    "conv2d_backward",
    "conv3d",
    "conv3d_backward",
    "GruCellParams",
    "DenseGruParams",
    "init_gru_params",
    "init_dense_gru_params",
    "gru_cell",
    "gru_cell_backward",
    "dense_gru_cell",
    "dense_gru_cell_backward",
    "Se3Pose",
    "GradCheckReport",
    "grad_check",
]
