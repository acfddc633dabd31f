"""Configuration, weight containers, and the command-line driver."""

from .config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    load_config,
    save_config,
    toy_config,
)
from .data import build_sample, make_dataset, run_expert_episode, sample_steps
from .evaluate import (
    GRADCHECK_CONFIG,
    evaluate_open_loop,
    gradcheck_stack,
    held_out_samples,
    run_closed_loop,
)
from .main import main
from .ptree import named_leaves, tree_from_named, tree_map, tree_map2
from .stack import (
    StackContext,
    StackForward,
    StackParams,
    StackSample,
    backward_stack,
    compute_losses,
    forward_stack,
    init_stack_params,
    make_context,
    refine_without_prior,
)
from .train import AdamState, adam_update, train
from .weights import (
    GRIDS_MAGIC,
    WEIGHTS_MAGIC,
    ContainerError,
    DuplicateNameError,
    MagicError,
    TruncatedError,
    load_container,
    pack_container,
    save_container,
    unpack_container,
)

__all__ = [
    "AdamState",
    "ConfigError",
    "ContainerError",
    "DuplicateNameError",
    "GRADCHECK_CONFIG",
    "GRIDS_MAGIC",
    "MagicError",
    "RunConfig",
    "StackContext",
    "StackForward",
    "StackParams",
    "StackSample",
    "TruncatedError",
    "WEIGHTS_MAGIC",
    "adam_update",
    "backward_stack",
    "build_sample",
    "compute_losses",
    "config_from_dict",
    "evaluate_open_loop",
    "forward_stack",
    "gradcheck_stack",
    "held_out_samples",
    "init_stack_params",
    "load_config",
    "load_container",
    "main",
    "make_context",
    "make_dataset",
    "named_leaves",
    "pack_container",
    "refine_without_prior",
    "run_closed_loop",
    "run_expert_episode",
    "sample_steps",
    "save_config",
    "save_container",
    "toy_config",
    "train",
    "tree_from_named",
    "tree_map",
    "tree_map2",
    "unpack_container",
]
