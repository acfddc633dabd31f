"""Walk nested parameter structures as flat (name, array) lists.

Parameter groups are frozen dataclasses whose fields hold ndarrays, dicts of
ndarrays, or further dataclasses. Leaves are named by their dotted path
("decoder.head_w.flow"), which doubles as the tensor name inside weight
files, so the walk order must stay deterministic: dataclass fields in
declaration order, dict keys sorted.
"""

from __future__ import annotations

import dataclasses

import numpy as np


def named_leaves(tree, prefix: str = "") -> list:
    """Flatten to [(dotted name, ndarray)] in deterministic order."""
    if isinstance(tree, np.ndarray):
        return [(prefix, tree)]
    if dataclasses.is_dataclass(tree):
        out = []
        for f in dataclasses.fields(tree):
            name = f"{prefix}.{f.name}" if prefix else f.name
            out.extend(named_leaves(getattr(tree, f.name), name))
        return out
    if isinstance(tree, dict):
        out = []
        for key in sorted(tree):
            name = f"{prefix}.{key}" if prefix else str(key)
            out.extend(named_leaves(tree[key], name))
        return out
    raise TypeError(f"named_leaves: unsupported node {type(tree).__name__} at "
                    f"{prefix or '<root>'}")


def tree_map(fn, tree):
    """Apply fn to every ndarray leaf, rebuilding the same structure."""
    if isinstance(tree, np.ndarray):
        return fn(tree)
    if dataclasses.is_dataclass(tree):
        return type(tree)(**{f.name: tree_map(fn, getattr(tree, f.name))
                             for f in dataclasses.fields(tree)})
    if isinstance(tree, dict):
        return {k: tree_map(fn, v) for k, v in tree.items()}
    raise TypeError(f"tree_map: unsupported node {type(tree).__name__}")


def tree_map2(fn, a, b):
    """Apply fn(leaf_a, leaf_b) over two structurally identical trees."""
    if isinstance(a, np.ndarray):
        return fn(a, b)
    if dataclasses.is_dataclass(a):
        return type(a)(**{f.name: tree_map2(fn, getattr(a, f.name), getattr(b, f.name))
                          for f in dataclasses.fields(a)})
    if isinstance(a, dict):
        return {k: tree_map2(fn, a[k], b[k]) for k in a}
    raise TypeError(f"tree_map2: unsupported node {type(a).__name__}")


def tree_from_named(template, values: dict):
    """Rebuild a tree shaped like `template` from a {name: array} mapping.

    Every leaf name of the template must be present with a matching shape.
    """
    def build(tree, prefix):
        if isinstance(tree, np.ndarray):
            if prefix not in values:
                raise KeyError(f"missing tensor {prefix!r}")
            arr = values[prefix]
            if arr.shape != tree.shape:
                raise ValueError(f"tensor {prefix!r}: shape {arr.shape}, "
                                 f"expected {tree.shape}")
            return arr.astype(tree.dtype)
        if dataclasses.is_dataclass(tree):
            return type(tree)(**{f.name: build(getattr(tree, f.name),
                                               f"{prefix}.{f.name}" if prefix else f.name)
                                 for f in dataclasses.fields(tree)})
        if isinstance(tree, dict):
            return {k: build(v, f"{prefix}.{k}" if prefix else str(k))
                    for k, v in tree.items()}
        raise TypeError(f"tree_from_named: unsupported node {type(tree).__name__}")

    return build(template, "")
