"""Binary tensor containers.

Two sibling formats share one layout and differ only in magic:

    STP3W001   model weights
    STP3G001   dumped BEV grids

Layout, all little-endian: 8-byte magic, u32 tensor count, then per tensor a
u16 name length, the UTF-8 name, a u8 rank, `rank` u32 dims, and the f32
payload row-major. Tensors keep insertion order; names must be unique.
"""

from __future__ import annotations

import struct

import numpy as np

WEIGHTS_MAGIC = b"STP3W001"
GRIDS_MAGIC = b"STP3G001"


class ContainerError(ValueError):
    """Base class for malformed container files."""


class MagicError(ContainerError):
    """The file does not start with the expected magic/version bytes."""


class TruncatedError(ContainerError):
    """The file ended before the declared payload was complete."""


class DuplicateNameError(ContainerError):
    """Two tensors in the file carry the same name."""


def pack_container(tensors: dict, magic: bytes = WEIGHTS_MAGIC) -> bytes:
    """Serialize an ordered {name: ndarray} mapping."""
    parts = [magic, struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ContainerError(f"tensor name too long: {name[:40]}...")
        a = np.ascontiguousarray(arr, dtype=np.float32)
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        parts.append(a.tobytes())
    return b"".join(parts)


def unpack_container(blob: bytes, magic: bytes = WEIGHTS_MAGIC) -> dict:
    """Parse bytes back into an ordered {name: float32 ndarray} mapping."""
    if blob[:8] != magic:
        raise MagicError(f"expected magic {magic!r}, found {blob[:8]!r}")
    view = memoryview(blob)
    pos = 8

    def take(n, what):
        nonlocal pos
        if pos + n > len(view):
            raise TruncatedError(f"file ends inside {what}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4, "tensor count"))
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = bytes(take(name_len, "tensor name")).decode("utf-8")
        if name in out:
            raise DuplicateNameError(f"tensor {name!r} appears twice")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        shape = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n_items = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = take(4 * n_items, f"payload of {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if pos != len(view):
        raise ContainerError(f"{len(view) - pos} trailing bytes after last tensor")
    return out


def save_container(path: str, tensors: dict, magic: bytes = WEIGHTS_MAGIC) -> None:
    with open(path, "wb") as f:
        f.write(pack_container(tensors, magic))


def load_container(path: str, magic: bytes = WEIGHTS_MAGIC) -> dict:
    with open(path, "rb") as f:
        return unpack_container(f.read(), magic)
