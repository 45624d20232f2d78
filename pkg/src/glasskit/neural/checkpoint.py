"""Bit-exact checkpoint container.

Layout (little-endian throughout): magic "GLCK", u32 format version, u32
record count, then per record: u32 name length + UTF-8 name, u32 rank, u32
extents, row-major float32 payload. Records cover trainable parameters,
normalization running statistics, and optimizer momentum buffers (stored
under "<param name>.m").
"""

import struct

import numpy as np

from ..errors import CheckpointError

_MAGIC = b"GLCK"
_VERSION = 1


def save_arrays(path, named_arrays) -> None:
    items = list(named_arrays)
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<II", _VERSION, len(items)))
        for name, arr in items:
            raw = name.encode("utf-8")
            payload = np.ascontiguousarray(arr, dtype="<f4")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", payload.ndim))
            f.write(struct.pack(f"<{payload.ndim}I", *payload.shape))
            f.write(payload.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(blob) < 12 or blob[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<I", blob, offset)
            offset += 4
            shape = struct.unpack_from(f"<{rank}I", blob, offset)
            offset += 4 * rank
            size = int(np.prod(shape, dtype=np.int64)) if rank else 1
            arr = np.frombuffer(blob, dtype="<f4", count=size, offset=offset).reshape(shape).copy()
            offset += 4 * size
            out[name] = arr
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint") from exc
    if offset != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after last record")
    return out


def network_state(net, optimizer=None):
    """Ordered (name, array) records for a network and optional optimizer."""
    items = [(name, p.data) for name, p in net.named_parameters()]
    items += list(net.named_buffers())
    if optimizer is not None:
        items += list(optimizer.named_buffers())
    return items


def save_checkpoint(path, net, optimizer=None) -> None:
    save_arrays(path, network_state(net, optimizer))


def load_checkpoint(path, net, optimizer=None) -> None:
    """Restore parameters/buffers in place; shapes and names must match."""
    stored = load_arrays(path)

    def restore(name, target):
        if name not in stored:
            raise CheckpointError(f"checkpoint missing record {name!r}")
        arr = stored.pop(name)
        if arr.shape != target.shape:
            raise CheckpointError(f"checkpoint record {name!r} has shape {arr.shape}, expected {target.shape}")
        target[...] = arr.astype(target.dtype, copy=False)

    for name, p in net.named_parameters():
        restore(name, p.data)
    for name, buf in net.named_buffers():
        restore(name, buf)
    if optimizer is not None:
        for name, buf in optimizer.named_buffers():
            restore(name, buf)
    elif stored:
        stored = {k: v for k, v in stored.items() if not k.endswith(".m")}
    if stored:
        raise CheckpointError(f"checkpoint has unexpected records: {sorted(stored)[:4]}")
