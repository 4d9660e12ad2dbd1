"""
Binary checkpoint format for network parameters.

Layout, little-endian throughout:

    "DSUP"                      magic
    u32 version                 currently 1
    u32 n, n bytes              UTF-8 JSON architecture descriptor
    u32 tensor count
    per tensor:
        u32 n, n bytes          UTF-8 tensor name
        u32 rank
        rank x u32              dims
        prod(dims) x f32        data

Tensors are written in the parameter order and decoded tensors are checked against the
shapes the descriptor implies. Encoding is a pure function of the parameters, so
write -> read -> write reproduces the same bytes.
"""

import json
import logging
import os
import struct
import numpy as np
from src.toynet.network import Architecture, NetParams
from src.lib.exceptions import (
    CheckpointFormatError,
    CheckpointVersionError,
    CheckpointArchitectureError,
    InvalidArchitectureError,
)

MAGIC = b"DSUP"
VERSION = 1

log = logging.getLogger(__name__)


def _u32(value):
    return struct.pack("<I", value)


def _text(value):
    raw = value.encode("utf-8")
    return _u32(len(raw)) + raw


def encode_checkpoint(params):
    """
    Serializes parameters to checkpoint bytes.
    """
    descriptor = json.dumps(params.arch.to_dict(), sort_keys=True)
    parts = [MAGIC, _u32(VERSION), _text(descriptor), _u32(len(params.tensors))]
    for name, tensor in params.tensors.items():
        parts.append(_text(name))
        parts.append(_u32(tensor.ndim))
        parts.extend(_u32(dim) for dim in tensor.shape)
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader():
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, size):
        if self.offset + size > len(self.data):
            raise CheckpointFormatError(
                f"Checkpoint truncated at byte {self.offset}, wanted {size} more")
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def text(self):
        try:
            return self.take(self.u32()).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointFormatError("Checkpoint string is not UTF-8") from e


def decode_checkpoint(data):
    """
    Parses checkpoint bytes.

    Returns:
        NetParams: Parameters in the descriptor's dtype.

    Raises:
        CheckpointFormatError: On a bad magic, truncation or trailing bytes.
        CheckpointVersionError: On an unsupported version.
        CheckpointArchitectureError: If tensors do not match the descriptor.
    """
    reader = _Reader(bytes(data))
    if reader.take(4) != MAGIC:
        raise CheckpointFormatError("Not a checkpoint: bad magic bytes")
    version = reader.u32()
    if version != VERSION:
        raise CheckpointVersionError(f"Checkpoint version {version} is not supported (expected {VERSION})")
    try:
        arch = Architecture.from_dict(json.loads(reader.text()))
    except (json.JSONDecodeError, InvalidArchitectureError) as e:
        raise CheckpointArchitectureError(f"Bad architecture descriptor: {e}") from e

    expected = arch.tensor_shapes()
    count = reader.u32()
    if count != len(expected):
        raise CheckpointArchitectureError(
            f"Checkpoint holds {count} tensors, the architecture needs {len(expected)}")
    tensors = {}
    for _ in range(count):
        name = reader.text()
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        if expected.get(name) != shape:
            raise CheckpointArchitectureError(
                f"Tensor '{name}' has shape {shape}, the architecture expects {expected.get(name)}")
        size = int(np.prod(shape)) * 4
        tensors[name] = np.frombuffer(reader.take(size), dtype="<f4").reshape(shape).astype(arch.dtype)
    if reader.offset != len(reader.data):
        raise CheckpointFormatError(f"{len(reader.data) - reader.offset} trailing bytes after the last tensor")
    try:
        return NetParams(arch, tensors)
    except InvalidArchitectureError as e:
        raise CheckpointArchitectureError(str(e)) from e


def write_checkpoint(path, params):
    """
    Raises:
        CheckpointFormatError: If the file cannot be written.
    """
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb") as handle:
            handle.write(encode_checkpoint(params))
    except OSError as e:
        log.error("Cannot write checkpoint %s: %s", path, e)
        raise CheckpointFormatError(f"Cannot write checkpoint '{path}': {e}") from e
    log.info("Checkpoint written to %s", path)


def read_checkpoint(path):
    """
    Raises:
        CheckpointFormatError: If the file cannot be read or is malformed.
    """
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as e:
        log.error("Cannot read checkpoint %s: %s", path, e)
        raise CheckpointFormatError(f"Cannot read checkpoint '{path}': {e}") from e
    return decode_checkpoint(data)
