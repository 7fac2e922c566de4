"""
Local LVCK Checkpoint Store

LVCK layout (all integers little-endian):

    4 bytes  magic "LVCK"
    uint32   version (1)
    uint32   config length, then the ModelConfig as UTF-8 JSON (sorted keys)
    uint32   tensor count
    per tensor:
        uint32 name length, UTF-8 name, uint32 ndim, uint32[ndim] dims,
        float32 elements
    uint64   checksum: first 8 bytes of SHA-256 over all element bytes

Weights are stored as float32, so a float64 model loses precision on a
round trip through a checkpoint.
"""

import json
import logging
import os
import struct
from typing import Any, Dict, List

import numpy as np

from core.errors import FormatError
from core.integrity import checksum64
from core.interfaces import ICheckpointStore

logger = logging.getLogger(__name__)

LVCK_MAGIC = b"LVCK"
LVCK_VERSION = 1
_FLOAT32 = np.dtype("<f4")


def encode_lvck(config: Dict[str, Any], weights: Dict[str, np.ndarray]) -> bytes:
    config_bytes = json.dumps(config, sort_keys=True).encode("utf-8")
    parts: List[bytes] = [LVCK_MAGIC, struct.pack("<II", LVCK_VERSION, len(config_bytes)), config_bytes]
    parts.append(struct.pack("<I", len(weights)))
    payloads = []
    for name, tensor in weights.items():
        array = np.ascontiguousarray(np.asarray(tensor), dtype=_FLOAT32)
        encoded_name = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded_name)) + encoded_name)
        parts.append(struct.pack(f"<I{array.ndim}I", array.ndim, *array.shape))
        payload = array.tobytes()
        payloads.append(payload)
        parts.append(payload)
    parts.append(struct.pack("<Q", checksum64(payloads)))
    return b"".join(parts)


class _Reader:
    """Cursor over checkpoint bytes that reports offsets on failure."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise FormatError(f"truncated checkpoint: missing {what}", offset=len(self.data))
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def uint32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def decode_lvck(data: bytes) -> Dict[str, Any]:
    reader = _Reader(data)
    magic = reader.take(4, "magic")
    if magic != LVCK_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {LVCK_MAGIC!r}", offset=0)
    version = reader.uint32("version")
    if version != LVCK_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    config_offset = reader.offset
    config_bytes = reader.take(reader.uint32("config length"), "config")
    try:
        config = json.loads(config_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"config is not valid JSON: {e}", offset=config_offset) from e

    weights: Dict[str, np.ndarray] = {}
    payloads = []
    for _ in range(reader.uint32("tensor count")):
        name = reader.take(reader.uint32("name length"), "name").decode("utf-8")
        ndim = reader.uint32("ndim")
        dims = struct.unpack(f"<{ndim}I", reader.take(4 * ndim, "dims"))
        count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        payload = reader.take(count * _FLOAT32.itemsize, f"elements of {name}")
        payloads.append(payload)
        weights[name] = np.frombuffer(payload, dtype=_FLOAT32).reshape(dims).copy()

    checksum_offset = reader.offset
    (stored,) = struct.unpack("<Q", reader.take(8, "checksum"))
    if reader.offset != len(data):
        raise FormatError("trailing bytes after checksum", offset=reader.offset)
    computed = checksum64(payloads)
    if stored != computed:
        raise FormatError(
            "checksum mismatch",
            offset=checksum_offset,
            details={"stored": stored, "computed": computed},
        )
    return {"config": config, "weights": weights}


class LocalCheckpointStore(ICheckpointStore):
    """LVCK files on the local filesystem."""

    def save(self, path: str, config: Dict[str, Any], weights: Dict[str, np.ndarray]) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(encode_lvck(config, weights))
        logger.info(f"✅ Saved checkpoint with {len(weights)} tensors to {path}")

    def load(self, path: str) -> Dict[str, Any]:
        with open(path, "rb") as f:
            data = f.read()
        checkpoint = decode_lvck(data)
        logger.info(f"Loaded checkpoint with {len(checkpoint['weights'])} tensors from {path}")
        return checkpoint
