"""
Local LVTF Tensor Store

LVTF layout (all integers little-endian):

    offset 0   4 bytes   magic "LVTF"
    offset 4   uint32    version (1)
    offset 8   uint8     dtype code (0 = float32)
    offset 9   uint32    ndim
    offset 13  uint32[]  dims, ndim entries
    then       raw float32 elements, row-major

Also hosts the PGM frame dump used for eyeballing generated videos.
"""

import logging
import os
import struct
from typing import List, Tuple

import numpy as np

from core.errors import FormatError
from core.interfaces import ITensorStore

logger = logging.getLogger(__name__)

LVTF_MAGIC = b"LVTF"
LVTF_VERSION = 1
DTYPE_FLOAT32 = 0
_FLOAT32 = np.dtype("<f4")


def encode_lvtf(tensor: np.ndarray) -> bytes:
    tensor = np.ascontiguousarray(np.asarray(tensor), dtype=_FLOAT32)
    header = LVTF_MAGIC + struct.pack("<IBI", LVTF_VERSION, DTYPE_FLOAT32, tensor.ndim)
    header += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
    return header + tensor.tobytes()


def _unpack(data: bytes, fmt: str, offset: int, what: str) -> Tuple:
    size = struct.calcsize(fmt)
    if len(data) < offset + size:
        raise FormatError(f"truncated header: missing {what}", offset=len(data))
    return struct.unpack_from(fmt, data, offset)


def decode_lvtf(data: bytes) -> np.ndarray:
    """
    Parse an LVTF byte string.

    Raises:
        FormatError: with the byte offset of the first problem
    """
    if len(data) < 4 or data[:4] != LVTF_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {LVTF_MAGIC!r}", offset=0)
    (version,) = _unpack(data, "<I", 4, "version")
    if version != LVTF_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    (dtype_code,) = _unpack(data, "<B", 8, "dtype code")
    if dtype_code != DTYPE_FLOAT32:
        raise FormatError(f"unsupported dtype code {dtype_code}", offset=8)
    (ndim,) = _unpack(data, "<I", 9, "ndim")
    dims = _unpack(data, f"<{ndim}I", 13, "dims")
    payload_offset = 13 + 4 * ndim
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    expected = count * _FLOAT32.itemsize
    actual = len(data) - payload_offset
    if actual < expected:
        raise FormatError(
            f"truncated payload: header declares {expected} bytes, found {actual}",
            offset=len(data),
            details={"expected_bytes": expected, "actual_bytes": actual},
        )
    if actual > expected:
        raise FormatError(
            f"trailing bytes after payload: header declares {expected} bytes, found {actual}",
            offset=payload_offset + expected,
            details={"expected_bytes": expected, "actual_bytes": actual},
        )
    return np.frombuffer(data, dtype=_FLOAT32, count=count, offset=payload_offset).reshape(dims).copy()


class LocalTensorStore(ITensorStore):
    """LVTF files on the local filesystem."""

    def write(self, path: str, tensor: np.ndarray) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "wb") as f:
            f.write(encode_lvtf(tensor))
        logger.debug(f"Wrote tensor {tuple(np.shape(tensor))} to {path}")

    def read(self, path: str) -> np.ndarray:
        with open(path, "rb") as f:
            data = f.read()
        try:
            return decode_lvtf(data)
        except FormatError as e:
            e.details.setdefault("path", path)
            raise


def export_pgm_frames(video: np.ndarray, directory: str, prefix: str = "frame") -> List[str]:
    """
    Dump the first channel of every frame as an 8-bit binary PGM.

    Values are clamped to [0, 1] and scaled to 0..255.

    Returns:
        Paths written, in frame order
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    for index, frame in enumerate(np.asarray(video)):
        pixels = np.round(np.clip(frame[0], 0.0, 1.0) * 255).astype(np.uint8)
        height, width = pixels.shape
        path = os.path.join(directory, f"{prefix}_{index:04d}.pgm")
        with open(path, "wb") as f:
            f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
            f.write(pixels.tobytes())
        paths.append(path)
    logger.info(f"Exported {len(paths)} PGM frames to {directory}")
    return paths
