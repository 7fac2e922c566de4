"""
Weight integrity helpers.

SHA-256 digests (via the cryptography package) over raw weight bytes: the
64-bit checksum stored in LVCK checkpoints and the fingerprints used to
assert that frozen weights never change.
"""

from typing import Iterable, Mapping, Tuple

import numpy as np
from cryptography.hazmat.primitives import hashes


def _digest(chunks: Iterable[bytes]) -> bytes:
    hasher = hashes.Hash(hashes.SHA256())
    for chunk in chunks:
        hasher.update(chunk)
    return hasher.finalize()


def checksum64(chunks: Iterable[bytes]) -> int:
    """First 8 digest bytes, little-endian, as an unsigned 64-bit integer."""
    return int.from_bytes(_digest(chunks)[:8], "little")


def fingerprint_arrays(arrays: Mapping[str, np.ndarray]) -> str:
    """Hex digest over names, shapes, dtypes and bytes, in sorted name order."""

    def chunks() -> Iterable[bytes]:
        for name in sorted(arrays):
            array = np.ascontiguousarray(arrays[name])
            yield name.encode("utf-8")
            yield repr((array.shape, array.dtype.str)).encode("utf-8")
            yield array.tobytes()

    return _digest(chunks()).hex()


def fingerprint_parameters(named_parameters: Iterable[Tuple[str, "object"]]) -> str:
    """Fingerprint torch parameters given as (name, tensor) pairs."""
    return fingerprint_arrays(
        {name: tensor.detach().cpu().numpy() for name, tensor in named_parameters}
    )
