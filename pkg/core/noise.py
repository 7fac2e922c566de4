"""
LongVie Core - Initialization Noise

Noise policies for autoregressive generation:
- unified: one noise tensor reused for every clip
- per_clip: an independent tensor per clip
- perturbed: the unified tensor plus perturb_alpha-scaled Gaussian noise per clip

Streams come from numpy's PCG64 generator seeded through SeedSequence with
(seed, stream tag, clip index); normals use numpy's ziggurat sampler. Equal
inputs therefore give bitwise-equal tensors on every platform.
"""

import logging
from typing import Sequence

import numpy as np

from core.config import NoisePlan
from core.errors import InvalidInputError

logger = logging.getLogger(__name__)

# Stream tags keep the unified, per-clip and perturbation streams disjoint.
_UNIFIED_STREAM = 0
_PER_CLIP_STREAM = 1
_PERTURB_STREAM = 2


def _normal_stream(seed: int, key: Sequence[int], shape: Sequence[int]) -> np.ndarray:
    generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))
    return generator.standard_normal(tuple(shape))


def unified_noise(plan: NoisePlan) -> np.ndarray:
    """The single noise instance shared by all clips of a plan."""
    return _normal_stream(plan.seed, (_UNIFIED_STREAM,), plan.shape)


def noise_for_clip(plan: NoisePlan, clip_index: int) -> np.ndarray:
    """
    Materialize the initialization noise of one clip.

    Args:
        plan: Noise policy
        clip_index: Zero-based clip position in the long video

    Returns:
        Latent-shaped float64 array
    """
    if clip_index < 0:
        raise InvalidInputError(f"clip_index must be >= 0, got {clip_index}")

    if plan.mode == "unified":
        return unified_noise(plan)
    if plan.mode == "per_clip":
        return _normal_stream(plan.seed, (_PER_CLIP_STREAM, clip_index), plan.shape)

    base = unified_noise(plan)
    if plan.perturb_alpha == 0.0:
        return base
    perturbation = _normal_stream(plan.seed, (_PERTURB_STREAM, clip_index), plan.shape)
    return base + plan.perturb_alpha * perturbation


def noise_rmse(a: np.ndarray, b: np.ndarray) -> float:
    """Root mean squared difference between two noise tensors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"noise shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))
