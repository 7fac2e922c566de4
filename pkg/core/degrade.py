"""
LongVie Core - Degradation-Aware Training

Two families of augmentation applied to the dense control signal:

- feature level: the dense branch output is scaled by a factor drawn from
  scale_range (passed to the model as fusion_scale)
- data level: random scale fusion (multi-resolution resampling blended with
  random convex weights, one scale excluded) and adaptive box blur

Every function takes an explicit numpy Generator; nothing reads global
random state.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage

from core.config import DegradeConfig
from core.control_signal import VideoTensor, validate_video
from core.errors import InvalidInputError

logger = logging.getLogger(__name__)

DATA_METHODS = ("fusion", "blur", "both")


# ============================================================================
# Feature level
# ============================================================================

def draw_feature_scale(config: DegradeConfig, rng: np.random.Generator) -> float:
    """
    Draw the fusion_scale of one training step.

    With probability feature_prob the scale is Uniform(scale_range),
    otherwise 1.0. One uniform is always consumed for the trigger.
    """
    if rng.random() < config.feature_prob:
        low, high = config.scale_range
        return float(rng.uniform(low, high))
    return 1.0


# ============================================================================
# Resampling
# ============================================================================

def _axis_weights(size_in: int, size_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel centres, edge clamped.
    coords = (np.arange(size_out, dtype=np.float64) + 0.5) * size_in / size_out - 0.5
    coords = np.clip(coords, 0.0, size_in - 1)
    lower = np.floor(coords).astype(int)
    upper = np.minimum(lower + 1, size_in - 1)
    return lower, upper, coords - lower


def bilinear_resize(video: np.ndarray, height: int, width: int) -> np.ndarray:
    """
    Bilinearly resample the last two axes to (height, width).

    Interpolation is written as a + t * (b - a), so constant inputs stay
    exactly constant.
    """
    if height < 1 or width < 1:
        raise InvalidInputError(f"cannot resample to {height}x{width}")
    rows_lo, rows_hi, row_t = _axis_weights(video.shape[-2], height)
    top = video[..., rows_lo, :]
    out = top + row_t[:, None] * (video[..., rows_hi, :] - top)
    cols_lo, cols_hi, col_t = _axis_weights(video.shape[-1], width)
    left = out[..., cols_lo]
    return left + col_t * (out[..., cols_hi] - left)


def scale_set(n_scales: int) -> List[float]:
    """{1, 1/2, ..., 1/2^n}."""
    return [1.0 / 2 ** k for k in range(n_scales + 1)]


@dataclass(frozen=True)
class ScaleFusionDraw:
    """One random-scale-fusion decision: retained scales and their weights."""

    scales: Tuple[float, ...]
    excluded: float
    weights: Tuple[float, ...]


def draw_scale_fusion(config: DegradeConfig, rng: np.random.Generator) -> ScaleFusionDraw:
    """Exclude one scale uniformly, then draw normalized weights for the rest."""
    candidates = scale_set(config.n_scales)
    excluded_index = int(rng.integers(len(candidates)))
    retained = tuple(s for index, s in enumerate(candidates) if index != excluded_index)
    raw = rng.random(len(retained))
    while raw.sum() <= 0.0:
        raw = rng.random(len(retained))
    weights = raw / raw.sum()
    return ScaleFusionDraw(
        scales=retained,
        excluded=candidates[excluded_index],
        weights=tuple(float(w) for w in weights),
    )


def _check_scalable(video: VideoTensor, n_scales: int) -> None:
    height, width = video.shape[2], video.shape[3]
    smallest = 2 ** n_scales
    if height < smallest or width < smallest:
        raise InvalidInputError(
            f"frame {height}x{width} is too small for scale 1/{smallest}",
            details={"height": height, "width": width, "n_scales": n_scales},
        )


def resample_candidates(dense: VideoTensor, scales: Tuple[float, ...]) -> List[np.ndarray]:
    """Down-then-up resampled copy of the video for each scale."""
    height, width = dense.shape[2], dense.shape[3]
    candidates = []
    for scale in scales:
        small = bilinear_resize(dense, int(np.floor(scale * height)), int(np.floor(scale * width)))
        candidates.append(bilinear_resize(small, height, width))
    return candidates


def apply_scale_fusion(dense: VideoTensor, draw: ScaleFusionDraw) -> VideoTensor:
    """Weighted sum of the resampled candidates, accumulated relative to the first one."""
    candidates = resample_candidates(dense, draw.scales)
    first = candidates[0]
    out = first.copy()
    for weight, candidate in zip(draw.weights[1:], candidates[1:]):
        out += weight * (candidate - first)
    return out


def random_scale_fusion(dense: VideoTensor, config: DegradeConfig, rng: np.random.Generator) -> VideoTensor:
    """
    Blend multi-resolution copies of the dense signal.

    Raises:
        InvalidInputError: if a frame side is below 2^n_scales
    """
    dense = validate_video(dense, "dense control")
    _check_scalable(dense, config.n_scales)
    draw = draw_scale_fusion(config, rng)
    logger.debug(f"Scale fusion excluded {draw.excluded}, weights {draw.weights}")
    return apply_scale_fusion(dense, draw)


# ============================================================================
# Blur
# ============================================================================

def box_blur(video: VideoTensor, kernel: int) -> VideoTensor:
    """
    Per-frame kernel x kernel average filter with reflect padding.

    The filter runs on the offset from each frame's first pixel, which keeps
    constant frames bitwise unchanged.
    """
    video = validate_video(video)
    height, width = video.shape[2], video.shape[3]
    if kernel < 1 or kernel % 2 == 0:
        raise InvalidInputError(f"blur kernel must be odd and positive, got {kernel}")
    if kernel > height and kernel > width:
        raise InvalidInputError(f"blur kernel {kernel} is larger than the {height}x{width} frame")
    reference = video[:, :, :1, :1]
    return reference + ndimage.uniform_filter(video - reference, size=(1, 1, kernel, kernel), mode="reflect")


def adaptive_blur(dense: VideoTensor, config: DegradeConfig, rng: np.random.Generator) -> VideoTensor:
    """Box blur with a kernel drawn uniformly from blur_kernels."""
    kernel = int(config.blur_kernels[int(rng.integers(len(config.blur_kernels)))])
    logger.debug(f"Adaptive blur kernel {kernel}")
    return box_blur(dense, kernel)


# ============================================================================
# Data level
# ============================================================================

def apply_data_degradation(
    dense: VideoTensor,
    config: DegradeConfig,
    rng: np.random.Generator,
    method: Optional[str] = None,
) -> VideoTensor:
    """
    Degrade the dense control with probability data_prob.

    When triggered, one of fusion, blur or both (blur applied to the fused
    video) is chosen uniformly. `method` pins the choice; the trigger draw
    and the method draw are consumed either way, so pinned and unpinned runs
    share the rng sequence.

    Returns:
        The degraded video, or the input unchanged when not triggered
    """
    if method is not None and method not in DATA_METHODS:
        raise InvalidInputError(f"unknown degradation method: {method}")
    if rng.random() >= config.data_prob:
        return dense
    drawn = DATA_METHODS[int(rng.integers(len(DATA_METHODS)))]
    chosen = method or drawn
    if chosen == "fusion":
        return random_scale_fusion(dense, config, rng)
    if chosen == "blur":
        return adaptive_blur(dense, config, rng)
    return adaptive_blur(random_scale_fusion(dense, config, rng), config, rng)


def degradation_active(config: DegradeConfig, step: int) -> bool:
    return config.enabled and step >= config.warmup_steps


def draw_training_degradation(
    config: DegradeConfig,
    step: int,
    dense: VideoTensor,
    rng: np.random.Generator,
) -> Tuple[float, VideoTensor]:
    """
    Feature- and data-level degradation for one training sample.

    Returns:
        (fusion_scale, dense control to train on)
    """
    if not degradation_active(config, step):
        return 1.0, dense
    fusion_scale = draw_feature_scale(config, rng)
    if fusion_scale != 1.0 and not config.allow_co_occurrence:
        return fusion_scale, dense
    return fusion_scale, apply_data_degradation(dense, config, rng)
