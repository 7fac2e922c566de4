"""
LongVie Core - Evaluation Metrics

Single-scale SSIM with a uniform 7x7 window, boundary consistency across
stitched clips, a flicker proxy and video RMSE, plus assembly of the
MetricsReport. All inputs are expected in [0, 1].
"""

import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from core.control_signal import ClipPlan, VideoTensor, validate_video
from core.errors import InvalidInputError
from core.records import BoundaryRecord, ClipRecord, GenerationTrace, MetricsReport

logger = logging.getLogger(__name__)

SSIM_WINDOW = 7
C1 = 0.01 ** 2
C2 = 0.03 ** 2


def _ssim_channel(a: np.ndarray, b: np.ndarray) -> float:
    size = min(SSIM_WINDOW, a.shape[0], a.shape[1])
    wa = sliding_window_view(a, (size, size))
    wb = sliding_window_view(b, (size, size))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    numerator = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return float((numerator / denominator).mean())


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    Structural similarity of two frames.

    Args:
        a: [H, W] or [C, H, W] frame
        b: Frame of the same shape

    Returns:
        Mean SSIM over all valid 7x7 windows (smaller if the frame is
        smaller), averaged over channels
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        return _ssim_channel(a, b)
    if a.ndim != 3:
        raise InvalidInputError(f"frames must be [H, W] or [C, H, W], got {a.shape}")
    return float(np.mean([_ssim_channel(a[c], b[c]) for c in range(a.shape[0])]))


def boundary_frame_pairs(plan: ClipPlan) -> List[tuple]:
    """Adjacent stitched frames straddling each internal boundary."""
    pairs = []
    for start in plan.starts[1:]:
        first_new = start + plan.overlap
        pairs.append((first_new - 1, first_new))
    return pairs


def boundary_consistency(video: VideoTensor, plan: ClipPlan) -> List[float]:
    """SSIM across every clip boundary; n_clips - 1 values."""
    video = validate_video(video)
    if video.shape[0] != plan.total_frames:
        raise InvalidInputError(
            f"video has {video.shape[0]} frames but the plan covers {plan.total_frames}"
        )
    return [ssim(video[before], video[after]) for before, after in boundary_frame_pairs(plan)]


def flicker(video: VideoTensor) -> float:
    """Mean over consecutive frame pairs of the mean absolute difference."""
    video = validate_video(video)
    if video.shape[0] < 2:
        raise InvalidInputError("flicker needs at least 2 frames")
    return float(np.mean(np.abs(np.diff(video, axis=0)).mean(axis=(1, 2, 3))))


def video_rmse(a: VideoTensor, b: VideoTensor) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"video shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mean_frame_ssim(a: VideoTensor, b: VideoTensor) -> float:
    if a.shape != b.shape:
        raise InvalidInputError(f"video shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean([ssim(a[t], b[t]) for t in range(a.shape[0])]))


def build_metrics_report(
    video: VideoTensor,
    reference: VideoTensor,
    plan: ClipPlan,
    trace: GenerationTrace,
    config_echo: Optional[Dict[str, Any]] = None,
    pixel_clips: Optional[Sequence[np.ndarray]] = None,
) -> MetricsReport:
    """
    Assemble the MetricsReport of one long generation.

    Args:
        video: Stitched generated video
        reference: Ground-truth frames of the same shape
        plan: Clip plan used to generate the video
        trace: Trace returned by generate_long
        config_echo: Configuration to echo into the report
        pixel_clips: Generated clips in pixel space; cut from the video when omitted

    Returns:
        The report; clip k's mean_ssim_to_reference compares it with clip 0
    """
    video = validate_video(video)
    if pixel_clips is None:
        pixel_clips = [video[start:stop] for start, stop in plan.windows()]
    first = pixel_clips[0]

    per_clip = []
    for index, clip in enumerate(pixel_clips):
        rmse = trace.noise_rmse_to_first[index] if index < len(trace.noise_rmse_to_first) else 0.0
        per_clip.append(ClipRecord(index, mean_frame_ssim(clip, first), rmse))

    per_boundary = [
        BoundaryRecord(index, value)
        for index, value in enumerate(boundary_consistency(video, plan))
    ]
    global_metrics = {
        "mean_ssim": mean_frame_ssim(video, reference),
        "flicker": flicker(video),
        "video_rmse": video_rmse(video, reference),
    }
    return MetricsReport(
        per_clip=per_clip,
        per_boundary=per_boundary,
        global_metrics=global_metrics,
        config_echo=dict(config_echo or {}),
    )
