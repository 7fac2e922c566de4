"""
LongVie Core - Pipeline

End-to-end orchestration:
- train: fits the control branches (or pretrains the backbone) on
  synthetic training pairs with degradation-aware augmentation
- generate_long: autoregressive clip-wise generation with normalized dense
  control, per-clip point maps, shared initialization noise and anchor-frame
  chaining, stitched into one video
- run_ablation: the normalization x noise x degradation matrix
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.config import PipelineConfig
from core.control_model import (
    ControlDiT,
    ControlTrainer,
    attach_control_branches,
    backward_and_step,
    decode_latent,
    diffusion_loss,
    encode_video,
    init_model,
    sample_clip,
)
from core.control_signal import (
    ClipPlan,
    ControlPair,
    VideoTensor,
    global_normalize,
    mask_tracks,
    per_clip_normalize,
    plan_clips,
    render_point_map,
    sample_keypoints,
    track_keypoints,
    validate_video,
)
from core.degrade import box_blur, draw_training_degradation
from core.errors import InvalidInputError
from core.evaluation import boundary_consistency, boundary_frame_pairs, build_metrics_report
from core.noise import noise_for_clip, noise_rmse
from core.records import GenerationTrace, MetricsReport
from core.synthdata import SyntheticScene, TrainingPair, render_scene

logger = logging.getLogger(__name__)

# Stream tags for the numpy generators owned by the pipeline.
_TRAIN_STREAM = 10
_MASK_STREAM = 11

DEFAULT_PERTURB_ALPHA = 0.05

# Degradation column of the ablation: name -> DegradeConfig overrides.
DEGRADATION_VARIANTS: Dict[str, dict] = {
    "degrade": {"enabled": True},
    "clean": {"enabled": False},
    "feature": {"enabled": True, "data_prob": 0.0},
    "data": {"enabled": True, "feature_prob": 0.0},
}
DEFAULT_DEGRADATION = ("degrade", "clean")

__all__ = [
    "TrainingPair",
    "TrainResult",
    "train",
    "fit",
    "stitch",
    "generate_long",
    "boundary_control_discontinuity",
    "run_ablation",
    "ablation_cells",
    "DEGRADATION_VARIANTS",
    "DEFAULT_DEGRADATION",
]


@dataclass
class TrainResult:
    model: ControlDiT
    losses: List[float] = field(default_factory=list)


def _check_pair(pair: TrainingPair, config: PipelineConfig) -> None:
    expected = (config.clip_len, config.model.latent_shape[1], *config.frame_size)
    if tuple(pair.clip.shape) != expected:
        raise InvalidInputError(f"training clip shape {tuple(pair.clip.shape)} does not match {expected}")
    if pair.control.frames != config.clip_len:
        raise InvalidInputError(f"control has {pair.control.frames} frames, expected {config.clip_len}")


def train(
    config: PipelineConfig,
    dataset: Sequence[TrainingPair],
    seed: int,
    model: Optional[ControlDiT] = None,
    stage: str = "control",
) -> TrainResult:
    """
    Fit a model on independent training clips.

    Each step samples batch_size pairs, a step t and noise eps per pair,
    applies feature- and data-level degradation after warmup, averages the
    per-pair losses in a fixed order and takes one AdamW step.

    Args:
        config: Pipeline configuration
        dataset: Training pairs
        seed: Seeds the initial weights (when model is None) and all sampling
        model: Model to continue from
        stage: "control" (frozen backbone) or "base" (backbone pretraining
            without control; branches are re-derived afterwards)

    Returns:
        The trained model and its per-step losses
    """
    if not dataset:
        raise InvalidInputError("training dataset is empty")
    for pair in dataset:
        _check_pair(pair, config)

    settings = config.train
    model = model if model is not None else init_model(config.model, seed)
    steps = settings.base_steps if stage == "base" else settings.steps
    trainer = ControlTrainer(model, settings.learning_rate, settings.weight_decay, stage=stage)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _TRAIN_STREAM])))
    latent_shape = tuple(config.model.latent_shape)

    logger.info(f"🚀 Training stage '{stage}' for {steps} steps on {len(dataset)} pairs")
    losses: List[float] = []
    for step in range(steps):
        indices = rng.integers(len(dataset), size=settings.batch_size)
        total = None
        for index in indices:
            pair = dataset[int(index)]
            x0 = encode_video(pair.clip)
            t = int(rng.integers(config.model.timesteps))
            eps = rng.standard_normal(latent_shape)
            if stage == "base":
                control, fusion_scale = None, 1.0
            else:
                fusion_scale, dense = draw_training_degradation(config.degrade, step, pair.control.dense, rng)
                control = ControlPair(dense=dense, sparse=pair.control.sparse)
            loss = diffusion_loss(model, x0, control, x0[0], t, eps, fusion_scale)
            total = loss if total is None else total + loss
        batch_loss = total / settings.batch_size
        losses.append(float(batch_loss.detach()))
        backward_and_step(trainer, batch_loss, settings.learning_rate)
        if (step + 1) % settings.log_every == 0:
            window = losses[-settings.log_every:]
            logger.info(f"Step {step + 1}/{steps}: mean loss {np.mean(window):.5f}")

    if stage == "base":
        attach_control_branches(model)
        model.set_stage("control")
    logger.info(f"✅ Training stage '{stage}' finished")
    return TrainResult(model=model, losses=losses)


def fit(config: PipelineConfig, dataset: Sequence[TrainingPair], seed: int) -> TrainResult:
    """Backbone pretraining (when base_steps > 0) followed by control training."""
    model = init_model(config.model, seed)
    losses: List[float] = []
    if config.train.base_steps > 0:
        pretrained = train(config, dataset, seed, model=model, stage="base")
        model, losses = pretrained.model, list(pretrained.losses)
    result = train(config, dataset, seed, model=model, stage="control")
    return TrainResult(model=result.model, losses=losses + result.losses)


def stitch(clips: Sequence[np.ndarray], overlap: int) -> np.ndarray:
    """
    Concatenate clips, keeping the earlier copy of every overlapped frame.

    Returns:
        L + (k - 1)(L - overlap) frames for k clips of length L
    """
    if not clips:
        raise InvalidInputError("nothing to stitch")
    frame_shape = clips[0].shape[1:]
    for index, clip in enumerate(clips):
        if clip.shape[1:] != frame_shape:
            raise InvalidInputError(f"clip {index} has frame shape {clip.shape[1:]}, expected {frame_shape}")
        if clip.shape[0] <= overlap:
            raise InvalidInputError(f"clip {index} has {clip.shape[0]} frames, not more than overlap {overlap}")
    return np.concatenate([clips[0]] + [clip[overlap:] for clip in clips[1:]], axis=0)


def _clip_depth(depth: VideoTensor, normalized: VideoTensor, window: Tuple[int, int], mode: str) -> VideoTensor:
    start, stop = window
    if mode == "global":
        return normalized[start:stop]
    return global_normalize(depth[start:stop])


def generate_long(
    model: ControlDiT,
    depth_video: VideoTensor,
    scene: SyntheticScene,
    config: PipelineConfig,
    seed: Optional[int] = None,
    first_frame: Optional[np.ndarray] = None,
) -> Tuple[VideoTensor, GenerationTrace]:
    """
    Generate a long video clip by clip.

    Global normalization happens once over the whole depth video before it
    is segmented; per-clip normalization rescales each window on its own.
    Clip 0 is anchored on the ground-truth first frame, every later clip on
    the last generated latent frame of its predecessor.

    Args:
        model: Trained ControlDiT
        depth_video: [T, 1, H, W] raw depth
        scene: Scene providing the motion used for keypoint tracking
        config: Pipeline configuration
        seed: Seeds keypoint masking; defaults to the noise seed
        first_frame: [1, H, W] ground-truth first frame; rendered from the scene when omitted

    Returns:
        (stitched pixel video, trace)

    Raises:
        NonCoverableLengthError: if the clips cannot tile the depth video
    """
    depth = validate_video(depth_video, "depth video")
    height, width = config.frame_size
    if depth.shape[2:] != (height, width):
        raise InvalidInputError(f"depth frames {depth.shape[2:]} do not match the model's {(height, width)}")
    plan = plan_clips(depth.shape[0], config.clip_len, config.overlap)
    if config.normalization == "global":
        normalized = global_normalize(depth)
    else:
        normalized = per_clip_normalize(depth, plan)

    seed = config.noise.seed if seed is None else seed
    settings = config.inference
    noise_plan = config.noise_plan
    points = sample_keypoints(height, width, settings.keypoints_per_clip)
    if first_frame is None:
        first_frame = render_scene(scene).frames[0]

    trace = GenerationTrace(plan=plan.to_dict())
    anchor = encode_video(np.asarray(first_frame)[None])[0]
    first_noise = None
    for index, window in enumerate(plan.windows()):
        start, stop = window
        clip_dense = _clip_depth(depth, normalized, window, config.normalization)
        tracking_depth = normalized.copy()
        tracking_depth[start:stop] = clip_dense
        tracks = track_keypoints(scene, points, window, tracking_depth)
        if settings.keypoint_mask_ratio > 0:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _MASK_STREAM, index])))
            tracks = mask_tracks(tracks, settings.keypoint_mask_ratio, rng)
        if settings.dense_blur_kernel:
            clip_dense = box_blur(clip_dense, settings.dense_blur_kernel)
        control = ControlPair(dense=clip_dense, sparse=render_point_map(tracks, stop - start, height, width))

        noise = noise_for_clip(noise_plan, index)
        if first_noise is None:
            first_noise = noise
        latent = sample_clip(
            model,
            noise,
            control,
            anchor,
            steps=settings.sampling_steps,
            fusion_scale=settings.fusion_scale,
            modality=settings.modality,
        )
        trace.anchors.append(anchor)
        trace.clips.append(latent)
        trace.noise_rmse_to_first.append(noise_rmse(noise, first_noise))
        anchor = latent[-1]
        logger.info(f"Generated clip {index + 1}/{plan.n_clips} (frames {start}-{stop - 1})")

    video = decode_latent(stitch(trace.clips, config.overlap))
    trace.boundary_ssim = boundary_consistency(video, plan)
    return video, trace


def boundary_control_discontinuity(
    depth: VideoTensor,
    plan: ClipPlan,
    mode: str,
    point: Tuple[int, int],
) -> List[float]:
    """
    Jump in a static point's dense-control value at each clip boundary.

    With overlapping clips the shared frame is read under the earlier and
    the later clip's normalization; without overlap the two frames adjacent
    to the boundary are compared.

    Args:
        depth: Raw depth video
        plan: Clip plan
        mode: "global" or "per_clip"
        point: (x, y) pixel of a static scene point

    Returns:
        One absolute difference per boundary
    """
    depth = validate_video(depth, "depth")
    if mode not in ("global", "per_clip"):
        raise InvalidInputError(f"unknown normalization mode: {mode}")
    x, y = point
    normalized = global_normalize(depth) if mode == "global" else None
    windows = list(plan.windows())
    jumps = []
    for index, (before, after) in enumerate(boundary_frame_pairs(plan)):
        earlier = _clip_depth(depth, normalized, windows[index], mode)
        later = _clip_depth(depth, normalized, windows[index + 1], mode)
        frame_earlier = before
        frame_later = before if plan.overlap > 0 else after
        value_earlier = earlier[frame_earlier - windows[index][0], 0, y, x]
        value_later = later[frame_later - windows[index + 1][0], 0, y, x]
        jumps.append(float(abs(value_later - value_earlier)))
    return jumps


def _check_degradation(degradation: Sequence[str]) -> None:
    unknown = [name for name in degradation if name not in DEGRADATION_VARIANTS]
    if unknown or not degradation:
        raise InvalidInputError(
            f"unknown degradation variants: {unknown}" if unknown else "no degradation variants given",
            details={"available": sorted(DEGRADATION_VARIANTS)},
        )


def ablation_cells(
    config: PipelineConfig, degradation: Sequence[str] = DEFAULT_DEGRADATION
) -> List[Tuple[str, PipelineConfig]]:
    """
    Named configurations of the normalization x noise x degradation matrix.

    "feature" and "data" isolate one degradation level by zeroing the
    other's probability.
    """
    _check_degradation(degradation)
    alpha = config.noise.perturb_alpha or DEFAULT_PERTURB_ALPHA
    cells = []
    for normalization in ("global", "per_clip"):
        for noise_mode in ("unified", "per_clip", "perturbed"):
            for variant in degradation:
                name = f"{normalization}-{noise_mode}-{variant}"
                cells.append(
                    (
                        name,
                        config.with_overrides(
                            normalization=normalization,
                            noise={"mode": noise_mode, "perturb_alpha": alpha if noise_mode == "perturbed" else 0.0},
                            degrade=DEGRADATION_VARIANTS[variant],
                        ),
                    )
                )
    return cells


def run_ablation(
    config: PipelineConfig,
    dataset: Sequence[TrainingPair],
    depth: VideoTensor,
    scene: SyntheticScene,
    seed: int,
    degradation: Sequence[str] = DEFAULT_DEGRADATION,
) -> List[MetricsReport]:
    """
    Train and generate for every ablation cell.

    One model is trained per degradation variant and shared by the cells
    that use it.

    Returns:
        One MetricsReport per cell, in matrix order
    """
    reference = render_scene(scene).frames[: depth.shape[0]]
    models: Dict[str, ControlDiT] = {}
    reports = []
    for name, cell_config in ablation_cells(config, degradation):
        variant = name.rsplit("-", 1)[1]
        if variant not in models:
            models[variant] = fit(cell_config, dataset, seed).model
        video, trace = generate_long(models[variant], depth, scene, cell_config, seed, first_frame=reference[0])
        plan = ClipPlan.from_dict(trace.plan)
        echo = {
            "cell": name,
            "normalization": cell_config.normalization,
            "noise_mode": cell_config.noise.mode,
            "degradation": cell_config.degrade.enabled,
            "degradation_variant": variant,
            "seed": seed,
            "config": cell_config.model_dump(mode="json"),
        }
        reports.append(
            build_metrics_report(
                video,
                reference,
                plan,
                trace,
                config_echo=echo,
                pixel_clips=[decode_latent(clip) for clip in trace.clips],
            )
        )
        logger.info(f"Ablation cell {name}: mean boundary SSIM {np.mean(trace.boundary_ssim):.4f}")
    return reports
