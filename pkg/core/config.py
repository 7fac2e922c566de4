"""
LongVie Core - Configuration Models

Pydantic models for every configuration object. Defaults are the
full-scale settings where one exists (49-frame clips, 1-frame overlap,
15% feature-level and 10% data-level degradation, n = 5 scales,
scale range [0.05, 1]); the remaining defaults are desk-scale choices.
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigurationError


class ModelConfig(BaseModel):
    """Shape and training split of the toy Multi-Modal Control DiT."""

    model_config = ConfigDict(extra="forbid")

    token_dim: int = Field(32, ge=2)
    n_base_blocks: int = Field(4, ge=1)
    n_control_blocks: int = Field(2, ge=1)
    # [T_lat, C_lat, H_lat, W_lat]
    latent_shape: Tuple[int, int, int, int] = (49, 1, 16, 16)
    patch: int = Field(4, ge=1)
    n_heads: int = Field(4, ge=1)
    timesteps: int = Field(64, ge=2)
    mlp_ratio: int = Field(4, ge=1)
    fusion_variant: Literal["unified", "separate"] = "unified"
    init_std: float = Field(0.02, gt=0)
    dtype: Literal["float32", "float64"] = "float64"
    # Groups control training may update besides branches and fusion.
    # The base blocks are always frozen.
    train_latent_embed: bool = False
    train_first_frame_embed: bool = False
    train_head: bool = False

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ModelConfig":
        # Raised as ConfigurationError; pydantic only wraps ValueError.
        check_model_config(self)
        return self

    @property
    def tokens_per_frame(self) -> int:
        _, _, h, w = self.latent_shape
        return (h // self.patch) * (w // self.patch)


def model_config_problems(config: ModelConfig) -> List[str]:
    """List every violated ModelConfig invariant (empty when valid)."""
    problems = []
    d, heads = config.token_dim, config.n_heads
    if d % heads != 0:
        problems.append(f"token_dim {d} is not divisible by n_heads {heads}")
    if d % 2 != 0:
        problems.append(f"token_dim {d} must be even for the half-copy")
    elif (d // 2) % heads != 0:
        problems.append(f"half width {d // 2} is not divisible by n_heads {heads}")
    if config.n_control_blocks < 1:
        problems.append("n_control_blocks must be >= 1")
    if config.n_control_blocks > config.n_base_blocks:
        problems.append(
            f"n_control_blocks {config.n_control_blocks} exceeds n_base_blocks {config.n_base_blocks}"
        )
    if any(dim < 1 for dim in config.latent_shape):
        problems.append(f"latent_shape {tuple(config.latent_shape)} has a dimension < 1")
    else:
        _, _, h, w = config.latent_shape
        if h % config.patch or w % config.patch:
            problems.append(f"latent {h}x{w} is not divisible by patch {config.patch}")
    return problems


def check_model_config(config: ModelConfig) -> None:
    """Raise ConfigurationError if the config breaks an invariant."""
    problems = model_config_problems(config)
    if problems:
        raise ConfigurationError("Invalid model configuration: " + "; ".join(problems))


class DegradeConfig(BaseModel):
    """Degradation-aware training settings."""

    model_config = ConfigDict(extra="forbid")

    enabled: bool = True
    feature_prob: float = Field(0.15, ge=0.0, le=1.0)
    data_prob: float = Field(0.10, ge=0.0, le=1.0)
    scale_range: Tuple[float, float] = (0.05, 1.0)
    n_scales: int = Field(5, ge=1)
    blur_kernels: Tuple[int, ...] = (3, 5, 7)
    warmup_steps: int = Field(0, ge=0)
    allow_co_occurrence: bool = True

    @model_validator(mode="after")
    def _check_ranges(self) -> "DegradeConfig":
        low, high = self.scale_range
        if not (0.0 < low <= high <= 1.0):
            raise ValueError(f"scale_range {self.scale_range} must lie in (0, 1] with low <= high")
        if not self.blur_kernels:
            raise ValueError("blur_kernels must not be empty")
        for kernel in self.blur_kernels:
            if kernel < 3 or kernel % 2 == 0:
                raise ValueError(f"blur kernel {kernel} must be odd and >= 3")
        return self


class NoisePlan(BaseModel):
    """Initialization-noise policy for autoregressive generation."""

    model_config = ConfigDict(extra="forbid")

    mode: Literal["unified", "per_clip", "perturbed"] = "unified"
    seed: int = Field(0, ge=0)
    perturb_alpha: float = Field(0.0, ge=0.0)
    shape: Tuple[int, int, int, int]

    @model_validator(mode="after")
    def _check_shape(self) -> "NoisePlan":
        if any(dim < 1 for dim in self.shape):
            raise ValueError(f"noise shape {tuple(self.shape)} has a dimension < 1")
        return self


class NoiseSettings(BaseModel):
    """The noise section of a pipeline file; the shape comes from the model."""

    model_config = ConfigDict(extra="forbid")

    mode: Literal["unified", "per_clip", "perturbed"] = "unified"
    seed: int = Field(0, ge=0)
    perturb_alpha: float = Field(0.0, ge=0.0)

    def plan_for(self, model: ModelConfig) -> NoisePlan:
        return NoisePlan(
            mode=self.mode,
            seed=self.seed,
            perturb_alpha=self.perturb_alpha,
            shape=model.latent_shape,
        )


class TrainSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(200, ge=0)
    base_steps: int = Field(0, ge=0)
    batch_size: int = Field(2, ge=1)
    learning_rate: float = Field(1e-3, ge=0.0)
    weight_decay: float = Field(0.01, ge=0.0)
    log_every: int = Field(50, ge=1)


class InferenceSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    sampling_steps: Optional[int] = Field(None, ge=1)
    fusion_scale: float = Field(1.0, gt=0.0, le=1.0)
    modality: Literal["both", "dense", "sparse"] = "both"
    keypoints_per_clip: int = Field(64, ge=1)
    keypoint_mask_ratio: float = Field(0.0, ge=0.0, lt=1.0)
    dense_blur_kernel: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_blur(self) -> "InferenceSettings":
        kernel = self.dense_blur_kernel
        if kernel and (kernel < 3 or kernel % 2 == 0):
            raise ValueError(f"dense_blur_kernel {kernel} must be 0 (off) or odd and >= 3")
        return self


class DatasetSettings(BaseModel):
    """The dataset section of a pipeline file."""

    model_config = ConfigDict(extra="forbid")

    n_scenes: int = Field(4, ge=1)
    frames_per_scene: int = Field(49, ge=2)
    max_objects: int = Field(3, ge=0)
    max_speed: int = Field(1, ge=0)
    max_drift: float = Field(0.0, ge=0.0)


class DatasetSpec(BaseModel):
    """Everything make_dataset needs to render a corpus."""

    model_config = ConfigDict(extra="forbid")

    n_scenes: int = Field(4, ge=1)
    frames_per_scene: int = Field(49, ge=2)
    height: int = Field(32, ge=2)
    width: int = Field(32, ge=2)
    clip_len: int = Field(49, ge=2)
    overlap: int = Field(1, ge=0)
    keypoints: int = Field(64, ge=1)
    max_objects: int = Field(3, ge=0)
    max_speed: int = Field(1, ge=0)
    max_drift: float = Field(0.0, ge=0.0)


class PipelineConfig(BaseModel):
    """Aggregate configuration of the end-to-end pipeline."""

    model_config = ConfigDict(extra="forbid")

    clip_len: int = Field(49, ge=2)
    overlap: int = Field(1, ge=0)
    normalization: Literal["global", "per_clip"] = "global"
    noise: NoiseSettings = Field(default_factory=NoiseSettings)
    degrade: DegradeConfig = Field(default_factory=DegradeConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainSettings = Field(default_factory=TrainSettings)
    inference: InferenceSettings = Field(default_factory=InferenceSettings)
    dataset: DatasetSettings = Field(default_factory=DatasetSettings)

    @model_validator(mode="after")
    def _check_consistency(self) -> "PipelineConfig":
        if self.overlap >= self.clip_len:
            raise ValueError(f"overlap {self.overlap} must be smaller than clip_len {self.clip_len}")
        if self.model.latent_shape[0] != self.clip_len:
            raise ValueError(
                f"model latent frames {self.model.latent_shape[0]} must equal clip_len {self.clip_len}"
            )
        return self

    @property
    def frame_size(self) -> Tuple[int, int]:
        """Pixel (height, width); the toy encoder halves each side."""
        _, _, h, w = self.model.latent_shape
        return 2 * h, 2 * w

    @property
    def noise_plan(self) -> NoisePlan:
        return self.noise.plan_for(self.model)

    def dataset_spec(self) -> DatasetSpec:
        height, width = self.frame_size
        return DatasetSpec(
            n_scenes=self.dataset.n_scenes,
            frames_per_scene=self.dataset.frames_per_scene,
            height=height,
            width=width,
            clip_len=self.clip_len,
            overlap=self.overlap,
            keypoints=self.inference.keypoints_per_clip,
            max_objects=self.dataset.max_objects,
            max_speed=self.dataset.max_speed,
            max_drift=self.dataset.max_drift,
        )

    def with_overrides(self, **sections) -> "PipelineConfig":
        """Return a copy with top-level fields or whole sections replaced."""
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, BaseModel):
                value = value.model_dump()
            if isinstance(value, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return validate_pipeline_config(data)


def validate_pipeline_config(data: dict) -> PipelineConfig:
    """Build a PipelineConfig, converting validation failures to ConfigurationError."""
    try:
        return PipelineConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid pipeline configuration: {e}") from e


def validate_model_config(data: dict) -> ModelConfig:
    """Build a ModelConfig (e.g. from a checkpoint header), raising ConfigurationError."""
    try:
        return ModelConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid model configuration: {e}") from e
