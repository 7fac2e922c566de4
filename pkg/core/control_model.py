"""
LongVie Core - Multi-Modal Control DiT

A toy diffusion transformer with ControlNet-style conditioning:

- frozen base transformer blocks (the generative backbone)
- trainable half-width dense and sparse control branches, initialized by
  splitting the first n_control_blocks base blocks into two interleaved
  halves (even feature indices -> dense, odd -> sparse)
- zero-initialized fusion layers injecting the branch features into the
  base stream: z^l = F^l(z^{l-1}) + phi^l(s * F_D^l(c_D) + F_P^l(c_P))

Latents are the pixel video average-pooled 2x2 (an identity-style VAE), so
every property can be checked in pixel space.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from core.config import ModelConfig, check_model_config
from core.control_signal import ControlPair
from core.errors import InvalidInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, torch.Tensor]

_DTYPES = {"float32": torch.float32, "float64": torch.float64}

BASE_GROUPS = ("latent_embed", "time_embed", "first_frame_embed", "base_blocks", "final_norm", "head")
CONTROL_GROUPS = ("dense_embed", "sparse_embed", "dense_branch", "sparse_branch", "fusion", "fusion_sparse")

MODALITIES = ("both", "dense", "sparse")


# ============================================================================
# Diffusion schedule
# ============================================================================

@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step noise rates and their cumulative products."""

    betas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def timesteps(self) -> int:
        return len(self.betas)


def linear_schedule(timesteps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """
    Linear-beta DDPM schedule rescaled to `timesteps` steps.

    The 1000-step endpoints are multiplied by 1000 / timesteps so a short
    schedule still ends close to pure noise; the largest beta is capped at 0.5.
    """
    if timesteps < 2:
        raise InvalidInputError(f"timesteps must be >= 2, got {timesteps}")
    scale = 1000.0 / timesteps
    end = min(beta_end * scale, 0.5)
    start = min(beta_start * scale, end)
    betas = np.linspace(start, end, timesteps, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    return DiffusionSchedule(betas=betas, alpha_bars=alpha_bars)


def add_noise(x0: ArrayLike, t: int, eps: ArrayLike, schedule: DiffusionSchedule) -> ArrayLike:
    """Forward process x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps."""
    if not 0 <= int(t) < schedule.timesteps:
        raise InvalidInputError(f"step {t} is outside [0, {schedule.timesteps})")
    if tuple(x0.shape) != tuple(eps.shape):
        raise InvalidInputError(f"x0 {tuple(x0.shape)} and eps {tuple(eps.shape)} differ in shape")
    alpha_bar = float(schedule.alpha_bars[int(t)])
    return math.sqrt(alpha_bar) * x0 + math.sqrt(1.0 - alpha_bar) * eps


# ============================================================================
# Toy encoder
# ============================================================================

def encode_video(frames: np.ndarray) -> np.ndarray:
    """Pixel video [T, C, H, W] -> latent [T, C, H/2, W/2] by 2x2 averaging."""
    frames = np.asarray(frames, dtype=np.float64)
    t, c, h, w = frames.shape
    if h % 2 or w % 2:
        raise InvalidInputError(f"frame size {h}x{w} must be even")
    return frames.reshape(t, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def decode_latent(latent: np.ndarray) -> np.ndarray:
    """Latent [..., H, W] -> pixels [..., 2H, 2W] by nearest upsampling, clamped to [0, 1]."""
    latent = np.asarray(latent, dtype=np.float64)
    pixels = np.repeat(np.repeat(latent, 2, axis=-2), 2, axis=-1)
    return np.clip(pixels, 0.0, 1.0)


# ============================================================================
# Building blocks
# ============================================================================

def sinusoidal_embedding(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos embedding of scalar positions, [N] -> [N, dim]."""
    half = dim // 2
    positions = positions.to(torch.float64)
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / max(half, 1))
    args = positions[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros(len(positions), 1, dtype=torch.float64)], dim=1)
    return emb


class DiTBlock(nn.Module):
    """Pre-LayerNorm transformer block: multi-head self-attention + GELU MLP."""

    def __init__(self, dim: int, n_heads: int, mlp_ratio: int, dtype: torch.dtype):
        super().__init__()
        self.dim = dim
        self.n_heads = n_heads
        self.mlp_ratio = mlp_ratio
        self.norm1 = nn.LayerNorm(dim, eps=1e-6, dtype=dtype)
        self.q = nn.Linear(dim, dim, dtype=dtype)
        self.k = nn.Linear(dim, dim, dtype=dtype)
        self.v = nn.Linear(dim, dim, dtype=dtype)
        self.proj = nn.Linear(dim, dim, dtype=dtype)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6, dtype=dtype)
        self.fc1 = nn.Linear(dim, mlp_ratio * dim, dtype=dtype)
        self.fc2 = nn.Linear(mlp_ratio * dim, dim, dtype=dtype)

    def _heads(self, x: torch.Tensor) -> torch.Tensor:
        batch, tokens, _ = x.shape
        return x.view(batch, tokens, self.n_heads, self.dim // self.n_heads).transpose(1, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, tokens, _ = x.shape
        h = self.norm1(x)
        q, k, v = self._heads(self.q(h)), self._heads(self.k(h)), self._heads(self.v(h))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.dim // self.n_heads)
        attended = (torch.softmax(scores, dim=-1) @ v).transpose(1, 2).reshape(batch, tokens, self.dim)
        x = x + self.proj(attended)
        return x + self.fc2(F.gelu(self.fc1(self.norm2(x))))


def interleave_split(weight: torch.Tensor, dim: int) -> Tuple[torch.Tensor, torch.Tensor]:
    """Split along `dim` by index parity: (even indices, odd indices)."""
    size = weight.shape[dim]
    even = torch.arange(0, size, 2)
    odd = torch.arange(1, size, 2)
    return weight.index_select(dim, even), weight.index_select(dim, odd)


def interleave_merge(even: torch.Tensor, odd: torch.Tensor, dim: int) -> torch.Tensor:
    """Inverse of interleave_split."""
    size = even.shape[dim] + odd.shape[dim]
    shape = list(even.shape)
    shape[dim] = size
    merged = torch.empty(shape, dtype=even.dtype)
    merged.index_copy_(dim, torch.arange(0, size, 2), even)
    merged.index_copy_(dim, torch.arange(1, size, 2), odd)
    return merged


def half_copy_block(block: DiTBlock, parity: int) -> DiTBlock:
    """
    Build a half-width copy of a block from one parity of its features.

    Every weight matrix keeps the output features of the given parity, then
    the input features of the same parity (the features produced by the
    preceding half-width layer). Vectors keep the parity half.
    """
    half = DiTBlock(block.dim // 2, block.n_heads, block.mlp_ratio, block.q.weight.dtype)
    with torch.no_grad():
        for name, source in block.named_parameters():
            piece = interleave_split(source, 0)[parity]
            if source.ndim == 2:
                piece = interleave_split(piece, 1)[parity]
            half.get_parameter(name).copy_(piece)
    return half


def init_control_branches(base_blocks: nn.ModuleList, config: ModelConfig) -> Tuple[nn.ModuleList, nn.ModuleList]:
    """Half-copy the first n_control_blocks base blocks into dense (even) and sparse (odd) branches."""
    if config.token_dim % 2:
        raise InvalidInputError(f"token_dim {config.token_dim} must be even for the half-copy")
    dense = nn.ModuleList(half_copy_block(base_blocks[l], 0) for l in range(config.n_control_blocks))
    sparse = nn.ModuleList(half_copy_block(base_blocks[l], 1) for l in range(config.n_control_blocks))
    return dense, sparse


# ============================================================================
# The model
# ============================================================================

class ControlDiT(nn.Module):
    """Frozen DiT backbone with dense/sparse control branches and zero-linear fusion."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        check_model_config(config)
        self.config = config
        dtype = _DTYPES[config.dtype]
        self.dtype_ = dtype

        t_lat, c_lat, h_lat, w_lat = config.latent_shape
        d, p = config.token_dim, config.patch
        half = d // 2
        patch_dim = c_lat * p * p
        self.n_tokens = t_lat * config.tokens_per_frame

        self.latent_embed = nn.Linear(patch_dim, d, dtype=dtype)
        self.time_embed = nn.Linear(d, d, dtype=dtype)
        self.first_frame_embed = nn.Linear(patch_dim, d, dtype=dtype)
        self.base_blocks = nn.ModuleList(
            DiTBlock(d, config.n_heads, config.mlp_ratio, dtype) for _ in range(config.n_base_blocks)
        )
        self.final_norm = nn.LayerNorm(d, eps=1e-6, dtype=dtype)
        self.head = nn.Linear(d, patch_dim, dtype=dtype)

        # Control tokenizers read single-channel control videos.
        self.dense_embed = nn.Linear(p * p, half, dtype=dtype)
        self.sparse_embed = nn.Linear(p * p, half, dtype=dtype)
        self.dense_branch, self.sparse_branch = init_control_branches(self.base_blocks, config)
        self.fusion = nn.ModuleList(nn.Linear(half, d, dtype=dtype) for _ in range(config.n_control_blocks))
        if config.fusion_variant == "separate":
            self.fusion_sparse = nn.ModuleList(
                nn.Linear(half, d, dtype=dtype) for _ in range(config.n_control_blocks)
            )
        else:
            self.fusion_sparse = None

        positions = sinusoidal_embedding(torch.arange(self.n_tokens), d).to(dtype)
        self.register_buffer("positions", positions, persistent=False)
        self.schedule = linear_schedule(config.timesteps)
        self.zero_fusion()

    # --- parameter groups ---

    def _base_group_names(self) -> Tuple[str, ...]:
        names = ["time_embed", "base_blocks", "final_norm"]
        if not self.config.train_head:
            names.append("head")
        if not self.config.train_latent_embed:
            names.append("latent_embed")
        if not self.config.train_first_frame_embed:
            names.append("first_frame_embed")
        return tuple(names)

    def frozen_named_parameters(self) -> Iterator[Tuple[str, nn.Parameter]]:
        """Parameters that control training never updates."""
        groups = self._base_group_names()
        for name, param in self.named_parameters():
            if name.split(".")[0] in groups:
                yield name, param

    def control_named_parameters(self) -> Iterator[Tuple[str, nn.Parameter]]:
        """Parameters updated by control training."""
        groups = self._base_group_names()
        for name, param in self.named_parameters():
            if name.split(".")[0] not in groups:
                yield name, param

    def backbone_named_parameters(self) -> Iterator[Tuple[str, nn.Parameter]]:
        for name, param in self.named_parameters():
            if name.split(".")[0] in BASE_GROUPS:
                yield name, param

    def set_stage(self, stage: str) -> List[nn.Parameter]:
        """
        Mark the parameters of a training stage as trainable.

        Args:
            stage: "control" (branches, fusion, control tokenizers) or
                "base" (the backbone, trained without control)

        Returns:
            The trainable parameters
        """
        if stage == "control":
            trainable = {name for name, _ in self.control_named_parameters()}
        elif stage == "base":
            trainable = {name for name, _ in self.backbone_named_parameters()}
        else:
            raise InvalidInputError(f"unknown training stage: {stage}")
        params = []
        for name, param in self.named_parameters():
            param.requires_grad_(name in trainable)
            if name in trainable:
                params.append(param)
        return params

    def zero_fusion(self) -> None:
        with torch.no_grad():
            for layers in (self.fusion, self.fusion_sparse):
                if layers is None:
                    continue
                for layer in layers:
                    layer.weight.zero_()
                    layer.bias.zero_()

    # --- tokenization ---

    def patchify(self, x: torch.Tensor) -> torch.Tensor:
        """[B, T, C, H, W] -> [B, T * H/p * W/p, C * p * p]."""
        b, t, c, h, w = x.shape
        p = self.config.patch
        x = x.reshape(b, t, c, h // p, p, w // p, p)
        x = x.permute(0, 1, 3, 5, 2, 4, 6)
        return x.reshape(b, t * (h // p) * (w // p), c * p * p)

    def unpatchify(self, tokens: torch.Tensor) -> torch.Tensor:
        t, c, h, w = self.config.latent_shape
        p = self.config.patch
        b = tokens.shape[0]
        x = tokens.reshape(b, t, h // p, w // p, c, p, p)
        x = x.permute(0, 1, 4, 2, 5, 3, 6)
        return x.reshape(b, t, c, h, w)

    def time_embedding(self, t: torch.Tensor) -> torch.Tensor:
        return self.time_embed(sinusoidal_embedding(t, self.config.token_dim).to(self.dtype_))

    def _control_stream(self, video: torch.Tensor, embed: nn.Linear, parity: int, temb: torch.Tensor) -> torch.Tensor:
        b, t, c, h, w = video.shape
        pooled = F.avg_pool2d(video.reshape(b * t, c, h, w), kernel_size=2)
        pooled = pooled.reshape(b, t, c, h // 2, w // 2)
        return embed(self.patchify(pooled)) + self.positions[None, :, parity::2] + temb[:, None, parity::2]

    def control_streams(self, control: torch.Tensor, temb: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Initial control activations c_D^0 and c_P^0 from [B, 2, T, 1, H, W] controls."""
        dense = self._control_stream(control[:, 0], self.dense_embed, 0, temb)
        sparse = self._control_stream(control[:, 1], self.sparse_embed, 1, temb)
        return dense, sparse

    # --- control injection ---

    def fuse(
        self,
        index: int,
        dense_features: torch.Tensor,
        sparse_features: torch.Tensor,
        fusion_scale: float,
        modality: str = "both",
    ) -> torch.Tensor:
        """phi^l applied to the scaled dense and the sparse branch outputs."""
        use_dense = modality in ("both", "dense")
        use_sparse = modality in ("both", "sparse")
        dense_term = fusion_scale * dense_features if use_dense else torch.zeros_like(dense_features)
        sparse_term = sparse_features if use_sparse else torch.zeros_like(sparse_features)
        if self.fusion_sparse is None:
            return self.fusion[index](dense_term + sparse_term)
        return self.fusion[index](dense_term) + self.fusion_sparse[index](sparse_term)

    def forward(
        self,
        x_t: torch.Tensor,
        t: torch.Tensor,
        control: Optional[torch.Tensor] = None,
        anchor: Optional[torch.Tensor] = None,
        fusion_scale: float = 1.0,
        modality: str = "both",
    ) -> torch.Tensor:
        """
        Predict the noise in a batch of noisy latents.

        Args:
            x_t: [B, T, C, H, W] noisy latents
            t: [B] integer steps
            control: [B, 2, T, 1, 2H, 2W] dense and sparse control videos, or
                None for the control-free backbone pass
            anchor: [B, C, H, W] latent anchor frame, or None
            fusion_scale: Factor on the dense branch output
            modality: Which control streams to inject

        Returns:
            [B, T, C, H, W] noise prediction
        """
        temb = self.time_embedding(t)
        tokens = self.latent_embed(self.patchify(x_t)) + self.positions[None] + temb[:, None, :]
        if anchor is not None:
            per_frame = self.config.tokens_per_frame
            anchor_tokens = self.first_frame_embed(self.patchify(anchor[:, None]))
            tokens = torch.cat([tokens[:, :per_frame] + anchor_tokens, tokens[:, per_frame:]], dim=1)

        streams = self.control_streams(control, temb) if control is not None else None
        z = tokens
        for index, block in enumerate(self.base_blocks):
            h = block(z)
            if streams is not None and index < self.config.n_control_blocks:
                dense_features = self.dense_branch[index](streams[0])
                sparse_features = self.sparse_branch[index](streams[1])
                h = h + self.fuse(index, dense_features, sparse_features, fusion_scale, modality)
                streams = (dense_features, sparse_features)
            z = h
        return self.unpatchify(self.head(self.final_norm(z)))

    # --- weights ---

    def state_arrays(self) -> dict:
        """Parameters as named numpy arrays, in registration order."""
        return {name: param.detach().cpu().numpy().copy() for name, param in self.named_parameters()}

    def load_state_arrays(self, arrays: dict) -> None:
        params = dict(self.named_parameters())
        missing = set(params) - set(arrays)
        unexpected = set(arrays) - set(params)
        if missing or unexpected:
            raise InvalidInputError(
                "checkpoint does not match the model",
                details={"missing": sorted(missing), "unexpected": sorted(unexpected)},
            )
        with torch.no_grad():
            for name, param in params.items():
                value = torch.as_tensor(np.asarray(arrays[name]), dtype=param.dtype)
                if tuple(value.shape) != tuple(param.shape):
                    raise InvalidInputError(
                        f"weight {name} has shape {tuple(value.shape)}, expected {tuple(param.shape)}"
                    )
                param.copy_(value)


def init_model(config: ModelConfig, seed: int) -> ControlDiT:
    """
    Build a ControlDiT with seeded random base weights.

    Linear weights are drawn from N(0, init_std^2) with a numpy PCG64 stream,
    biases start at zero and LayerNorm gains at one. The control branches are
    then half-copied from the base blocks and every fusion layer is zeroed.
    """
    model = ControlDiT(config)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x1F])))
    with torch.no_grad():
        for name, param in model.named_parameters():
            if name.split(".")[0] in ("dense_branch", "sparse_branch"):
                continue
            leaf = name.rsplit(".", 1)[-1]
            if leaf == "bias":
                param.zero_()
            elif param.ndim == 1:
                param.fill_(1.0)
            else:
                values = rng.normal(0.0, config.init_std, size=tuple(param.shape))
                param.copy_(torch.as_tensor(values, dtype=param.dtype))
    attach_control_branches(model)
    model.set_stage("control")
    logger.info(
        f"Initialized ControlDiT: {config.n_base_blocks} base blocks, "
        f"{config.n_control_blocks} control blocks, width {config.token_dim}"
    )
    return model


def attach_control_branches(model: ControlDiT) -> ControlDiT:
    """Re-derive both branches from the current base blocks and zero the fusion layers."""
    model.dense_branch, model.sparse_branch = init_control_branches(model.base_blocks, model.config)
    model.zero_fusion()
    return model


# ============================================================================
# Functional entry points
# ============================================================================

def _tensor(value: ArrayLike, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(value, torch.Tensor):
        return value.to(dtype)
    return torch.as_tensor(np.asarray(value), dtype=dtype)


def _check_inputs(model: ControlDiT, x_t: torch.Tensor, control: Optional[ControlPair], anchor) -> None:
    config = model.config
    expected = tuple(config.latent_shape)
    if tuple(x_t.shape) != expected:
        raise InvalidInputError(f"latent shape {tuple(x_t.shape)} does not match {expected}")
    t_lat, c_lat, h_lat, w_lat = expected
    if control is not None:
        for name, video in (("dense", control.dense), ("sparse", control.sparse)):
            if video.shape != (t_lat, 1, 2 * h_lat, 2 * w_lat):
                raise InvalidInputError(
                    f"{name} control shape {video.shape} does not match {(t_lat, 1, 2 * h_lat, 2 * w_lat)}"
                )
    if anchor is not None and tuple(anchor.shape) != (c_lat, h_lat, w_lat):
        raise InvalidInputError(f"anchor shape {tuple(anchor.shape)} does not match {(c_lat, h_lat, w_lat)}")


def control_tensor(control: ControlPair, dtype: torch.dtype) -> torch.Tensor:
    """ControlPair -> [1, 2, T, 1, H, W] tensor."""
    return torch.as_tensor(np.stack([control.dense, control.sparse])[None], dtype=dtype)


def controlled_forward(
    model,
    x_t: ArrayLike,
    t: int,
    control: Optional[ControlPair],
    anchor_frame: Optional[ArrayLike],
    fusion_scale: float = 1.0,
    modality: str = "both",
) -> torch.Tensor:
    """
    Noise prediction for a single clip.

    Args:
        model: ControlDiT
        x_t: [T, C, H, W] noisy latent
        t: Diffusion step
        control: Dense and sparse control clip, or None for the backbone alone
        anchor_frame: [C, H, W] latent anchor frame, or None
        fusion_scale: Dense-branch factor in (0, 1]
        modality: "both", "dense" or "sparse"

    Returns:
        [T, C, H, W] predicted noise
    """
    if not 0.0 < fusion_scale <= 1.0:
        raise InvalidInputError(f"fusion_scale must be in (0, 1], got {fusion_scale}")
    if modality not in MODALITIES:
        raise InvalidInputError(f"unknown modality: {modality}")
    dtype = model.dtype_
    x = _tensor(x_t, dtype)
    anchor = _tensor(anchor_frame, dtype) if anchor_frame is not None else None
    _check_inputs(model, x, control, anchor)
    if not 0 <= int(t) < model.config.timesteps:
        raise InvalidInputError(f"step {t} is outside [0, {model.config.timesteps})")
    prediction = model(
        x[None],
        torch.tensor([int(t)]),
        control=control_tensor(control, dtype) if control is not None else None,
        anchor=anchor[None] if anchor is not None else None,
        fusion_scale=fusion_scale,
        modality=modality,
    )
    return prediction[0]


def base_forward(model: ControlDiT, x_t: ArrayLike, t: int, anchor_frame: Optional[ArrayLike] = None) -> torch.Tensor:
    """The control-free backbone pass."""
    return controlled_forward(model, x_t, t, None, anchor_frame)


def control_residual(
    model: ControlDiT,
    t: int,
    control: ControlPair,
    fusion_scale: float,
    block_index: int = 0,
) -> torch.Tensor:
    """
    The fused control term phi^l(s * F_D^l + F_P^l) at one control block.

    Control streams do not read the base stream, so the residual depends
    only on the step and the control clip. fusion_scale may be 0 here.
    """
    if not 0 <= block_index < model.config.n_control_blocks:
        raise InvalidInputError(f"block_index {block_index} is not a control block")
    if fusion_scale < 0:
        raise InvalidInputError(f"fusion_scale must be >= 0, got {fusion_scale}")
    dtype = model.dtype_
    temb = model.time_embedding(torch.tensor([int(t)]))
    dense, sparse = model.control_streams(control_tensor(control, dtype), temb)
    for index in range(block_index + 1):
        dense_features = model.dense_branch[index](dense)
        sparse_features = model.sparse_branch[index](sparse)
        if index == block_index:
            return model.fuse(index, dense_features, sparse_features, fusion_scale)[0]
        dense, sparse = dense_features, sparse_features


def diffusion_loss(
    model,
    x0: ArrayLike,
    control: Optional[ControlPair],
    anchor: Optional[ArrayLike],
    t: int,
    eps: ArrayLike,
    fusion_scale: float = 1.0,
) -> torch.Tensor:
    """Mean squared error between eps and the model's prediction at step t."""
    dtype = getattr(model, "dtype_", torch.float64)
    x0 = _tensor(x0, dtype)
    eps = _tensor(eps, dtype)
    x_t = add_noise(x0, t, eps, model.schedule)
    prediction = controlled_forward(model, x_t, t, control, anchor, fusion_scale)
    return F.mse_loss(prediction, eps)


def respaced_steps(schedule: DiffusionSchedule, steps: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Steps visited by the sampler and their respaced betas.

    With steps == timesteps every step is visited; otherwise an evenly
    spaced subsequence ending at the last step is used and the betas are
    recomputed from the cumulative products so the process stays consistent.
    """
    total = schedule.timesteps
    steps = total if steps is None else steps
    if not 1 <= steps <= total:
        raise InvalidInputError(f"sampling steps must be in [1, {total}], got {steps}")
    visited = np.unique(np.round(np.linspace(0, total - 1, steps)).astype(int))
    alpha_bars = schedule.alpha_bars[visited]
    previous = np.concatenate([[1.0], alpha_bars[:-1]])
    return visited, 1.0 - alpha_bars / previous


def sample_clip(
    model: ControlDiT,
    noise: np.ndarray,
    control: Optional[ControlPair],
    anchor_frame: Optional[np.ndarray],
    steps: Optional[int] = None,
    fusion_scale: float = 1.0,
    modality: str = "both",
) -> np.ndarray:
    """
    Denoise one clip from its initialization noise.

    Deterministic DDPM: every update takes the posterior mean and adds no
    sampling noise, so the result is a pure function of the weights, noise,
    control and anchor.
    """
    if tuple(noise.shape) != tuple(model.config.latent_shape):
        raise InvalidInputError(f"noise shape {tuple(noise.shape)} does not match {tuple(model.config.latent_shape)}")
    visited, betas = respaced_steps(model.schedule, steps)
    alpha_bars = model.schedule.alpha_bars[visited]
    x = _tensor(noise, model.dtype_)
    with torch.no_grad():
        for i in range(len(visited) - 1, -1, -1):
            eps = controlled_forward(model, x, int(visited[i]), control, anchor_frame, fusion_scale, modality)
            x = (x - (betas[i] / math.sqrt(1.0 - alpha_bars[i])) * eps) / math.sqrt(1.0 - betas[i])
    return x.cpu().numpy().astype(np.float64)


# ============================================================================
# Training
# ============================================================================

class ControlTrainer:
    """
    AdamW over one training stage's parameters.

    Single-writer: exactly one step may be in flight at a time.
    """

    def __init__(self, model: ControlDiT, learning_rate: float, weight_decay: float = 0.01, stage: str = "control"):
        self.model = model
        self.stage = stage
        self.params = model.set_stage(stage)
        self.optimizer = torch.optim.AdamW(self.params, lr=learning_rate, weight_decay=weight_decay)

    def step(self, loss: torch.Tensor, learning_rate: Optional[float] = None) -> float:
        if learning_rate is not None:
            for group in self.optimizer.param_groups:
                group["lr"] = learning_rate
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        self.optimizer.step()
        return float(loss.detach())


def backward_and_step(trainer: ControlTrainer, loss: torch.Tensor, learning_rate: float) -> ControlDiT:
    """Backpropagate a loss computed on trainer.model and apply one AdamW update."""
    trainer.step(loss, learning_rate)
    return trainer.model
