"""
Shared fixtures: a micro model and pipeline small enough to train and
sample in well under a second per step.

Micro scale: 8x8 frames (4x4 latents), 2x2 patches, 5-frame clips with a
1-frame overlap, 16 diffusion steps, token width 8 with 2 heads.
"""

import json

import numpy as np
import pytest

from core.config import (
    DatasetSettings,
    DegradeConfig,
    InferenceSettings,
    ModelConfig,
    PipelineConfig,
    TrainSettings,
)
from core.synthdata import SceneObject, SyntheticScene, make_dataset


def micro_model_config(**overrides) -> ModelConfig:
    values = dict(
        token_dim=8,
        n_base_blocks=2,
        n_control_blocks=1,
        latent_shape=(5, 1, 4, 4),
        patch=2,
        n_heads=2,
        timesteps=16,
        mlp_ratio=2,
    )
    values.update(overrides)
    return ModelConfig(**values)


def micro_pipeline_config(**overrides) -> PipelineConfig:
    values = dict(
        clip_len=5,
        overlap=1,
        model=micro_model_config(),
        degrade=DegradeConfig(n_scales=2, blur_kernels=(3,)),
        train=TrainSettings(steps=10, base_steps=0, batch_size=1, learning_rate=1e-2, log_every=5),
        inference=InferenceSettings(keypoints_per_clip=16),
        dataset=DatasetSettings(n_scenes=2, frames_per_scene=9, max_objects=2),
    )
    values.update(overrides)
    return PipelineConfig(**values)


def micro_scene(n_frames: int = 17, **overrides) -> SyntheticScene:
    values = dict(
        name="micro",
        width=8,
        height=8,
        n_frames=n_frames,
        objects=[SceneObject(shape="circle", size=1.5, position=(2.0, 4.0), velocity=(0.0, 0.0), depth=1.0)],
    )
    values.update(overrides)
    return SyntheticScene(**values)


@pytest.fixture
def model_config() -> ModelConfig:
    return micro_model_config()


@pytest.fixture
def pipeline_config() -> PipelineConfig:
    return micro_pipeline_config()


@pytest.fixture
def scene() -> SyntheticScene:
    return micro_scene()


@pytest.fixture
def dataset(pipeline_config):
    return make_dataset(pipeline_config.dataset_spec(), seed=3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def micro_files(tmp_path):
    """Micro pipeline and scene files for the command-line driver."""
    config_path = tmp_path / "pipeline.json"
    config_path.write_text(json.dumps(micro_pipeline_config().model_dump(mode="json")))
    scenes_path = tmp_path / "scenes.json"
    scenes_path.write_text(
        json.dumps({"scenes": [micro_scene().model_dump(mode="json")]})
    )
    return {"config": str(config_path), "scenes": str(scenes_path), "out": str(tmp_path / "out")}
