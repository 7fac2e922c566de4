"""
Local File-Based Configuration

Reads the sectioned pipeline configuration and the named scene list from
JSON files under config/.
"""

import json
import logging
import os
from typing import Dict, Optional

from pydantic import ValidationError

from core.config import PipelineConfig, validate_pipeline_config
from core.errors import ConfigurationError
from core.synthdata import SyntheticScene

logger = logging.getLogger(__name__)

DEFAULT_PIPELINE_FILE = "./config/pipeline.json"
DEFAULT_SCENES_FILE = "./config/scenes.json"


class LocalConfigLoader:
    """
    File-based configuration for the command-line driver.

    Reads from:
    - config/pipeline.json: sections clip_len, overlap, normalization,
      model, degrade, noise, train, inference, dataset
    - config/scenes.json: {"scenes": [SyntheticScene, ...]}
    """

    def __init__(self, pipeline_file: Optional[str] = None, scenes_file: str = DEFAULT_SCENES_FILE):
        """
        Initialize the loader.

        Args:
            pipeline_file: Explicit configuration path (must exist), or None
                for LONGVIE_CONFIG, then the default file, then built-in defaults
            scenes_file: Path to the scene list
        """
        self.explicit = pipeline_file is not None or bool(os.getenv("LONGVIE_CONFIG"))
        self.pipeline_file = pipeline_file or os.getenv("LONGVIE_CONFIG") or DEFAULT_PIPELINE_FILE
        self.scenes_file = scenes_file

    def _read_json(self, path: str) -> dict:
        try:
            with open(path, "r") as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path} is not valid JSON: {e.msg} (line {e.lineno})") from e

    def load_pipeline(self) -> PipelineConfig:
        if not os.path.exists(self.pipeline_file):
            if self.explicit:
                raise ConfigurationError(f"Configuration file not found: {self.pipeline_file}")
            logger.warning(f"Configuration file not found: {self.pipeline_file}")
            logger.info("Using built-in defaults.")
            return PipelineConfig()
        config = validate_pipeline_config(self._read_json(self.pipeline_file))
        logger.info(f"Loaded pipeline configuration from {self.pipeline_file}")
        return config

    def load_scenes(self) -> Dict[str, SyntheticScene]:
        if not os.path.exists(self.scenes_file):
            raise ConfigurationError(f"Scenes file not found: {self.scenes_file}")
        data = self._read_json(self.scenes_file)
        scenes = {}
        for index, item in enumerate(data.get("scenes", [])):
            try:
                scene = SyntheticScene.model_validate(item)
            except ValidationError as e:
                raise ConfigurationError(f"Invalid scene #{index} in {self.scenes_file}: {e}") from e
            scenes[scene.name] = scene
        logger.info(f"Loaded {len(scenes)} scenes from {self.scenes_file}")
        return scenes

    def find_scene(self, name: str) -> SyntheticScene:
        scenes = self.load_scenes()
        if name not in scenes:
            raise ConfigurationError(
                f"Unknown scene '{name}'", details={"available": sorted(scenes)}
            )
        return scenes[name]
