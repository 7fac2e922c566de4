"""
Local Dataset Store

A training corpus on disk: three LVTF files per pair (clip, dense control,
sparse control) plus manifest.json listing them with their scene and window.
"""

import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

from core.control_signal import ControlPair
from core.errors import FormatError
from core.interfaces import IDatasetStore
from core.synthdata import TrainingPair
from adapters.local.lvtf_store import LocalTensorStore

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


class LocalDatasetStore(IDatasetStore):

    def __init__(self, tensors: Optional[LocalTensorStore] = None):
        self.tensors = tensors or LocalTensorStore()

    def save(self, directory: str, pairs: Sequence[TrainingPair], metadata: Dict[str, Any]) -> None:
        os.makedirs(directory, exist_ok=True)
        entries = []
        for index, pair in enumerate(pairs):
            files = {
                "clip": f"pair_{index:04d}_clip.lvtf",
                "dense": f"pair_{index:04d}_dense.lvtf",
                "sparse": f"pair_{index:04d}_sparse.lvtf",
            }
            self.tensors.write(os.path.join(directory, files["clip"]), pair.clip)
            self.tensors.write(os.path.join(directory, files["dense"]), pair.control.dense)
            self.tensors.write(os.path.join(directory, files["sparse"]), pair.control.sparse)
            entries.append({**files, "scene": pair.scene_name, "window": list(pair.window)})

        manifest = {"version": MANIFEST_VERSION, "metadata": metadata, "pairs": entries}
        with open(os.path.join(directory, MANIFEST_NAME), "w") as f:
            json.dump(manifest, f, sort_keys=True, indent=2)
        logger.info(f"✅ Saved {len(entries)} training pairs to {directory}")

    def load(self, directory: str) -> List[TrainingPair]:
        path = os.path.join(directory, MANIFEST_NAME)
        with open(path, "r") as f:
            try:
                manifest = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"manifest is not valid JSON: {e.msg}", offset=e.pos, details={"path": path}) from e

        pairs = []
        for entry in manifest.get("pairs", []):
            pairs.append(
                TrainingPair(
                    clip=self.tensors.read(os.path.join(directory, entry["clip"])).astype("float64"),
                    control=ControlPair(
                        dense=self.tensors.read(os.path.join(directory, entry["dense"])).astype("float64"),
                        sparse=self.tensors.read(os.path.join(directory, entry["sparse"])).astype("float64"),
                    ),
                    scene_name=entry.get("scene", ""),
                    window=tuple(entry.get("window", (0, 0))),
                )
            )
        logger.info(f"Loaded {len(pairs)} training pairs from {directory}")
        return pairs
