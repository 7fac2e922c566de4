"""
Serializable run records: the generation trace and the metrics report.

Both carry to_dict/from_dict; the report also renders canonical JSON and
flat CSV rows. No record holds a timestamp, so equal runs give equal bytes.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass
class GenerationTrace:
    """What generate_long did, clip by clip."""

    clips: List[np.ndarray] = field(default_factory=list)
    anchors: List[np.ndarray] = field(default_factory=list)
    noise_rmse_to_first: List[float] = field(default_factory=list)
    boundary_ssim: List[float] = field(default_factory=list)
    plan: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Summary for JSON output; clip and anchor tensors are reduced to shapes."""
        return {
            "n_clips": len(self.clips),
            "clip_shapes": [list(clip.shape) for clip in self.clips],
            "anchor_shapes": [list(anchor.shape) for anchor in self.anchors],
            "noise_rmse_to_first": [float(v) for v in self.noise_rmse_to_first],
            "boundary_ssim": [float(v) for v in self.boundary_ssim],
            "plan": self.plan,
        }


@dataclass
class ClipRecord:
    clip_index: int
    mean_ssim_to_reference: float
    noise_rmse_to_first: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "clip_index": self.clip_index,
            "mean_ssim_to_reference": float(self.mean_ssim_to_reference),
            "noise_rmse_to_first": float(self.noise_rmse_to_first),
        }


@dataclass
class BoundaryRecord:
    boundary_index: int
    ssim_across_boundary: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "boundary_index": self.boundary_index,
            "ssim_across_boundary": float(self.ssim_across_boundary),
        }


CSV_COLUMNS = ["kind", "index", "mean_ssim_to_reference", "noise_rmse_to_first", "ssim_across_boundary"]


@dataclass
class MetricsReport:
    """
    Per-clip, per-boundary and whole-video metrics of one generation.

    flicker is a proxy for temporal flickering (mean absolute frame
    difference), not the VBench metric.
    """

    per_clip: List[ClipRecord] = field(default_factory=list)
    per_boundary: List[BoundaryRecord] = field(default_factory=list)
    global_metrics: Dict[str, float] = field(default_factory=dict)
    config_echo: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_clip": [record.to_dict() for record in self.per_clip],
            "per_boundary": [record.to_dict() for record in self.per_boundary],
            "global": {key: float(value) for key, value in self.global_metrics.items()},
            "config_echo": self.config_echo,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricsReport":
        return cls(
            per_clip=[ClipRecord(**record) for record in data.get("per_clip", [])],
            per_boundary=[BoundaryRecord(**record) for record in data.get("per_boundary", [])],
            global_metrics=dict(data.get("global", {})),
            config_echo=data.get("config_echo", {}),
        )

    def to_json(self) -> str:
        """Canonical JSON: sorted keys, two-space indent, trailing newline."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv_rows(self) -> List[List[Any]]:
        """One row per clip and per boundary, after a CSV_COLUMNS header."""
        rows: List[List[Any]] = [list(CSV_COLUMNS)]
        for record in self.per_clip:
            rows.append(["clip", record.clip_index, record.mean_ssim_to_reference, record.noise_rmse_to_first, ""])
        for record in self.per_boundary:
            rows.append(["boundary", record.boundary_index, "", "", record.ssim_across_boundary])
        return rows

    @property
    def cell(self) -> str:
        """Ablation cell name, when the report belongs to one."""
        return str(self.config_echo.get("cell", ""))
