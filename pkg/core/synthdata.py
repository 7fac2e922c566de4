"""
LongVie Core - Synthetic Scenes

Procedural grayscale videos with analytic ground truth. Objects move along
straight lines, the background is a static depth/intensity gradient, and
every pixel's depth and motion are known exactly, so tracking and
normalization can be checked against closed-form answers.

Pixel (row, col) has its centre at (x = col, y = row).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.config import DatasetSpec
from core.control_signal import (
    ControlPair,
    VideoTensor,
    global_normalize,
    nearest_pixel,
    plan_clips,
    render_point_map,
    sample_keypoints,
    track_keypoints,
)
from core.errors import InvalidInputError

logger = logging.getLogger(__name__)


class BackgroundSpec(BaseModel):
    """Static background: depth and intensity vary linearly along one axis."""

    model_config = ConfigDict(extra="forbid")

    near_depth: float = Field(2.0, gt=0.0)
    far_depth: float = Field(8.0, gt=0.0)
    orientation: Literal["vertical", "horizontal"] = "vertical"
    near_intensity: float = Field(0.6, ge=0.0, le=1.0)
    far_intensity: float = Field(0.2, ge=0.0, le=1.0)


class SceneObject(BaseModel):
    """
    A moving shape.

    size is the radius of a circle or the half-width of a rectangle (whose
    half-height is size * aspect). position is the centre at frame 0.
    """

    model_config = ConfigDict(extra="forbid")

    shape: Literal["circle", "rectangle"] = "circle"
    size: float = Field(3.0, gt=0.0)
    aspect: float = Field(1.0, gt=0.0)
    position: Tuple[float, float] = (8.0, 8.0)
    velocity: Tuple[float, float] = (1.0, 0.0)
    depth: float = Field(1.0, gt=0.0)
    intensity: float = Field(1.0, ge=0.0, le=1.0)

    def position_at(self, t: int) -> Tuple[float, float]:
        return (self.position[0] + t * self.velocity[0], self.position[1] + t * self.velocity[1])

    def covers(self, t: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        cx, cy = self.position_at(t)
        if self.shape == "circle":
            return (xs - cx) ** 2 + (ys - cy) ** 2 <= self.size ** 2
        return (np.abs(xs - cx) <= self.size) & (np.abs(ys - cy) <= self.size * self.aspect)


class SyntheticScene(BaseModel):
    """A full scene description; see config/scenes.json for examples."""

    model_config = ConfigDict(extra="forbid")

    name: str = "scene"
    width: int = Field(32, ge=2)
    height: int = Field(32, ge=2)
    n_frames: int = Field(49, ge=1)
    background: BackgroundSpec = Field(default_factory=BackgroundSpec)
    objects: List[SceneObject] = Field(default_factory=list)
    # Added to every depth value of frame t as depth_drift * t.
    depth_drift: float = 0.0
    allow_subpixel: bool = False

    @model_validator(mode="after")
    def _check_velocities(self) -> "SyntheticScene":
        if not self.allow_subpixel:
            for index, obj in enumerate(self.objects):
                if any(float(v) != float(int(v)) for v in obj.velocity):
                    raise ValueError(
                        f"object {index} has sub-pixel velocity {obj.velocity}; set allow_subpixel"
                    )
        return self

    def pixel_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        ys, xs = np.mgrid[0:self.height, 0:self.width]
        return xs.astype(np.float64), ys.astype(np.float64)

    def background_depth(self) -> np.ndarray:
        return self._gradient(self.background.near_depth, self.background.far_depth)

    def background_intensity(self) -> np.ndarray:
        return self._gradient(self.background.near_intensity, self.background.far_intensity)

    def _gradient(self, start: float, stop: float) -> np.ndarray:
        xs, ys = self.pixel_grid()
        if self.background.orientation == "vertical":
            ramp = ys / max(self.height - 1, 1)
        else:
            ramp = xs / max(self.width - 1, 1)
        return start + (stop - start) * ramp

    def motion_field(self) -> "MotionField":
        return MotionField(self)


class MotionField:
    """Exact per-pixel ownership and motion of a scene."""

    def __init__(self, scene: SyntheticScene):
        self.scene = scene
        self._owners = {}

    def owner_map(self, t: int) -> np.ndarray:
        """[H, W] object index visible at each pixel of frame t, -1 for background."""
        if t not in self._owners:
            scene = self.scene
            xs, ys = scene.pixel_grid()
            depth = scene.background_depth()
            owners = np.full((scene.height, scene.width), -1, dtype=int)
            for index in _paint_order(scene.objects):
                obj = scene.objects[index]
                visible = obj.covers(t, xs, ys) & (obj.depth < depth)
                depth = np.where(visible, obj.depth, depth)
                owners[visible] = index
            self._owners[t] = owners
        return self._owners[t]

    def owner(self, t: int, x: float, y: float) -> Optional[int]:
        """Object under the pixel nearest (x, y) at frame t, or None for background or outside."""
        col, row = nearest_pixel(x), nearest_pixel(y)
        if not (0 <= row < self.scene.height and 0 <= col < self.scene.width):
            return None
        index = int(self.owner_map(t)[row, col])
        return None if index < 0 else index

    def velocity(self, owner: Optional[int]) -> Tuple[float, float]:
        if owner is None:
            return 0.0, 0.0
        vx, vy = self.scene.objects[owner].velocity
        return float(vx), float(vy)

    def displacement(self, t: int, x: float, y: float) -> Tuple[float, float]:
        """Per-frame displacement of the scene point under (x, y) at frame t."""
        return self.velocity(self.owner(t, x, y))

    def object_position(self, index: int, t: int) -> Tuple[float, float]:
        return self.scene.objects[index].position_at(t)


def _paint_order(objects: List[SceneObject]) -> List[int]:
    # Far objects first; among equal depths the first listed stays on top.
    return sorted(range(len(objects)), key=lambda i: (-objects[i].depth, -i))


@dataclass
class RenderedScene:
    frames: VideoTensor
    depth: VideoTensor
    motion_field: MotionField


def render_scene(scene: SyntheticScene) -> RenderedScene:
    """
    Render intensity frames and exact depth.

    Each pixel shows the nearest of the background and every covering
    object; depth also includes the drift term depth_drift * t.

    Returns:
        RenderedScene with [T, 1, H, W] frames and depth
    """
    if scene.width < 2 or scene.height < 2 or scene.n_frames < 1:
        raise InvalidInputError(f"degenerate scene dimensions {scene.n_frames}x{scene.height}x{scene.width}")
    xs, ys = scene.pixel_grid()
    background_depth = scene.background_depth()
    background_intensity = scene.background_intensity()
    order = _paint_order(scene.objects)

    frames = np.empty((scene.n_frames, 1, scene.height, scene.width), dtype=np.float64)
    depth = np.empty_like(frames)
    for t in range(scene.n_frames):
        frame_depth = background_depth.copy()
        frame = background_intensity.copy()
        for index in order:
            obj = scene.objects[index]
            visible = obj.covers(t, xs, ys) & (obj.depth < frame_depth)
            frame_depth[visible] = obj.depth
            frame[visible] = obj.intensity
        frames[t, 0] = frame
        depth[t, 0] = frame_depth + scene.depth_drift * t

    logger.debug(f"Rendered scene '{scene.name}': {scene.n_frames} frames, {len(scene.objects)} objects")
    return RenderedScene(frames=frames, depth=depth, motion_field=scene.motion_field())


def random_scene(
    rng: np.random.Generator,
    height: int,
    width: int,
    n_frames: int,
    max_objects: int = 3,
    max_speed: int = 1,
    max_drift: float = 0.0,
    name: str = "scene",
) -> SyntheticScene:
    """Seeded random scene; objects always sit in front of the background."""
    background = BackgroundSpec()
    n_objects = int(rng.integers(0, max_objects + 1))
    objects = []
    for _ in range(n_objects):
        shape = "circle" if rng.random() < 0.5 else "rectangle"
        size = float(rng.uniform(1.5, max(2.0, min(height, width) / 4)))
        position = (float(rng.uniform(0, width - 1)), float(rng.uniform(0, height - 1)))
        velocity = (
            float(rng.integers(-max_speed, max_speed + 1)),
            float(rng.integers(-max_speed, max_speed + 1)),
        )
        objects.append(
            SceneObject(
                shape=shape,
                size=size,
                aspect=float(rng.uniform(0.5, 1.5)),
                position=position,
                velocity=velocity,
                depth=float(rng.uniform(0.5, background.near_depth * 0.95)),
                intensity=float(rng.uniform(0.7, 1.0)),
            )
        )
    drift = float(rng.uniform(0.0, max_drift)) if max_drift > 0 else 0.0
    return SyntheticScene(
        name=name,
        width=width,
        height=height,
        n_frames=n_frames,
        background=background,
        objects=objects,
        depth_drift=drift,
    )


@dataclass
class TrainingPair:
    """One training clip: ground-truth frames plus its aligned controls."""

    clip: VideoTensor
    control: ControlPair
    scene_name: str = ""
    window: Tuple[int, int] = (0, 0)
    metadata: dict = field(default_factory=dict)


def clip_pairs(scene: SyntheticScene, rendered: RenderedScene, clip_len: int, overlap: int, keypoints: int) -> List[TrainingPair]:
    """Split one rendered scene into aligned (clip, controls) pairs."""
    plan = plan_clips(scene.n_frames, clip_len, overlap)
    normalized = global_normalize(rendered.depth)
    points = sample_keypoints(scene.height, scene.width, keypoints)
    pairs = []
    for start, stop in plan.windows():
        tracks = track_keypoints(scene, points, (start, stop), normalized)
        sparse = render_point_map(tracks, stop - start, scene.height, scene.width)
        pairs.append(
            TrainingPair(
                clip=rendered.frames[start:stop],
                control=ControlPair(dense=normalized[start:stop], sparse=sparse),
                scene_name=scene.name,
                window=(start, stop),
            )
        )
    return pairs


def make_dataset(spec: DatasetSpec, seed: int) -> List[TrainingPair]:
    """
    Render a seeded corpus of random scenes into training pairs.

    Depth is normalized over each whole scene before it is cut into clips.
    """
    rng = np.random.default_rng(seed)
    pairs: List[TrainingPair] = []
    for index in range(spec.n_scenes):
        scene = random_scene(
            rng,
            height=spec.height,
            width=spec.width,
            n_frames=spec.frames_per_scene,
            max_objects=spec.max_objects,
            max_speed=spec.max_speed,
            max_drift=spec.max_drift,
            name=f"scene_{index:03d}",
        )
        pairs.extend(clip_pairs(scene, render_scene(scene), spec.clip_len, spec.overlap, spec.keypoints))
    logger.info(f"Built dataset: {len(pairs)} pairs from {spec.n_scenes} scenes (seed {seed})")
    return pairs
