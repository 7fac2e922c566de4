"""
LongVie Core - Control Signals

Control-signal data model: percentile normalization of dense depth videos
(global or per clip), overlapping clip segmentation, keypoint sampling and
tracking, and rasterization of depth-colorized sparse point maps.

Videos are numpy arrays in time-major layout [T, C, H, W].
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, Iterator, List, Sequence, Tuple

import numpy as np

from core.errors import InvalidInputError, NonCoverableLengthError

if TYPE_CHECKING:
    from core.synthdata import SyntheticScene

logger = logging.getLogger(__name__)

VideoTensor = np.ndarray

LOW_PERCENTILE = 5
HIGH_PERCENTILE = 95


def validate_video(video: VideoTensor, name: str = "video") -> VideoTensor:
    """
    Check the VideoTensor invariants.

    Args:
        video: Array expected to be [T, C, H, W], non-empty and finite
        name: Label used in error messages

    Returns:
        The video as a float64 array

    Raises:
        InvalidInputError: on wrong rank, empty data or non-finite values
    """
    video = np.asarray(video, dtype=np.float64)
    if video.ndim != 4:
        raise InvalidInputError(f"{name} must be [T, C, H, W], got shape {video.shape}")
    if video.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(video)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return video


@dataclass(frozen=True)
class ClipPlan:
    """Overlapping clip layout covering a video exactly."""

    clip_len: int
    overlap: int
    starts: Tuple[int, ...]
    total_frames: int

    @property
    def n_clips(self) -> int:
        return len(self.starts)

    @property
    def stride(self) -> int:
        return self.clip_len - self.overlap

    def windows(self) -> Iterator[Tuple[int, int]]:
        """Yield (start, stop) frame ranges, one per clip."""
        for start in self.starts:
            yield start, start + self.clip_len

    def to_dict(self) -> Dict[str, Any]:
        return {
            "clip_len": self.clip_len,
            "overlap": self.overlap,
            "starts": list(self.starts),
            "total_frames": self.total_frames,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ClipPlan":
        return cls(
            clip_len=data["clip_len"],
            overlap=data["overlap"],
            starts=tuple(data["starts"]),
            total_frames=data["total_frames"],
        )


@dataclass
class ControlPair:
    """Dense depth clip plus its sparse point-map clip."""

    dense: VideoTensor
    sparse: VideoTensor

    def __post_init__(self):
        self.dense = validate_video(self.dense, "dense control")
        self.sparse = validate_video(self.sparse, "sparse control")
        d_shape, s_shape = self.dense.shape, self.sparse.shape
        if (d_shape[0], d_shape[2], d_shape[3]) != (s_shape[0], s_shape[2], s_shape[3]):
            raise InvalidInputError(
                f"dense {d_shape} and sparse {s_shape} controls must share T, H and W"
            )

    @property
    def frames(self) -> int:
        return self.dense.shape[0]


@dataclass
class KeypointTrack:
    """One tracked point: per-frame position, depth and visibility."""

    point_id: int
    # (t, x, y) with absolute frame index t and sub-pixel column/row
    positions: List[Tuple[int, float, float]] = field(default_factory=list)
    depth_values: List[float] = field(default_factory=list)
    in_view: List[bool] = field(default_factory=list)


def _nearest_rank(n: int, percent: int) -> int:
    """1-based nearest rank ceil(percent/100 * n), computed in integers."""
    return max(1, -(-percent * n // 100))


def percentile_bounds(video: VideoTensor) -> Tuple[float, float]:
    """Nearest-rank 5th and 95th percentiles of all values."""
    flat = np.sort(video, axis=None)
    n = flat.size
    low = flat[_nearest_rank(n, LOW_PERCENTILE) - 1]
    high = flat[_nearest_rank(n, HIGH_PERCENTILE) - 1]
    return float(low), float(high)


def global_normalize(video: VideoTensor) -> VideoTensor:
    """
    Normalize a video with percentiles taken over the whole sequence.

    Values are clamped to [p5, p95] and mapped linearly so p5 -> 0 and
    p95 -> 1. A degenerate range (p5 == p95) yields all zeros.

    Args:
        video: Finite, non-empty [T, C, H, W] video

    Returns:
        Normalized video with every value in [0, 1]
    """
    video = validate_video(video)
    low, high = percentile_bounds(video)
    if high == low:
        return np.zeros_like(video)
    return (np.clip(video, low, high) - low) / (high - low)


def per_clip_normalize(video: VideoTensor, plan: ClipPlan) -> VideoTensor:
    """
    Normalize every clip window independently.

    Overlap frames keep the value computed for the later clip.
    """
    video = validate_video(video)
    if video.shape[0] != plan.total_frames:
        raise InvalidInputError(
            f"plan covers {plan.total_frames} frames but video has {video.shape[0]}"
        )
    out = np.empty_like(video)
    for start, stop in plan.windows():
        out[start:stop] = global_normalize(video[start:stop])
    return out


def plan_clips(total_frames: int, clip_len: int, overlap: int) -> ClipPlan:
    """
    Segment a video into overlapping fixed-length clips.

    Args:
        total_frames: Frames in the full video
        clip_len: Frames per clip (>= 2)
        overlap: Frames shared by consecutive clips (0 <= overlap < clip_len)

    Returns:
        The unique ClipPlan that covers exactly total_frames

    Raises:
        InvalidInputError: on invalid arguments
        NonCoverableLengthError: if the clips cannot tile the video exactly
    """
    if clip_len < 2:
        raise InvalidInputError(f"clip_len must be >= 2, got {clip_len}")
    if not 0 <= overlap < clip_len:
        raise InvalidInputError(f"overlap must be in [0, {clip_len}), got {overlap}")
    if total_frames < clip_len:
        raise InvalidInputError(f"total_frames {total_frames} is shorter than one clip ({clip_len})")
    stride = clip_len - overlap
    if (total_frames - clip_len) % stride != 0:
        raise NonCoverableLengthError(
            f"{total_frames} frames cannot be covered by {clip_len}-frame clips "
            f"with {overlap}-frame overlap",
            details={"total_frames": total_frames, "clip_len": clip_len, "overlap": overlap},
        )
    starts = tuple(range(0, total_frames - clip_len + 1, stride))
    return ClipPlan(clip_len=clip_len, overlap=overlap, starts=starts, total_frames=total_frames)


def grid_shape(height: int, width: int, k: int) -> Tuple[int, int]:
    """Factor k into (rows, cols) matching the frame aspect; ties favour more rows."""
    target = height / width
    best = None
    for rows in range(1, k + 1):
        if k % rows:
            continue
        cols = k // rows
        key = (abs(rows / cols - target), -rows)
        if best is None or key < best[0]:
            best = (key, (rows, cols))
    return best[1]


def sample_keypoints(height: int, width: int, k: int) -> List[Tuple[float, float]]:
    """
    Sample k points on a uniform grid with half-cell offsets.

    Returns:
        (x, y) points in row-major order
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if k > height * width:
        raise InvalidInputError(f"cannot place {k} keypoints on a {height}x{width} frame")
    rows, cols = grid_shape(height, width, k)
    return [
        ((j + 0.5) * width / cols, (i + 0.5) * height / rows)
        for i in range(rows)
        for j in range(cols)
    ]


def nearest_pixel(coordinate: float) -> int:
    return int(math.floor(coordinate + 0.5))


def _inside(x: float, y: float, height: int, width: int) -> bool:
    col, row = nearest_pixel(x), nearest_pixel(y)
    return 0 <= col < width and 0 <= row < height


def track_keypoints(
    scene: "SyntheticScene",
    points: Sequence[Tuple[float, float]],
    window: Tuple[int, int],
    depth: VideoTensor,
) -> List[KeypointTrack]:
    """
    Track points through a clip window with the scene's analytic motion.

    Each point is attached at the window's first frame to whatever the scene
    shows under it (an object or the static background) and then follows that
    owner's exact trajectory. Depth values are read from the normalized depth
    video by nearest-pixel sampling. A point that leaves the frame is flagged
    out of view from its first exterior frame onward.

    Args:
        scene: Scene providing the analytic motion field
        points: Starting (x, y) positions
        window: (start, stop) absolute frame range of the clip
        depth: Normalized depth video covering at least the window

    Returns:
        One KeypointTrack per point, in input order
    """
    start, stop = window
    depth = validate_video(depth, "depth")
    if not 0 <= start < stop <= depth.shape[0]:
        raise InvalidInputError(f"window {window} is outside the depth video ({depth.shape[0]} frames)")
    height, width = depth.shape[2], depth.shape[3]
    motion = scene.motion_field()

    tracks = []
    lost = 0
    for point_id, (x0, y0) in enumerate(points):
        owner = motion.owner(start, x0, y0)
        vx, vy = motion.velocity(owner)
        track = KeypointTrack(point_id=point_id)
        visible = True
        for t in range(start, stop):
            x = x0 + (t - start) * vx
            y = y0 + (t - start) * vy
            visible = visible and _inside(x, y, height, width)
            track.positions.append((t, x, y))
            track.in_view.append(visible)
            if visible:
                track.depth_values.append(float(depth[t, 0, nearest_pixel(y), nearest_pixel(x)]))
            else:
                track.depth_values.append(0.0)
        if not visible:
            lost += 1
        tracks.append(track)

    if lost:
        logger.debug(f"{lost}/{len(tracks)} keypoints left the frame in window {window}")
    return tracks


def mask_tracks(tracks: List[KeypointTrack], ratio: float, rng: np.random.Generator) -> List[KeypointTrack]:
    """Drop a seeded random fraction of tracks (inaccurate sparse control)."""
    if not 0.0 <= ratio < 1.0:
        raise InvalidInputError(f"mask ratio must be in [0, 1), got {ratio}")
    n_drop = int(round(ratio * len(tracks)))
    if n_drop == 0:
        return list(tracks)
    dropped = set(rng.choice(len(tracks), size=n_drop, replace=False).tolist())
    return [track for index, track in enumerate(tracks) if index not in dropped]


def render_point_map(tracks: Sequence[KeypointTrack], t_frames: int, h: int, w: int) -> VideoTensor:
    """
    Rasterize tracks into a sparse point-map video.

    Each in-view track sets one pixel per frame (its nearest integer
    position) to its normalized depth. Later tracks overwrite earlier ones.

    Returns:
        [t_frames, 1, h, w] video, zero wherever no track lands
    """
    video = np.zeros((t_frames, 1, h, w), dtype=np.float64)
    for track in tracks:
        for index in range(min(t_frames, len(track.positions))):
            # Frames past the end of in_view count as in view.
            if index < len(track.in_view) and not track.in_view[index]:
                continue
            _, x, y = track.positions[index]
            video[index, 0, nearest_pixel(y), nearest_pixel(x)] = track.depth_values[index]
    return video
