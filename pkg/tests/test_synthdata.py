"""
Unit Tests for Synthetic Scenes

Tests rendering, occlusion, drift, the analytic motion field and the
seeded dataset builder.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from core.config import DatasetSpec
from core.control_signal import global_normalize, percentile_bounds, track_keypoints
from core.errors import InvalidInputError
from core.synthdata import (
    BackgroundSpec,
    SceneObject,
    SyntheticScene,
    make_dataset,
    random_scene,
    render_scene,
)


def two_object_scene(n_frames=6):
    return SyntheticScene(
        name="pair",
        width=32,
        height=32,
        n_frames=n_frames,
        objects=[
            SceneObject(shape="circle", size=2.0, position=(5.0, 6.0), velocity=(1.0, 0.0), depth=1.0),
            SceneObject(shape="rectangle", size=2.0, aspect=1.5, position=(22.0, 24.0), velocity=(-1.0, -1.0), depth=1.5),
        ],
    )


# ============================================================================
# TEST 1: Rendering
# ============================================================================

class TestRenderScene:
    """Frames and exact depth."""

    def test_empty_scene_is_background(self):
        scene = SyntheticScene(width=8, height=6, n_frames=3)
        rendered = render_scene(scene)
        for t in range(3):
            assert np.array_equal(rendered.depth[t, 0], scene.background_depth())
        assert rendered.depth[0, 0, 0, 0] == 2.0
        assert rendered.depth[0, 0, 5, 0] == 8.0

    def test_horizontal_gradient(self):
        scene = SyntheticScene(width=5, height=4, n_frames=1, background=BackgroundSpec(orientation="horizontal"))
        depth = render_scene(scene).depth[0, 0]
        assert np.array_equal(depth[:, 0], np.full(4, 2.0))
        assert np.array_equal(depth[:, 4], np.full(4, 8.0))

    def test_centroid_advances_with_velocity(self):
        scene = SyntheticScene(
            width=32,
            height=16,
            n_frames=5,
            objects=[SceneObject(shape="circle", size=3.0, position=(8.0, 8.0), velocity=(2.0, 0.0), depth=1.0)],
        )
        rendered = render_scene(scene)
        xs, _ = scene.pixel_grid()
        weights = rendered.frames[:, 0] - scene.background_intensity()[None]
        centroids = [(weights[t] * xs).sum() / weights[t].sum() for t in range(5)]
        for t in range(5):
            assert centroids[t] == pytest.approx(8.0 + 2.0 * t, abs=1e-9)

    def test_depth_drift(self):
        scene = SyntheticScene(width=8, height=8, n_frames=6, depth_drift=0.05)
        depth = render_scene(scene).depth
        for t in range(6):
            assert np.allclose(depth[t], depth[0] + 0.05 * t, atol=1e-12)

    def test_nearer_object_occludes(self):
        scene = SyntheticScene(
            width=16,
            height=16,
            n_frames=1,
            objects=[
                SceneObject(shape="circle", size=3.0, position=(8.0, 8.0), velocity=(0.0, 0.0), depth=1.5, intensity=0.7),
                SceneObject(shape="circle", size=2.0, position=(8.0, 8.0), velocity=(0.0, 0.0), depth=1.0, intensity=0.9),
            ],
        )
        rendered = render_scene(scene)
        assert rendered.depth[0, 0, 8, 8] == 1.0
        assert rendered.frames[0, 0, 8, 8] == 0.9
        assert rendered.depth[0, 0, 8, 11] == 1.5
        assert np.all(rendered.depth[0, 0] <= scene.background_depth())

    def test_object_behind_background_is_hidden(self):
        scene = SyntheticScene(
            width=8,
            height=8,
            n_frames=1,
            objects=[SceneObject(shape="circle", size=3.0, position=(4.0, 4.0), velocity=(0.0, 0.0), depth=10.0)],
        )
        assert np.array_equal(render_scene(scene).depth[0, 0], scene.background_depth())

    def test_subpixel_velocity_needs_flag(self):
        obj = SceneObject(velocity=(0.5, 0.0))
        with pytest.raises(ValidationError):
            SyntheticScene(objects=[obj])
        assert SyntheticScene(objects=[obj], allow_subpixel=True).objects[0].velocity == (0.5, 0.0)

    def test_degenerate_dimensions(self):
        scene = SyntheticScene.model_construct(width=1, height=8, n_frames=2)
        with pytest.raises(InvalidInputError):
            render_scene(scene)


# ============================================================================
# TEST 2: Motion Field
# ============================================================================

class TestMotionField:
    """Exact per-pixel motion."""

    def test_advection_reproduces_next_frame(self):
        scene = two_object_scene()
        motion = scene.motion_field()
        for t in range(scene.n_frames - 1):
            owners, following = motion.owner_map(t), motion.owner_map(t + 1)
            for index, obj in enumerate(scene.objects):
                vx, vy = int(obj.velocity[0]), int(obj.velocity[1])
                rows, cols = np.nonzero(owners == index)
                advected = set(zip((rows + vy).tolist(), (cols + vx).tolist()))
                expected = set(zip(*[a.tolist() for a in np.nonzero(following == index)]))
                assert advected == expected

    def test_displacement(self):
        motion = two_object_scene().motion_field()
        assert motion.displacement(0, 5.0, 6.0) == (1.0, 0.0)
        assert motion.displacement(0, 22.0, 24.0) == (-1.0, -1.0)
        assert motion.displacement(0, 15.0, 15.0) == (0.0, 0.0)

    def test_owner_outside_frame(self):
        motion = two_object_scene().motion_field()
        assert motion.owner(0, -3.0, 4.0) is None
        assert motion.object_position(0, 3) == (8.0, 6.0)


# ============================================================================
# TEST 3: Dataset
# ============================================================================

class TestMakeDataset:
    """Seeded training corpus."""

    spec = DatasetSpec(n_scenes=2, frames_per_scene=9, height=8, width=8, clip_len=5, overlap=1, keypoints=16)

    def test_same_seed_is_identical(self):
        first = make_dataset(self.spec, seed=5)
        second = make_dataset(self.spec, seed=5)
        assert len(first) == len(second) == 4
        for a, b in zip(first, second):
            assert a.scene_name == b.scene_name and a.window == b.window
            assert np.array_equal(a.clip, b.clip)
            assert np.array_equal(a.control.dense, b.control.dense)
            assert np.array_equal(a.control.sparse, b.control.sparse)

    def test_different_seed_differs(self):
        first = make_dataset(self.spec.model_copy(update={"n_scenes": 6}), seed=1)
        second = make_dataset(self.spec.model_copy(update={"n_scenes": 6}), seed=2)
        assert any(not np.array_equal(a.clip, b.clip) for a, b in zip(first, second))

    def test_single_clip_scene(self):
        spec = DatasetSpec(n_scenes=1, frames_per_scene=49, height=8, width=8, clip_len=49, overlap=1, keypoints=16)
        pairs = make_dataset(spec, seed=0)
        assert len(pairs) == 1
        assert pairs[0].clip.shape == (49, 1, 8, 8)
        assert pairs[0].window == (0, 49)

    def test_controls_are_aligned(self):
        for pair in make_dataset(self.spec, seed=3):
            assert pair.control.dense.shape == pair.clip.shape
            assert pair.control.sparse.shape == pair.clip.shape
            assert pair.control.dense.min() >= 0.0 and pair.control.dense.max() <= 1.0
            assert np.count_nonzero(pair.control.sparse[0]) <= 16

    def test_random_scene_objects_in_front(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            scene = random_scene(rng, 16, 16, 5, max_objects=3)
            assert all(obj.depth < scene.background.near_depth for obj in scene.objects)


class TestTrackedDepth:

    def test_point_on_object_reads_object_depth(self):
        scene = SyntheticScene(
            width=16,
            height=16,
            n_frames=6,
            objects=[SceneObject(shape="circle", size=2.5, position=(4.0, 8.0), velocity=(1.0, 0.0), depth=1.0)],
        )
        depth = render_scene(scene).depth
        normalized = global_normalize(depth)
        low, high = percentile_bounds(depth)
        expected = (min(max(1.0, low), high) - low) / (high - low)
        (track,) = track_keypoints(scene, [(4.0, 8.0)], (0, 6), normalized)
        assert all(track.in_view)
        assert track.depth_values == [expected] * 6
