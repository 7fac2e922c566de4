"""
Unit Tests for the Pipeline

Tests:
- Stitching and the length law
- Training (zero steps, frozen backbone, backbone pretraining, overfitting)
- Long generation (anchor chain, determinism, noise bookkeeping)
- Normalization discontinuity and noise-consistency trends
- The ablation matrix
"""

import numpy as np
import pytest

from core.config import DatasetSettings
from core.control_model import decode_latent, encode_video, init_model
from core.control_signal import ControlPair, plan_clips
from core.errors import InvalidInputError, NonCoverableLengthError
from core.evaluation import mean_frame_ssim
from core.integrity import fingerprint_parameters
from core.pipeline import (
    DEFAULT_PERTURB_ALPHA,
    ablation_cells,
    boundary_control_discontinuity,
    fit,
    generate_long,
    run_ablation,
    stitch,
    train,
)
from core.synthdata import TrainingPair, make_dataset, render_scene
from tests.conftest import micro_model_config, micro_pipeline_config, micro_scene


def frames(*values):
    return np.array(values, dtype=float).reshape(len(values), 1, 1, 1)


def consistency_to_first(video_config, model, scene, depth):
    """Mean SSIM of every later clip to the first generated clip."""
    _, trace = generate_long(model, depth, scene, video_config, seed=0)
    clips = [decode_latent(clip) for clip in trace.clips]
    return float(np.mean([mean_frame_ssim(clip, clips[0]) for clip in clips[1:]]))


# ============================================================================
# TEST 1: Stitching
# ============================================================================

class TestStitch:
    """Earlier clip wins every overlapped frame."""

    def test_overlap_keeps_earlier_frame(self):
        out = stitch([frames(1, 2, 3), frames(30, 4, 5)], overlap=1)
        assert out.ravel().tolist() == [1, 2, 3, 4, 5]

    def test_single_clip_is_identity(self):
        clip = frames(1, 2, 3)
        assert np.array_equal(stitch([clip], overlap=1), clip)

    def test_benchmark_length(self):
        clips = [np.zeros((49, 1, 2, 2)) for _ in range(10)]
        assert stitch(clips, overlap=1).shape[0] == 481

    @pytest.mark.parametrize("length,count,overlap", [(5, 4, 1), (4, 3, 0), (7, 2, 3)])
    def test_length_law(self, length, count, overlap):
        clips = [np.zeros((length, 1, 2, 2)) for _ in range(count)]
        assert stitch(clips, overlap).shape[0] == length + (count - 1) * (length - overlap)

    def test_inconsistent_shapes(self):
        with pytest.raises(InvalidInputError):
            stitch([np.zeros((3, 1, 2, 2)), np.zeros((3, 1, 2, 3))], overlap=1)

    def test_clip_not_longer_than_overlap(self):
        with pytest.raises(InvalidInputError):
            stitch([np.zeros((3, 1, 2, 2)), np.zeros((1, 1, 2, 2))], overlap=1)


# ============================================================================
# TEST 2: Training
# ============================================================================

class TestTrain:
    """Degradation-aware training loop."""

    def test_zero_steps_returns_init_model(self, dataset):
        config = micro_pipeline_config().with_overrides(train={"steps": 0})
        result = train(config, dataset, seed=4)
        expected = init_model(config.model, 4).state_arrays()
        actual = result.model.state_arrays()
        assert result.losses == []
        assert all(np.array_equal(actual[name], expected[name]) for name in expected)

    def test_backbone_frozen(self, pipeline_config, dataset):
        model = init_model(pipeline_config.model, 0)
        before = fingerprint_parameters(model.frozen_named_parameters())
        result = train(pipeline_config, dataset, seed=0, model=model)
        assert len(result.losses) == pipeline_config.train.steps
        assert all(np.isfinite(result.losses))
        assert fingerprint_parameters(result.model.frozen_named_parameters()) == before

    def test_same_seed_same_losses(self, pipeline_config, dataset):
        first = train(pipeline_config, dataset, seed=2)
        second = train(pipeline_config, dataset, seed=2)
        assert first.losses == second.losses

    def test_empty_dataset(self, pipeline_config):
        with pytest.raises(InvalidInputError):
            train(pipeline_config, [], seed=0)

    def test_clip_shape_mismatch(self, pipeline_config):
        pair = TrainingPair(
            clip=np.zeros((5, 1, 6, 6)),
            control=ControlPair(dense=np.zeros((5, 1, 6, 6)), sparse=np.zeros((5, 1, 6, 6))),
        )
        with pytest.raises(InvalidInputError):
            train(pipeline_config, [pair], seed=0)

    def test_fit_rederives_branches_after_pretraining(self, dataset):
        config = micro_pipeline_config().with_overrides(train={"steps": 0, "base_steps": 3})
        initial = init_model(config.model, 0).state_arrays()
        result = fit(config, dataset, seed=0)
        model = result.model
        assert len(result.losses) == 3
        assert not np.array_equal(model.state_arrays()["base_blocks.0.q.weight"], initial["base_blocks.0.q.weight"])
        base_q = model.base_blocks[0].q.weight.detach()
        assert np.array_equal(model.dense_branch[0].q.weight.detach().numpy(), base_q[0::2, 0::2].numpy())
        assert float(model.fusion[0].weight.abs().sum()) == 0.0

    @pytest.mark.slow
    def test_overfits_single_clip(self, dataset):
        """200 backbone steps on one clip: the 50-step trailing mean loss falls."""
        config = micro_pipeline_config().with_overrides(train={"base_steps": 200, "learning_rate": 1e-2})
        result = train(config, dataset[:1], seed=0, stage="base")
        losses = result.losses
        assert len(losses) == 200
        assert np.mean(losses[-50:]) < np.mean(losses[:50])

    @pytest.mark.slow
    def test_control_stage_learns_with_frozen_blocks(self, dataset):
        """200 control steps on one clip: base blocks untouched, trailing mean loss falls."""
        config = micro_pipeline_config(
            model=micro_model_config(train_latent_embed=True, train_first_frame_embed=True, train_head=True)
        ).with_overrides(train={"steps": 200, "batch_size": 4, "learning_rate": 1e-2})
        model = init_model(config.model, 0)
        before = fingerprint_parameters(model.frozen_named_parameters())
        blocks_before = fingerprint_parameters(model.base_blocks.named_parameters())
        result = train(config, dataset[:1], seed=0, model=model, stage="control")
        losses = result.losses
        assert len(losses) == 200
        assert fingerprint_parameters(result.model.frozen_named_parameters()) == before
        assert fingerprint_parameters(result.model.base_blocks.named_parameters()) == blocks_before
        assert np.mean(losses[-50:]) < np.mean(losses[:50])


# ============================================================================
# TEST 3: Long Generation
# ============================================================================

class TestGenerateLong:
    """Clip-wise generation with anchor chaining."""

    @pytest.fixture
    def model(self, pipeline_config):
        return init_model(pipeline_config.model, 0)

    def test_anchor_chain(self, model, pipeline_config, scene):
        rendered = render_scene(scene)
        video, trace = generate_long(model, rendered.depth, scene, pipeline_config)
        assert video.shape == (17, 1, 8, 8)
        assert len(trace.clips) == len(trace.anchors) == 4
        assert np.array_equal(trace.anchors[0], encode_video(rendered.frames[:1])[0])
        for index in range(1, 4):
            assert np.array_equal(trace.anchors[index], trace.clips[index - 1][-1])
        assert len(trace.boundary_ssim) == 3

    def test_deterministic(self, model, pipeline_config, scene):
        depth = render_scene(scene).depth
        first, _ = generate_long(model, depth, scene, pipeline_config, seed=3)
        second, _ = generate_long(model, depth, scene, pipeline_config, seed=3)
        assert np.array_equal(first, second)

    def test_unified_noise_bookkeeping(self, model, pipeline_config, scene):
        _, trace = generate_long(model, render_scene(scene).depth, scene, pipeline_config)
        assert trace.noise_rmse_to_first == [0.0] * 4

    def test_per_clip_noise_bookkeeping(self, model, pipeline_config, scene):
        config = pipeline_config.with_overrides(noise={"mode": "per_clip"})
        _, trace = generate_long(model, render_scene(scene).depth, scene, config)
        assert trace.noise_rmse_to_first[0] == 0.0
        assert all(value > 0 for value in trace.noise_rmse_to_first[1:])

    def test_per_clip_normalization_and_masking(self, model, pipeline_config, scene):
        config = pipeline_config.with_overrides(
            normalization="per_clip",
            inference={"keypoint_mask_ratio": 0.25, "dense_blur_kernel": 3},
        )
        video, trace = generate_long(model, render_scene(scene).depth, scene, config)
        assert video.shape == (17, 1, 8, 8)
        assert len(trace.clips) == 4

    def test_non_coverable_length(self, model, pipeline_config):
        scene = micro_scene(n_frames=16)
        with pytest.raises(NonCoverableLengthError):
            generate_long(model, render_scene(scene).depth, scene, pipeline_config)

    def test_frame_size_mismatch(self, model, pipeline_config):
        scene = micro_scene(width=10)
        with pytest.raises(InvalidInputError):
            generate_long(model, render_scene(scene).depth, scene, pipeline_config)

    @pytest.mark.slow
    def test_benchmark_length(self):
        """481 frames with 49-frame clips: ten clips, 481 output frames."""
        config = micro_pipeline_config(
            clip_len=49,
            model=micro_model_config(latent_shape=(49, 1, 4, 4)),
        ).with_overrides(inference={"sampling_steps": 2})
        scene = micro_scene(n_frames=481)
        model = init_model(config.model, 0)
        video, trace = generate_long(model, render_scene(scene).depth, scene, config)
        assert video.shape[0] == 481
        assert len(trace.clips) == 10
        assert len(trace.boundary_ssim) == 9


# ============================================================================
# TEST 4: Consistency Properties
# ============================================================================

class TestNormalizationDiscontinuity:
    """Control jumps of a static point at clip boundaries."""

    def test_global_smaller_than_per_clip(self):
        scene = micro_scene(depth_drift=0.5)
        depth = render_scene(scene).depth
        plan = plan_clips(17, 5, 1)
        global_jumps = boundary_control_discontinuity(depth, plan, "global", point=(6, 6))
        per_clip_jumps = boundary_control_discontinuity(depth, plan, "per_clip", point=(6, 6))
        assert global_jumps == [0.0, 0.0, 0.0]
        assert np.mean(per_clip_jumps) > np.mean(global_jumps)
        assert all(jump > 0 for jump in per_clip_jumps)

    def test_zero_overlap_reads_adjacent_frames(self):
        scene = micro_scene(n_frames=12, depth_drift=0.5)
        depth = render_scene(scene).depth
        plan = plan_clips(12, 4, 0)
        global_jumps = boundary_control_discontinuity(depth, plan, "global", point=(6, 6))
        per_clip_jumps = boundary_control_discontinuity(depth, plan, "per_clip", point=(6, 6))
        assert np.mean(global_jumps) < np.mean(per_clip_jumps)

    def test_unknown_mode(self, scene):
        with pytest.raises(InvalidInputError):
            boundary_control_discontinuity(render_scene(scene).depth, plan_clips(17, 5, 1), "none", (1, 1))


NOISE_SEEDS = range(20)


@pytest.mark.slow
class TestNoiseConsistency:
    """Paired comparisons over 20 noise seeds on a static 49-frame scene (11 boundaries)."""

    @pytest.fixture(scope="class")
    def fitted(self):
        """Micro model after backbone pretraining and control training."""
        config = micro_pipeline_config(
            model=micro_model_config(token_dim=16, n_heads=2),
            dataset=DatasetSettings(n_scenes=6, frames_per_scene=9, max_objects=2),
        ).with_overrides(
            train={"base_steps": 400, "steps": 200, "batch_size": 2, "learning_rate": 1e-2},
            inference={"sampling_steps": 16},
        )
        dataset = make_dataset(config.dataset_spec(), seed=5)
        return config, fit(config, dataset, seed=0).model

    def _boundary_means(self, fitted, mode, alpha=0.0):
        config, model = fitted
        scene = micro_scene(n_frames=49)
        depth = render_scene(scene).depth
        means = []
        for seed in NOISE_SEEDS:
            cell = config.with_overrides(noise={"mode": mode, "seed": seed, "perturb_alpha": alpha})
            _, trace = generate_long(model, depth, scene, cell, seed=0)
            assert len(trace.boundary_ssim) == 11
            means.append(float(np.mean(trace.boundary_ssim)))
        return np.array(means)

    def test_unified_beats_per_clip_at_boundaries(self, fitted):
        unified = self._boundary_means(fitted, "unified")
        per_clip = self._boundary_means(fitted, "per_clip")
        assert np.mean(unified > per_clip) >= 0.9

    def test_small_perturbation_beats_large_at_boundaries(self, fitted):
        small = self._boundary_means(fitted, "perturbed", DEFAULT_PERTURB_ALPHA)
        large = self._boundary_means(fitted, "perturbed", 1.0)
        assert np.mean(small > large) >= 0.8

    def test_unified_clips_stay_closer_to_first(self, fitted):
        config, model = fitted
        scene = micro_scene()
        depth = render_scene(scene).depth
        scores = {"unified": [], "per_clip": []}
        for seed in range(5):
            for mode in scores:
                cell = config.with_overrides(noise={"mode": mode, "seed": seed})
                scores[mode].append(consistency_to_first(cell, model, scene, depth))
        assert np.mean(scores["unified"]) > np.mean(scores["per_clip"])


# ============================================================================
# TEST 5: Ablation
# ============================================================================

class TestAblation:
    """Normalization x noise x degradation matrix."""

    def test_cells(self, pipeline_config):
        cells = ablation_cells(pipeline_config)
        names = [name for name, _ in cells]
        assert len(cells) == 12
        assert names[0] == "global-unified-degrade"
        assert names[-1] == "per_clip-perturbed-clean"
        perturbed = dict(cells)["global-perturbed-clean"]
        assert perturbed.noise.perturb_alpha == DEFAULT_PERTURB_ALPHA
        assert not perturbed.degrade.enabled
        assert dict(cells)["per_clip-unified-degrade"].normalization == "per_clip"

    def test_single_level_variants(self, pipeline_config):
        cells = dict(ablation_cells(pipeline_config, degradation=("feature", "data")))
        assert len(cells) == 12
        feature = cells["global-unified-feature"].degrade
        data = cells["per_clip-perturbed-data"].degrade
        assert feature.enabled and feature.data_prob == 0.0
        assert feature.feature_prob == pipeline_config.degrade.feature_prob
        assert data.enabled and data.feature_prob == 0.0
        assert data.data_prob == pipeline_config.degrade.data_prob

    @pytest.mark.parametrize("degradation", [("heavy",), ()])
    def test_unknown_variant(self, pipeline_config, degradation):
        with pytest.raises(InvalidInputError):
            ablation_cells(pipeline_config, degradation=degradation)

    def test_one_model_per_variant(self, dataset, mocker):
        config = micro_pipeline_config().with_overrides(train={"steps": 1})
        scene = micro_scene()
        spy = mocker.patch("core.pipeline.fit", wraps=fit)
        reports = run_ablation(
            config, dataset, render_scene(scene).depth, scene, seed=2, degradation=("feature", "data", "clean")
        )
        assert len(reports) == 18
        assert spy.call_count == 3
        trained = [call.args[0].degrade for call in spy.call_args_list]
        assert [d.data_prob == 0.0 for d in trained] == [True, False, False]
        assert reports[0].config_echo["degradation_variant"] == "feature"

    def test_run_ablation_reports(self, dataset):
        config = micro_pipeline_config().with_overrides(train={"steps": 2})
        scene = micro_scene()
        reports = run_ablation(config, dataset, render_scene(scene).depth, scene, seed=7)
        assert len(reports) == 12
        assert [report.cell for report in reports] == [name for name, _ in ablation_cells(config)]
        for report in reports:
            assert len(report.per_clip) == 4
            assert len(report.per_boundary) == 3
            assert report.per_clip[0].mean_ssim_to_reference == 1.0
            assert report.config_echo["seed"] == 7
