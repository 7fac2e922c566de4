"""
Unit Tests for Evaluation Metrics

Tests SSIM, boundary consistency, flicker, RMSE and the MetricsReport
against closed forms and scalar-loop oracles.
"""

import json

import numpy as np
import pytest

from core.control_signal import plan_clips
from core.errors import InvalidInputError
from core.evaluation import (
    C1,
    C2,
    boundary_consistency,
    boundary_frame_pairs,
    build_metrics_report,
    flicker,
    ssim,
    video_rmse,
)
from core.records import CSV_COLUMNS, GenerationTrace, MetricsReport


def scalar_ssim(a, b, window=7):
    rows, cols = len(a), len(a[0])
    n = window * window
    values = []
    for i in range(rows - window + 1):
        for j in range(cols - window + 1):
            xs = [a[i + u][j + v] for u in range(window) for v in range(window)]
            ys = [b[i + u][j + v] for u in range(window) for v in range(window)]
            mx, my = sum(xs) / n, sum(ys) / n
            vx = sum((x - mx) ** 2 for x in xs) / n
            vy = sum((y - my) ** 2 for y in ys) / n
            cov = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
            values.append(((2 * mx * my + C1) * (2 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2)))
    return sum(values) / len(values)


# ============================================================================
# TEST 1: SSIM
# ============================================================================

class TestSsim:
    """Uniform-window single-scale SSIM."""

    def test_identical_frames(self, rng):
        frame = rng.random((16, 16))
        assert ssim(frame, frame) == 1.0

    def test_constant_extremes(self):
        value = ssim(np.zeros((8, 8)), np.ones((8, 8)))
        assert value == pytest.approx(C1 / (1 + C1), rel=1e-9)

    def test_matches_scalar_oracle(self, rng):
        for _ in range(3):
            a, b = rng.random((16, 16)), rng.random((16, 16))
            assert abs(ssim(a, b) - scalar_ssim(a.tolist(), b.tolist())) < 1e-9

    def test_symmetric_and_bounded(self, rng):
        for _ in range(20):
            a, b = rng.random((10, 12)), rng.random((10, 12))
            assert abs(ssim(a, b) - ssim(b, a)) < 1e-12
            assert -1.0 <= ssim(a, b) <= 1.0

    def test_channels_are_averaged(self, rng):
        a, b = rng.random((2, 9, 9)), rng.random((2, 9, 9))
        assert ssim(a, b) == pytest.approx((ssim(a[0], b[0]) + ssim(a[1], b[1])) / 2, abs=1e-15)

    def test_small_frame_uses_whole_frame(self, rng):
        a, b = rng.random((4, 4)), rng.random((4, 4))
        assert abs(ssim(a, b) - scalar_ssim(a.tolist(), b.tolist(), window=4)) < 1e-9

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((4, 4)), np.zeros((4, 5)))


# ============================================================================
# TEST 2: Boundary Consistency
# ============================================================================

class TestBoundaryConsistency:
    """SSIM across adjacent stitched frames at each clip boundary."""

    def test_frame_pairs(self):
        assert boundary_frame_pairs(plan_clips(9, 3, 1)) == [(2, 3), (4, 5), (6, 7)]
        assert boundary_frame_pairs(plan_clips(12, 4, 0)) == [(3, 4), (7, 8)]

    def test_static_video(self, rng):
        frame = rng.random((1, 8, 8))
        video = np.repeat(frame[None], 9, axis=0)
        assert boundary_consistency(video, plan_clips(9, 3, 1)) == [1.0, 1.0, 1.0]

    def test_hard_cut_is_minimum(self, rng):
        plan = plan_clips(9, 3, 1)
        before, after = rng.random((1, 8, 8)), rng.random((1, 8, 8))
        video = np.stack([(before if t <= 4 else after) + 0.01 * rng.random((1, 8, 8)) for t in range(9)])
        values = boundary_consistency(np.clip(video, 0, 1), plan)
        assert int(np.argmin(values)) == 1

    def test_ten_clips_give_nine_values(self):
        video = np.zeros((481, 1, 4, 4))
        assert len(boundary_consistency(video, plan_clips(481, 49, 1))) == 9

    def test_plan_mismatch(self):
        with pytest.raises(InvalidInputError):
            boundary_consistency(np.zeros((8, 1, 4, 4)), plan_clips(9, 3, 1))


# ============================================================================
# TEST 3: Flicker and RMSE
# ============================================================================

class TestFlicker:

    def test_static_video(self, rng):
        video = np.repeat(rng.random((1, 1, 4, 4)), 5, axis=0)
        assert flicker(video) == 0.0

    def test_alternating_frames(self):
        video = np.stack([np.full((1, 4, 4), float(t % 2)) for t in range(6)])
        assert flicker(video) == 1.0

    def test_matches_scalar_oracle(self, rng):
        video = rng.random((5, 1, 3, 4))
        pairs = []
        for t in range(4):
            diffs = [abs(video[t + 1, 0, i, j] - video[t, 0, i, j]) for i in range(3) for j in range(4)]
            pairs.append(sum(diffs) / len(diffs))
        assert abs(flicker(video) - sum(pairs) / len(pairs)) < 1e-12

    def test_single_frame(self):
        with pytest.raises(InvalidInputError):
            flicker(np.zeros((1, 1, 4, 4)))


class TestVideoRmse:

    def test_identical(self, rng):
        video = rng.random((2, 1, 4, 4))
        assert video_rmse(video, video) == 0.0

    def test_offset(self):
        assert video_rmse(np.zeros((2, 1, 3, 3)), np.full((2, 1, 3, 3), 2.0)) == 2.0

    def test_matches_scalar_oracle(self, rng):
        a, b = rng.random((2, 1, 3, 3)), rng.random((2, 1, 3, 3))
        total = sum((x - y) ** 2 for x, y in zip(a.ravel().tolist(), b.ravel().tolist()))
        assert abs(video_rmse(a, b) - (total / a.size) ** 0.5) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            video_rmse(np.zeros((2, 1, 3, 3)), np.zeros((3, 1, 3, 3)))


# ============================================================================
# TEST 4: Metrics Report
# ============================================================================

class TestMetricsReport:
    """Assembly and serialization."""

    def _report(self, rng):
        plan = plan_clips(9, 3, 1)
        video = rng.random((9, 1, 8, 8))
        reference = rng.random((9, 1, 8, 8))
        trace = GenerationTrace(noise_rmse_to_first=[0.0, 0.1, 0.2, 0.3], plan=plan.to_dict())
        return build_metrics_report(video, reference, plan, trace, config_echo={"cell": "global-unified-degrade"})

    def test_structure(self, rng):
        report = self._report(rng)
        assert len(report.per_clip) == 4
        assert len(report.per_boundary) == 3
        assert report.per_clip[0].mean_ssim_to_reference == 1.0
        assert [r.noise_rmse_to_first for r in report.per_clip] == [0.0, 0.1, 0.2, 0.3]
        assert set(report.global_metrics) == {"mean_ssim", "flicker", "video_rmse"}
        assert report.cell == "global-unified-degrade"

    def test_json_is_canonical(self, rng):
        report = self._report(rng)
        text = report.to_json()
        assert text.endswith("}\n")
        data = json.loads(text)
        assert list(data) == sorted(data)
        assert "global" in data
        assert MetricsReport.from_dict(data).to_dict() == report.to_dict()

    def test_csv_rows(self, rng):
        rows = self._report(rng).to_csv_rows()
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 1 + 4 + 3
        assert rows[1][0] == "clip" and rows[-1][0] == "boundary"

    def test_missing_trace_rmse_defaults_to_zero(self, rng):
        plan = plan_clips(5, 3, 1)
        video = rng.random((5, 1, 8, 8))
        report = build_metrics_report(video, video, plan, GenerationTrace())
        assert [r.noise_rmse_to_first for r in report.per_clip] == [0.0, 0.0]
        assert report.global_metrics["video_rmse"] == 0.0
        assert report.global_metrics["mean_ssim"] == 1.0
