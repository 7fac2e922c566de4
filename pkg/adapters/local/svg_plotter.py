"""
SVG Plotter

Emits plain SVG markup (axes, polylines, markers and labels) for the two
figures of an ablation run:
- SSIM to the first clip against clip index, one curve per report
- noise RMSE to the first clip against that SSIM, one marker set per report

Output depends only on the reports, so equal inputs give equal bytes.
"""

import logging
import os
from typing import List, Sequence, Tuple
from xml.sax.saxutils import escape

from core.records import MetricsReport

logger = logging.getLogger(__name__)

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a",
)


class SvgPlotter:
    """Fixed-size line and scatter charts."""

    def __init__(self, width: int = 640, height: int = 400, margin: int = 56, legend_width: int = 200):
        self.width = width
        self.height = height
        self.margin = margin
        self.legend_width = legend_width

    # --- geometry ---

    def _plot_box(self) -> Tuple[float, float, float, float]:
        left = self.margin
        right = self.width - self.legend_width
        top = self.margin / 2
        bottom = self.height - self.margin
        return left, right, top, bottom

    @staticmethod
    def _range(values: Sequence[float]) -> Tuple[float, float]:
        low, high = (min(values), max(values)) if values else (0.0, 1.0)
        if high == low:
            low, high = low - 0.5, high + 0.5
        return low, high

    def _project(self, x: float, y: float, x_range, y_range) -> Tuple[float, float]:
        left, right, top, bottom = self._plot_box()
        px = left + (x - x_range[0]) / (x_range[1] - x_range[0]) * (right - left)
        py = bottom - (y - y_range[0]) / (y_range[1] - y_range[0]) * (bottom - top)
        return px, py

    # --- markup ---

    def _frame(self, title: str, x_label: str, y_label: str, x_range, y_range) -> List[str]:
        left, right, top, bottom = self._plot_box()
        parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">',
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>',
            f'<text x="{(left + right) / 2:.1f}" y="{top - 8:.1f}" text-anchor="middle" '
            f'font-size="14">{escape(title)}</text>',
            f'<path class="axes" d="M {left:.1f} {top:.1f} L {left:.1f} {bottom:.1f} L {right:.1f} {bottom:.1f}" '
            f'stroke="black" fill="none"/>',
            f'<text x="{(left + right) / 2:.1f}" y="{self.height - 12:.1f}" text-anchor="middle" '
            f'font-size="12">{escape(x_label)}</text>',
            f'<text x="14" y="{(top + bottom) / 2:.1f}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {(top + bottom) / 2:.1f})">{escape(y_label)}</text>',
        ]
        for fraction in (0.0, 0.5, 1.0):
            x_value = x_range[0] + fraction * (x_range[1] - x_range[0])
            y_value = y_range[0] + fraction * (y_range[1] - y_range[0])
            px, _ = self._project(x_value, y_range[0], x_range, y_range)
            _, py = self._project(x_range[0], y_value, x_range, y_range)
            parts.append(f'<text x="{px:.1f}" y="{bottom + 16:.1f}" text-anchor="middle" font-size="10">{x_value:.3g}</text>')
            parts.append(f'<text x="{left - 6:.1f}" y="{py + 3:.1f}" text-anchor="end" font-size="10">{y_value:.3g}</text>')
        return parts

    def _legend(self, labels: Sequence[str]) -> List[str]:
        x = self.width - self.legend_width + 12
        parts = []
        for index, label in enumerate(labels):
            y = self.margin / 2 + 16 * index + 8
            color = PALETTE[index % len(PALETTE)]
            parts.append(f'<rect x="{x}" y="{y - 8:.1f}" width="10" height="10" fill="{color}"/>')
            parts.append(f'<text x="{x + 16}" y="{y + 1:.1f}" font-size="11">{escape(label)}</text>')
        return parts

    @staticmethod
    def _label(report: MetricsReport, index: int) -> str:
        return report.cell or f"report {index}"

    # --- charts ---

    def ssim_curves(self, reports: Sequence[MetricsReport]) -> str:
        """One polyline of mean SSIM to the first clip per report."""
        xs = [r.clip_index for report in reports for r in report.per_clip]
        ys = [r.mean_ssim_to_reference for report in reports for r in report.per_clip]
        x_range, y_range = self._range(xs), self._range(ys)
        parts = self._frame("SSIM to first clip", "clip index", "SSIM", x_range, y_range)
        for index, report in enumerate(reports):
            points = " ".join(
                "{:.2f},{:.2f}".format(*self._project(r.clip_index, r.mean_ssim_to_reference, x_range, y_range))
                for r in report.per_clip
            )
            color = PALETTE[index % len(PALETTE)]
            parts.append(
                f'<polyline class="curve" data-cell="{escape(self._label(report, index))}" '
                f'points="{points}" stroke="{color}" fill="none" stroke-width="1.5"/>'
            )
        parts.extend(self._legend([self._label(report, i) for i, report in enumerate(reports)]))
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def rmse_ssim_scatter(self, reports: Sequence[MetricsReport]) -> str:
        """Noise RMSE to the first clip against SSIM to the first clip."""
        xs = [r.noise_rmse_to_first for report in reports for r in report.per_clip]
        ys = [r.mean_ssim_to_reference for report in reports for r in report.per_clip]
        x_range, y_range = self._range(xs), self._range(ys)
        parts = self._frame("Noise RMSE vs SSIM", "noise RMSE to first clip", "SSIM", x_range, y_range)
        for index, report in enumerate(reports):
            color = PALETTE[index % len(PALETTE)]
            for r in report.per_clip:
                px, py = self._project(r.noise_rmse_to_first, r.mean_ssim_to_reference, x_range, y_range)
                parts.append(f'<circle class="point" cx="{px:.2f}" cy="{py:.2f}" r="3" fill="{color}"/>')
        parts.extend(self._legend([self._label(report, i) for i, report in enumerate(reports)]))
        parts.append("</svg>")
        return "\n".join(parts) + "\n"

    def write(self, path: str, svg: str) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write(svg)
        logger.info(f"Wrote plot {path}")
