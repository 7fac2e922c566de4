"""
Local Report Writer

Writes MetricsReports as canonical JSON plus flat CSV tables, and the
combined reports.json that the plot command reads.
"""

import csv
import json
import logging
import os
import re
from typing import Any, Dict, List, Sequence

from core.errors import FormatError
from core.interfaces import IReportWriter
from core.records import MetricsReport

logger = logging.getLogger(__name__)

COMBINED_NAME = "reports.json"


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name) or "report"


class LocalReportWriter(IReportWriter):

    def write_json(self, path: str, data: Dict[str, Any]) -> None:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", newline="\n") as f:
            f.write(json.dumps(data, sort_keys=True, indent=2) + "\n")

    def write_csv(self, path: str, rows: List[List[Any]]) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerows(rows)

    def write_reports(self, directory: str, reports: Sequence[MetricsReport]) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        written = []
        for index, report in enumerate(reports):
            stem = _slug(report.cell) if report.cell else f"report_{index:02d}"
            json_path = os.path.join(directory, f"{stem}.json")
            with open(json_path, "w", newline="\n") as f:
                f.write(report.to_json())
            csv_path = os.path.join(directory, f"{stem}.csv")
            self.write_csv(csv_path, report.to_csv_rows())
            written.extend([json_path, csv_path])

        combined = os.path.join(directory, COMBINED_NAME)
        self.write_json(combined, {"reports": [report.to_dict() for report in reports]})
        written.append(combined)
        logger.info(f"✅ Wrote {len(reports)} reports to {directory}")
        return written


def load_reports(path: str) -> List[MetricsReport]:
    """Read a combined reports.json or a single report JSON."""
    with open(path, "r") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"report is not valid JSON: {e.msg}", offset=e.pos, details={"path": path}) from e
    if "reports" in data:
        return [MetricsReport.from_dict(item) for item in data["reports"]]
    return [MetricsReport.from_dict(data)]
