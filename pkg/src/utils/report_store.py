"""
Report Store Module

Saves and loads machine-readable report rows as JSONL, one file per
(report, batch), with completion markers so long enumerations such as the
negotiable union over many patterns can resume where they stopped.

Example Usage:
    from src.utils.report_store import ReportStore

    store = ReportStore("results")
    store.save_batch(report="classify-rigid_body", batch_id=0, data=rows)
    rows = store.load_batches(report="classify-rigid_body")
    next_batch = store.get_resume_point(report="union-rigid_body")
    store.mark_report_complete(report="union-rigid_body")
"""

import json
from pathlib import Path
from typing import Any, Optional, Sequence

import jsonlines
import pandas as pd
from pydantic import BaseModel


class ReportStore:
    """Batch-level JSONL persistence for analysis reports."""

    def __init__(self, report_dir: str | Path = "results"):
        """
        Initialize ReportStore.

        Args:
            report_dir: Directory for report files (created when missing)
        """
        self.report_dir = Path(report_dir)
        self.report_dir.mkdir(parents=True, exist_ok=True)
        self.completion_marker_file = self.report_dir / "_report_completion_markers.json"

    def batch_file(self, report: str, batch_id: int) -> Path:
        return self.report_dir / f"{report}-batch-{batch_id}.jsonl"

    def save_batch(
        self, report: str, batch_id: int, data: Sequence[BaseModel | dict[str, Any]]
    ) -> Path:
        """
        Save one batch of rows.

        Args:
            report: Report identifier (e.g., "graph-rigid_body")
            batch_id: Batch number (0-indexed)
            data: Pydantic models (dumped in JSON mode) or plain dicts

        Raises:
            IOError: If the file cannot be written
        """
        path = self.batch_file(report, batch_id)
        try:
            with jsonlines.open(path, mode="w") as writer:
                for item in data:
                    writer.write(
                        item.model_dump(mode="json") if isinstance(item, BaseModel) else item
                    )
        except (OSError, TypeError) as e:
            raise IOError(f"Failed to save batch {batch_id} of report {report}: {e}") from e
        return path

    def load_batches(self, report: str, before: Optional[int] = None) -> list[dict[str, Any]]:
        """
        All rows of a report, batches in numeric order (only ids below
        `before` when given).

        Raises:
            IOError: If a batch file is unreadable or corrupted
        """
        rows: list[dict[str, Any]] = []
        for number, path in sorted(self._batches(report)):
            if before is not None and number >= before:
                continue
            try:
                with jsonlines.open(path) as reader:
                    rows.extend(reader)
            except jsonlines.InvalidLineError as e:
                raise IOError(f"Corrupted report file {path}: {e}") from e
            except OSError as e:
                raise IOError(f"Failed to read report file {path}: {e}") from e
        return rows

    def _batches(self, report: str) -> list[tuple[int, Path]]:
        found = []
        for path in self.report_dir.glob(f"{report}-batch-*.jsonl"):
            try:
                found.append((int(path.stem.split("-batch-")[-1]), path))
            except ValueError:
                continue
        return found

    def get_resume_point(self, report: str) -> int:
        """
        First missing batch number (0-indexed); 0 when nothing is saved.

        Example:
            Batches 0, 1, 2 saved -> 3. Batches 0, 2 saved -> 1.
        """
        numbers = sorted(n for n, _ in self._batches(report))
        for expected, number in enumerate(numbers):
            if number != expected:
                return expected
        return len(numbers)

    def to_frame(self, report: str) -> pd.DataFrame:
        """Rows of a report as a flat table (nested fields dotted)."""
        return pd.json_normalize(self.load_batches(report))

    def write_csv(self, report: str, path: Path | str) -> Path:
        path = Path(path)
        self.to_frame(report).to_csv(path, index=False)
        return path

    def _markers(self) -> dict[str, bool]:
        if not self.completion_marker_file.exists():
            return {}
        try:
            with open(self.completion_marker_file, "r") as f:
                return dict(json.load(f))
        except (json.JSONDecodeError, OSError):
            # corrupted marker file: start fresh
            return {}

    def mark_report_complete(self, report: str) -> None:
        """
        Raises:
            IOError: If the marker file cannot be written
        """
        markers = self._markers()
        markers[report] = True
        try:
            with open(self.completion_marker_file, "w") as f:
                json.dump(markers, f, indent=2)
        except OSError as e:
            raise IOError(f"Failed to write completion marker for {report}: {e}") from e

    def is_report_complete(self, report: str) -> bool:
        return bool(self._markers().get(report, False))

    def clear(self, report: str) -> None:
        """Delete a report's batches and marker (fresh run)."""
        for _, path in self._batches(report):
            path.unlink()
        markers = self._markers()
        if markers.pop(report, None) is not None:
            with open(self.completion_marker_file, "w") as f:
                json.dump(markers, f, indent=2)
