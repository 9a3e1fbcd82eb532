"""
Unit tests for AnalysisCoordinator: config loading, resolution, persisted
reports and resumable union listings.
"""

import json
from unittest.mock import MagicMock

import numpy as np
import pandas as pd
import pytest

from src.coordinator import AnalysisCoordinator
from src.models.graph import UnionRow
from src.models.system import IndexSet, ProlongationPattern
from src.models.trace import SimulationTrace, SwitchEvent
from src.utils.errors import ConfigurationError


@pytest.fixture
def coordinator(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return AnalysisCoordinator(
        report_dir=tmp_path / "results",
        correlation_id="test-run",
        overrides={"samples": 32},
        quiet=True,
    )


class TestInitialization:
    """Test cases for coordinator construction."""

    def test_defaults_without_config(self, coordinator):
        """Test that missing default config falls back to built-in defaults."""
        # Assert
        assert coordinator.correlation_id == "test-run"
        assert coordinator.params.sampling.validity_samples == 32
        assert coordinator.params.budget.l_max == 3

    def test_explicit_config(self, tmp_path):
        """Test that an explicit config file is loaded and overridden."""
        # Arrange
        path = tmp_path / "params.json"
        path.write_text(json.dumps({"budget": {"l_max": 1}, "sampling": {"seed": 5}}))

        # Act
        coordinator = AnalysisCoordinator(
            config_path=path, report_dir=tmp_path, overrides={"seed": 9}, quiet=True
        )

        # Assert
        assert coordinator.params.budget.l_max == 1
        assert coordinator.params.sampling.seed == 9

    def test_explicit_config_missing(self, tmp_path):
        """Test that an explicit config path must exist."""
        # Act & Assert
        with pytest.raises(FileNotFoundError):
            AnalysisCoordinator(config_path=tmp_path / "absent.json", report_dir=tmp_path)


class TestResolve:
    """Test cases for system and label resolution."""

    def test_builtin_default_output(self, coordinator):
        """Test that builtins resolve with their default output."""
        # Act
        sys, y, name = coordinator.resolve("rigid_body")

        # Assert
        assert name == "pose"
        assert len(y) == 6
        assert coordinator.labels_for(sys)["A{1,2}|O{4,5}"] == "QM#13"

    def test_scenario_labels_merged(self, coordinator):
        """Test that scenario labels override builtin ones."""
        # Act
        scenario, sys, _ = coordinator.scenario("motivating_unified")

        # Assert
        assert scenario.labels["A{2}|O{3}"] == "u2-off"
        assert scenario.output == "y"
        assert sys.name == "motivating_square"

    def test_graph_needs_pattern(self, coordinator):
        """Test that systems without a default pattern need one."""
        # Act & Assert
        with pytest.raises(ConfigurationError, match="No prolongation pattern given for example1"):
            coordinator.graph("example1")


class TestReports:
    """Test cases for persisted command reports."""

    def test_classify_saves_report(self, coordinator):
        """Test that classification rows land in the report directory."""
        # Arrange
        coordinator.params = coordinator.params.with_overrides(l_max=0)

        # Act
        report = coordinator.classify("motivating_square")

        # Assert
        key = "classify-motivating_square"
        assert coordinator.store.is_report_complete(key)
        rows = coordinator.store.load_batches(key)
        assert len(rows) == len(report.rows)
        assert {tuple(r["A"]) for r in rows if r["in_D"]} == {(2,), (1, 2)}

    def test_graph_saves_vertices_and_edges(self, coordinator):
        """Test the two batches of a graph report."""
        # Act
        graph = coordinator.graph("motivating_square")

        # Assert
        key = "graph-motivating_square-0_1_0"
        vertices = coordinator.store.load_batches(key, before=1)
        edges = coordinator.store.load_batches(key)[len(vertices):]
        assert len(vertices) == len(graph.vertices) == 2
        assert len(edges) == 1

    def test_simulate_measures_watched_channels(self, coordinator, mocker):
        """Test metrics at accepted switches and the skipped inactive channel."""
        # Arrange
        t = np.round(np.arange(0.0, 10.0 + 1e-9, 0.01), 10)
        frame = pd.DataFrame({"t": t, "e_x1": np.exp(-2.0 * t), "e_x3": np.zeros_like(t)})
        switch = SwitchEvent(
            time=8.0,
            source="full",
            target="u2-off",
            outcome="accepted",
            pre_laws={"x1": [2.0]},
            post_laws={"x1": [2.0]},
        )
        trace = SimulationTrace(scenario="motivating_unified", step=0.01, frame=frame, switches=[switch])
        mocker.patch("src.coordinator.simulate", return_value=trace)

        # Act
        result, metrics = coordinator.simulate("motivating_unified")

        # Assert
        assert result is trace
        assert [m.channel for m in metrics] == ["x1"]
        assert metrics[0].no_transient
        assert metrics[0].window == 2.0
        saved = coordinator.store.load_batches("simulate-motivating_unified")
        assert saved[0]["rows"] == len(t)
        assert saved[1]["channel"] == "x1"


class TestUnionResume:
    """Test cases for the checkpointed negotiable union."""

    def _row(self, orders):
        return UnionRow(
            pattern=ProlongationPattern(orders=orders), removed=IndexSet(), omitted=IndexSet()
        )

    def test_resume_skips_finished_patterns(self, coordinator, mocker):
        """Test that saved batches are reloaded and not recomputed."""
        # Arrange
        coordinator.params = coordinator.params.with_overrides(l_max=1)
        mocker.patch("src.coordinator.InputClassifier", MagicMock())
        starred = mocker.patch(
            "src.coordinator.starred_rows",
            side_effect=lambda sys, y, pattern, *args: [self._row(pattern.orders)],
        )
        key = "union-motivating_square-l1"
        coordinator.store.save_batch(key, 0, [self._row((0, 0, 0))])
        coordinator.store.save_batch(key, 1, [])

        # Act
        rows = coordinator.union("motivating_square")

        # Assert
        assert starred.call_count == 6
        assert rows[0].pattern.orders == (0, 0, 0)
        assert len(rows) == 7
        assert coordinator.store.is_report_complete(key)

    def test_complete_report_recomputed(self, coordinator, mocker):
        """Test that a finished listing starts over."""
        # Arrange
        coordinator.params = coordinator.params.with_overrides(l_max=0)
        mocker.patch("src.coordinator.InputClassifier", MagicMock())
        starred = mocker.patch("src.coordinator.starred_rows", return_value=[])
        key = "union-motivating_square-l0"
        coordinator.store.save_batch(key, 0, [self._row((0, 0, 0))])
        coordinator.store.mark_report_complete(key)

        # Act
        rows = coordinator.union("motivating_square")

        # Assert
        assert starred.call_count == 1
        assert rows == []
