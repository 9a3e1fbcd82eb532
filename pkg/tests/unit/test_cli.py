"""
Unit tests for the command-line interface.
"""

from unittest.mock import MagicMock

import pandas as pd
import pytest
from typer.testing import CliRunner

from src.acceptance import CriterionResult
from src.cli import app
from src.models.trace import SimulationTrace
from src.utils.errors import ValidityExitError

runner = CliRunner()


@pytest.fixture(autouse=True)
def no_logging_setup(mocker):
    return mocker.patch("src.cli.configure_logging")


@pytest.fixture
def base_args(tmp_path):
    return ["--quiet", "--samples", "32", "--report-dir", str(tmp_path / "results")]


def _criterion(number: int, passed: bool) -> CriterionResult:
    return CriterionResult(
        number=number, title=f"criterion {number}", passed=passed, detail="ok", runtime=0.1, budget=5.0
    )


class TestExportBuiltin:
    """Test cases for export-builtin."""

    def test_to_stdout(self):
        """Test that the rendered system file is echoed."""
        # Act
        result = runner.invoke(app, ["export-builtin", "mecanum"])

        # Assert
        assert result.exit_code == 0
        assert "system mecanum" in result.output

    def test_to_file(self, tmp_path):
        """Test writing the rendered file."""
        # Arrange
        out = tmp_path / "square.sys"

        # Act
        result = runner.invoke(app, ["export-builtin", "motivating_square", "--out", str(out)])

        # Assert
        assert result.exit_code == 0
        assert out.read_text().startswith("system motivating_square\n")

    def test_unknown(self):
        """Test that unknown ids exit 1."""
        # Act
        result = runner.invoke(app, ["export-builtin", "drone"])

        # Assert
        assert result.exit_code == 1
        assert "Unknown builtin" in result.output


class TestClassify:
    """Test cases for classify."""

    def test_needs_one_reference(self, base_args):
        """Test that a file and --builtin are mutually exclusive."""
        # Act
        result = runner.invoke(app, [*base_args, "classify", "a.sys", "--builtin", "example1"])

        # Assert
        assert result.exit_code == 2

    def test_budget_limited_exit_code(self, base_args, tmp_path):
        """Test the static square run: labels printed, exit 2, JSONL report."""
        # Arrange
        report = tmp_path / "square.jsonl"

        # Act
        result = runner.invoke(
            app,
            [*base_args, "classify", "--builtin", "motivating_square", "--lmax", "0", "--report", str(report)],
        )

        # Assert
        assert result.exit_code == 2
        assert "essential" in result.output
        assert "D = {{2}, {1,2}}" in result.output
        lines = report.read_text().splitlines()
        assert len(lines) == 7

    def test_unknown_system_file(self, base_args, tmp_path):
        """Test that toolkit errors exit 1."""
        # Act
        result = runner.invoke(app, [*base_args, "classify", str(tmp_path / "absent.sys")])

        # Assert
        assert result.exit_code == 1
        assert "error:" in result.output


class TestGraph:
    """Test cases for graph."""

    def test_square_graph_with_dot(self, base_args, tmp_path):
        """Test the default pattern of the square and the DOT file."""
        # Arrange
        dot = tmp_path / "square.dot"

        # Act
        result = runner.invoke(app, [*base_args, "graph", "--builtin", "motivating_square", "--dot", str(dot)])

        # Assert
        assert result.exit_code == 0
        assert "1 edges; starred component: 2 vertices" in result.output
        assert dot.read_text().startswith("graph negotiability {")

    def test_invalid_pattern(self, base_args):
        """Test that malformed patterns are usage errors."""
        # Act
        result = runner.invoke(app, [*base_args, "graph", "--builtin", "motivating_square", "--ell", "1,x"])

        # Assert
        assert result.exit_code == 2

    def test_pattern_not_common(self, base_args):
        """Test that a pattern outside the common prolongations exits 1."""
        # Act
        result = runner.invoke(app, [*base_args, "graph", "--builtin", "motivating_square", "--ell", "1,0,0"])

        # Assert
        assert result.exit_code == 1
        assert "n_l" in result.output


class TestSimulate:
    """Test cases for simulate."""

    def test_partial_trace_on_validity_exit(self, base_args, tmp_path, mocker):
        """Test that a validity exit writes the partial trace and exits 1."""
        # Arrange
        trace = SimulationTrace(
            scenario="demo",
            step=0.1,
            frame=pd.DataFrame({"t": [0.0, 0.1], "x1": [0.0, 0.1]}),
            completed=False,
            exit_time=0.1,
            exit_reason="Selected decoupling matrix singular",
        )
        coordinator = MagicMock()
        coordinator.simulate.side_effect = ValidityExitError("Selected decoupling matrix singular", 0.1, trace)
        mocker.patch("src.cli.AnalysisCoordinator", return_value=coordinator)
        csv = tmp_path / "demo.csv"

        # Act
        result = runner.invoke(app, [*base_args, "simulate", "--builtin", "demo", "--csv", str(csv)])

        # Assert
        assert result.exit_code == 1
        assert "t=0.1" in result.output
        assert csv.exists()
        assert (tmp_path / "demo.events.jsonl").exists()


class TestCheck:
    """Test cases for check."""

    @pytest.mark.parametrize("passed, code", [(True, 0), (False, 1)])
    def test_exit_code(self, base_args, tmp_path, mocker, passed, code):
        """Test that any failing criterion exits 1 and results are saved."""
        # Arrange
        suite = mocker.patch("src.cli.run_suite", return_value=[_criterion(1, True), _criterion(2, passed)])

        # Act
        result = runner.invoke(app, [*base_args, "check", "--only", "1,2"])

        # Assert
        assert result.exit_code == code
        assert suite.call_args.args[0] == [1, 2]
        assert (tmp_path / "results" / "acceptance-batch-0.jsonl").exists()

    def test_unknown_criterion(self, base_args):
        """Test that unknown numbers exit 1."""
        # Act
        result = runner.invoke(app, [*base_args, "check", "--only", "99"])

        # Assert
        assert result.exit_code == 1
        assert "criteria" in result.output

    def test_invalid_list(self, base_args):
        """Test that a malformed selection is a usage error."""
        # Act
        result = runner.invoke(app, [*base_args, "check", "--only", "one"])

        # Assert
        assert result.exit_code == 2
