"""
Unit tests for the system-definition file format.
"""

from pathlib import Path

import pytest

from src.builtins import BUILTINS, get_builtin
from src.symbolic.expression import symbol
from src.system.dsl import load_system, parse_system, render_system
from src.utils.errors import SystemDefinitionError

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

PENDULUM = """
# cart-free pendulum with a torque input
system pendulum
params: k=2.5
states: th om
inputs: tau
operating_point: 0 0
box: ±1 -2:2
f:
  om
  -k*sin(th)
g tau:
  0
  1
output angle:
  th
output energy:
  e = om^2/2 - k*cos(th)
"""


class TestParseSystem:
    """Test cases for parse_system."""

    def test_sections(self):
        """Test that every section lands in the model."""
        # Act
        sys = parse_system(PENDULUM, "pendulum.sys")

        # Assert
        assert sys.name == "pendulum"
        assert sys.params == {"k": 2.5}
        assert sys.states == ["th", "om"]
        assert sys.inputs == ["tau"]
        assert sys.box == [(-1.0, 1.0), (-2.0, 2.0)]
        assert sys.drift[0] == symbol("om")
        assert list(sys.outputs) == ["angle", "energy"]

    def test_channel_labels(self):
        """Test bare-symbol labels and explicit labels."""
        # Act
        sys = parse_system(PENDULUM)

        # Assert
        assert sys.output_map("angle").names == ["th"]
        assert sys.output_map("energy").names == ["e"]

    def test_fixture_file_loads(self):
        """Test loading a system file from disk."""
        # Act
        sys = load_system(FIXTURES / "unicycle.sys")

        # Assert
        assert sys.name == "unicycle"
        assert sys.p == 2
        assert sys.output_map().names == ["px", "py"]

    def test_missing_file(self, tmp_path):
        """Test that a missing path raises SystemDefinitionError."""
        # Act & Assert
        with pytest.raises(SystemDefinitionError, match="System file not found"):
            load_system(tmp_path / "absent.sys")

    @pytest.mark.parametrize(
        "text, message",
        [
            ("states: x\ninputs: u\nf:\n  0\ng u:\n  1\n", "Missing 'system <name>' header"),
            ("system s\ninputs: u\nf:\n  0\ng u:\n  1\n", "Missing 'states:' section"),
            ("system s\nstates: x\ninputs: u\nf:\n  0\n", "Missing 'g <input>:' section for u"),
            ("system s\nstates: x\ninputs: u\nf:\n  0\n  1\ng u:\n  1\n", "needs 1 expressions, got 2"),
            ("system s\nstates: x\ninputs: u\nf:\n  0\ng v:\n  1\n", "Column for unknown input 'v'"),
            ("system s\nstates: x\ninputs: u\nwhat:\n", "Unknown section 'what'"),
            ("system s\nstates: x x\ninputs: u\n", "Duplicate name in 'states:'"),
            ("system s\nstates: x\ninputs: u\nbox: 1\nf:\n  0\ng u:\n  1\n", "Invalid box entry"),
        ],
    )
    def test_structural_errors(self, text, message):
        """Test diagnostics for malformed files."""
        # Act & Assert
        with pytest.raises(SystemDefinitionError, match=message):
            parse_system(text, "bad.sys")

    def test_expression_error_carries_line(self):
        """Test that expression errors report file and line."""
        # Arrange
        text = "system s\nstates: x\ninputs: u\nf:\n  x + y\ng u:\n  1\n"

        # Act
        with pytest.raises(SystemDefinitionError) as excinfo:
            parse_system(text, "bad.sys")

        # Assert
        assert excinfo.value.file == "bad.sys"
        assert excinfo.value.line == 5
        assert "Unknown symbol 'y'" in str(excinfo.value)

    def test_box_must_contain_operating_point(self):
        """Test that model validation errors surface as SystemDefinitionError."""
        # Arrange
        text = "system s\nstates: x\ninputs: u\noperating_point: 3\nbox: 0:1\nf:\n  0\ng u:\n  1\n"

        # Act & Assert
        with pytest.raises(SystemDefinitionError, match="Inconsistent system"):
            parse_system(text)


class TestRenderSystem:
    """Test cases for render_system."""

    def test_round_trip(self):
        """Test that rendering and reparsing reproduces the model."""
        # Arrange
        sys = parse_system(PENDULUM)

        # Act
        again = parse_system(render_system(sys))

        # Assert
        assert again == sys

    @pytest.mark.parametrize("builtin_id", sorted(BUILTINS))
    def test_builtins_round_trip(self, builtin_id):
        """Test that every builtin survives export and reimport."""
        # Arrange
        sys = get_builtin(builtin_id).system()

        # Act
        again = parse_system(render_system(sys), f"{builtin_id}.sys")

        # Assert
        assert again.drift == sys.drift
        assert again.columns == sys.columns
        assert again.outputs == sys.outputs
        assert again.output_labels == sys.output_labels
        assert again.box == sys.box
