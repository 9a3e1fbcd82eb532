"""
Unit tests for ToolkitParams.
"""

import json

import pytest
from pydantic import ValidationError

from src.models.config import ToolkitParams
from src.utils.errors import ConfigurationError


class TestToolkitParams:
    """Test cases for ToolkitParams defaults, overrides and loading."""

    def test_defaults(self):
        """Test the documented defaults."""
        # Act
        params = ToolkitParams()

        # Assert
        assert params.tolerances.tol_zero == 1e-9
        assert params.tolerances.tol_rank == 1e-8
        assert params.sampling.validity_samples == 256
        assert params.budget.l_max == 3
        assert params.budget.a_max is None
        assert params.simulation.step == 1e-3

    @pytest.mark.parametrize("a_max, p, expected", [(None, 3, 2), (1, 3, 1), (5, 3, 2), (None, 1, 0)])
    def test_a_max_for(self, a_max, p, expected):
        """Test the effective removed-set bound."""
        # Arrange
        params = ToolkitParams().with_overrides(a_max=a_max)

        # Assert
        assert params.a_max_for(p) == expected

    def test_overrides_revalidated(self):
        """Test that overrides go through validation."""
        # Act
        params = ToolkitParams().with_overrides(seed=4, samples=16, l_max=1, tol_rank=1e-6)

        # Assert
        assert params.sampling.seed == 4
        assert params.sampling.validity_samples == 16
        assert params.budget.l_max == 1
        assert params.tolerances.tol_rank == 1e-6
        with pytest.raises(ValidationError):
            ToolkitParams().with_overrides(tol_zero=2.0)

    def test_log_level_normalized(self):
        """Test that log levels are upper-cased and checked."""
        # Assert
        assert ToolkitParams(log_level="debug").log_level == "DEBUG"
        with pytest.raises(ValidationError, match="Log level must be one of"):
            ToolkitParams(log_level="loud")

    def test_load(self, tmp_path):
        """Test loading and validating a parameter file."""
        # Arrange
        path = tmp_path / "toolkit_params.json"
        path.write_text(json.dumps({"budget": {"l_max": 2}, "sampling": {"seed": 3}}))

        # Act
        params = ToolkitParams.load(path)

        # Assert
        assert params.budget.l_max == 2
        assert params.sampling.seed == 3
        assert params.tolerances.tol_zero == 1e-9

    def test_load_missing(self, tmp_path):
        """Test the hint for a missing parameter file."""
        # Act & Assert
        with pytest.raises(FileNotFoundError, match="toolkit_params.example.json"):
            ToolkitParams.load(tmp_path / "toolkit_params.json")

    def test_load_schema_violation(self, tmp_path):
        """Test that the schema is applied before the model."""
        # Arrange
        path = tmp_path / "toolkit_params.json"
        path.write_text(json.dumps({"budget": {"l_max": -1}}))

        # Act & Assert
        with pytest.raises(ConfigurationError, match="Value too small"):
            ToolkitParams.load(path)
