"""
Configuration Models

Pydantic models for toolkit parameters: tolerances, sampling, search budgets
and simulation defaults.
"""

import json
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, field_validator


class Tolerances(BaseModel):
    """Numeric thresholds."""

    tol_zero: float = Field(default=1e-9, gt=0.0)
    tol_rank: float = Field(default=1e-8, gt=0.0)
    no_transient: float = Field(default=1e-3, gt=0.0)

    @field_validator("tol_zero", "tol_rank", "no_transient")
    @classmethod
    def validate_small(cls, v: float) -> float:
        """Tolerances must be below 1."""
        if v >= 1.0:
            raise ValueError("Tolerance must be less than 1")
        return v


class SamplingConfig(BaseModel):
    """Random and low-discrepancy sampling settings."""

    seed: int = Field(default=0, ge=0)
    zero_test_trials: int = Field(default=64, gt=0, le=10_000)
    zero_test_retries: int = Field(default=8, gt=0, le=100)
    validity_samples: int = Field(default=256, gt=0, le=100_000)
    neighbour_probes: int = Field(default=6, ge=0, le=100)
    probe_radius: float = Field(default=1e-3, gt=0.0, lt=1.0)


class SearchBudget(BaseModel):
    """Bounds of the realizing-pair searches."""

    a_max: Optional[int] = Field(default=None, ge=1)
    l_max: int = Field(default=3, ge=0, le=8)
    degree_cap_margin: int = Field(default=2, ge=1)
    collect_families: bool = Field(default=False)
    verify_pairs: bool = Field(
        default=True,
        description="Cross-check found pairs with Lie derivatives on the prolonged system",
    )


class SimulationDefaults(BaseModel):
    """Defaults for scenarios that leave them out."""

    step: float = Field(default=1e-3, gt=0.0, le=1.0)
    transient_window: float = Field(default=2.0, gt=0.0)
    default_output_pole: float = Field(default=-2.0, lt=0.0)
    default_input_pole: float = Field(default=-10.0, lt=0.0)


class ToolkitParams(BaseModel):
    """Toolkit parameters configuration model."""

    tolerances: Tolerances = Field(default_factory=Tolerances)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    budget: SearchBudget = Field(default_factory=SearchBudget)
    simulation: SimulationDefaults = Field(default_factory=SimulationDefaults)
    log_level: str = Field(default="INFO")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level is valid."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of: {', '.join(valid_levels)}")
        return v.upper()

    def a_max_for(self, p: int) -> int:
        """Effective removed-set bound for p inputs (p - 1 by default)."""
        bound = p - 1 if self.budget.a_max is None else self.budget.a_max
        return max(0, min(bound, p - 1))

    def with_overrides(
        self,
        seed: Optional[int] = None,
        tol_zero: Optional[float] = None,
        tol_rank: Optional[float] = None,
        samples: Optional[int] = None,
        a_max: Optional[int] = None,
        l_max: Optional[int] = None,
    ) -> "ToolkitParams":
        """Copy with command-line overrides applied and re-validated."""
        data = self.model_dump()
        if seed is not None:
            data["sampling"]["seed"] = seed
        if samples is not None:
            data["sampling"]["validity_samples"] = samples
        if tol_zero is not None:
            data["tolerances"]["tol_zero"] = tol_zero
        if tol_rank is not None:
            data["tolerances"]["tol_rank"] = tol_rank
        if a_max is not None:
            data["budget"]["a_max"] = a_max
        if l_max is not None:
            data["budget"]["l_max"] = l_max
        return ToolkitParams(**data)

    @classmethod
    def load(cls, config_path: Path | str | None = None) -> "ToolkitParams":
        """Load toolkit parameters from config file.

        Args:
            config_path: Path to toolkit_params.json (defaults to config/toolkit_params.json)

        Returns:
            ToolkitParams: Validated configuration

        Raises:
            FileNotFoundError: If config file doesn't exist
            ConfigurationError: If the file fails schema validation
            ValueError: If model validation fails
        """
        from src.utils.validator import ConfigValidator

        if config_path is None:
            config_path = Path("config/toolkit_params.json")
        else:
            config_path = Path(config_path)

        if not config_path.exists():
            raise FileNotFoundError(
                f"Config file not found: {config_path}. "
                f"Copy {config_path.stem}.example.json to {config_path.name}"
            )

        config_data = ConfigValidator().validate_file(
            config_path, "toolkit_params_schema.json"
        )
        return cls(**config_data)
