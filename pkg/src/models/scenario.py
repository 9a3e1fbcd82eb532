"""
Scenario Models

Switching scenarios: which system and pattern, reference generators and gains
per channel, the switch schedule, and integration settings.
"""

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from src.models.system import IndexSet, ProlongationPattern

ScenarioMode = Literal["unified", "direct-shutdown"]


class ReferenceSpec(BaseModel):
    """
    Smooth reference generator of one channel.

    constant: value; polynomial: coefficients c0 + c1 t + c2 t^2 + ...;
    sinusoid: offset + amplitude sin(frequency t + phase).
    """

    kind: Literal["constant", "polynomial", "sinusoid"] = "constant"
    value: float = 0.0
    coefficients: list[float] = Field(default_factory=list)
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    offset: float = 0.0
    degrees: bool = Field(default=False, description="Values given in degrees")

    @model_validator(mode="after")
    def validate_kind(self) -> "ReferenceSpec":
        if self.kind == "polynomial" and not self.coefficients:
            raise ValueError("Polynomial reference needs at least one coefficient")
        return self


class ChannelGains(BaseModel):
    """Either explicit coefficients k^0..k^(m-1) or the poles to place."""

    coefficients: Optional[list[float]] = None
    poles: Optional[list[float]] = None

    @model_validator(mode="after")
    def validate_choice(self) -> "ChannelGains":
        if self.coefficients is not None and self.poles is not None:
            raise ValueError("Give coefficients or poles, not both")
        return self


class SwitchSpec(BaseModel):
    """Scheduled request to change the active vertex."""

    time: float = Field(..., ge=0.0)
    vertex: str = Field(..., description="Vertex label or key, e.g. 'DF' or 'A{2}|O{3}'")


class SwitchScenario(BaseModel):
    """Complete description of one closed-loop run."""

    name: str
    description: str = ""
    system: str = Field(..., description="Builtin id or path to a system file")
    output: Optional[str] = Field(default=None, description="Output name (default: first)")
    mode: ScenarioMode = "unified"
    pattern: ProlongationPattern
    removed: IndexSet = Field(
        default_factory=IndexSet, description="Inputs cut at the switch (direct-shutdown)"
    )
    reduced_pattern: Optional[ProlongationPattern] = Field(
        default=None, description="Pattern of the reduced controller (direct-shutdown)"
    )
    reduced_omitted: Optional[IndexSet] = Field(
        default=None, description="Omitted channels of the reduced controller (direct-shutdown)"
    )
    labels: dict[str, str] = Field(default_factory=dict, description="Vertex key -> label")
    initial_vertex: str = "A{}|O{}"
    switches: list[SwitchSpec] = Field(default_factory=list)
    dwell: float = Field(default=0.0, ge=0.0)
    references: dict[str, ReferenceSpec] = Field(default_factory=dict)
    gains: dict[str, ChannelGains] = Field(default_factory=dict)
    initial_state: dict[str, float] = Field(default_factory=dict)
    step: Optional[float] = Field(default=None, gt=0.0)
    duration: float = Field(..., gt=0.0)
    transient_window: Optional[float] = Field(default=None, gt=0.0)
    watch: list[str] = Field(default_factory=list, description="Channels for transient metrics")

    @field_validator("pattern", "reduced_pattern", mode="before")
    @classmethod
    def parse_pattern(cls, v: object) -> object:
        if isinstance(v, str):
            return ProlongationPattern.parse(v)
        if isinstance(v, list):
            return ProlongationPattern(orders=tuple(v))
        return v

    @field_validator("removed", "reduced_omitted", mode="before")
    @classmethod
    def parse_index_set(cls, v: object) -> object:
        if isinstance(v, str):
            return IndexSet.parse(v)
        if isinstance(v, list):
            return IndexSet.of(*v)
        return v

    @model_validator(mode="after")
    def validate_schedule(self) -> "SwitchScenario":
        times = [s.time for s in self.switches]
        if times != sorted(times):
            raise ValueError("Switch times must be non-decreasing")
        if any(t > self.duration for t in times):
            raise ValueError("Switch scheduled after the end of the run")
        if self.mode == "direct-shutdown":
            if len(self.switches) != 1:
                raise ValueError("Direct shutdown needs exactly one switch")
            if not self.removed:
                raise ValueError("Direct shutdown needs a non-empty removed set")
        return self

    @classmethod
    def load(cls, path: Path | str) -> "SwitchScenario":
        """
        Load and validate a scenario file.

        Raises:
            ScenarioError: If the file is missing, not JSON, or invalid
        """
        from src.utils.errors import ConfigurationError, ScenarioError
        from src.utils.validator import ConfigValidator

        try:
            data = ConfigValidator().validate_file(path, "scenario_schema.json")
        except ConfigurationError as e:
            raise ScenarioError(str(e)) from e
        try:
            return cls(**data)
        except ValueError as e:
            raise ScenarioError(f"Invalid scenario {Path(path).name}: {e}") from e

    @classmethod
    def from_text(cls, text: str, source: str = "<builtin>") -> "SwitchScenario":
        """Validate scenario JSON text (builtin scenarios)."""
        from src.utils.errors import ConfigurationError, ScenarioError
        from src.utils.validator import ConfigValidator

        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ScenarioError(f"Invalid JSON in {source}: {e}") from e
        try:
            ConfigValidator().validate(data, "scenario_schema.json")
            return cls(**data)
        except (ConfigurationError, ValueError) as e:
            raise ScenarioError(f"Invalid scenario {source}: {e}") from e
