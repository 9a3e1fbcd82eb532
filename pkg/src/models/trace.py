"""
Simulation Trace Models

Uniform-grid closed-loop traces, switch events with the error laws active on
each side, and transient metrics.
"""

from typing import Any, Literal, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

SwitchOutcome = Literal["accepted", "rejected"]


class SwitchEvent(BaseModel):
    """One switch request, applied at a grid time."""

    time: float
    source: str
    target: str
    outcome: SwitchOutcome
    reason: Optional[str] = None
    pre_laws: dict[str, list[float]] = Field(
        default_factory=dict, description="Error-filter coefficients of channels active before"
    )
    post_laws: dict[str, list[float]] = Field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return self.outcome == "accepted"


class TraceEvent(BaseModel):
    """Event-log entry written next to the trace."""

    time: float
    kind: str
    detail: dict[str, Any] = Field(default_factory=dict)


class SimulationTrace(BaseModel):
    """
    Closed-loop trace on a uniform grid.

    Columns: t, prolonged states, u_<input>, v_<input>, vertex, and
    e_<channel> / e_<channel>_d<k> error jets.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    scenario: str
    step: float
    frame: pd.DataFrame
    switches: list[SwitchEvent] = Field(default_factory=list)
    events: list[TraceEvent] = Field(default_factory=list)
    completed: bool = True
    exit_time: Optional[float] = None
    exit_reason: Optional[str] = None

    @property
    def times(self) -> np.ndarray:
        return self.frame["t"].to_numpy(dtype=float)

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise KeyError(f"Trace has no column '{name}'")
        return self.frame[name].to_numpy(dtype=float)

    def row_at(self, t: float) -> int:
        """Index of the grid row nearest to t."""
        return int(np.argmin(np.abs(self.times - t)))

    def accepted_switches(self) -> list[SwitchEvent]:
        return [s for s in self.switches if s.accepted]

    def summary(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "rows": len(self.frame),
            "t_end": float(self.times[-1]) if len(self.frame) else None,
            "switches": [s.model_dump(exclude={"pre_laws", "post_laws"}) for s in self.switches],
            "completed": self.completed,
            "exit_reason": self.exit_reason,
        }


class TransientMetric(BaseModel):
    """sup |e - e_pred| over (t_s, t_s + window] for one channel and switch."""

    channel: str
    switch_time: float
    window: float = Field(..., gt=0.0)
    value: float = Field(..., ge=0.0)
    threshold: float = Field(..., gt=0.0)

    @property
    def no_transient(self) -> bool:
        return self.value <= self.threshold
