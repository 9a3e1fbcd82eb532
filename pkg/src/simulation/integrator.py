"""
Fixed-Step Integration

Classical RK4 on a uniform grid. Closed loops are evaluated at every stage
point; grid-time events (switches) are applied before each step is recorded.
"""

from collections.abc import Callable, Sequence
from typing import Any, Protocol

import numpy as np
import pandas as pd

from src.models.trace import SimulationTrace, SwitchEvent, TraceEvent
from src.utils.errors import SingularDecouplingError, ValidityExitError
from src.utils.logger import get_logger

logger = get_logger(phase="simulation", component="rk4")

Rhs = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(rhs: Rhs, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, x)
    k2 = rhs(t + h / 2, x + h * k1 / 2)
    k3 = rhs(t + h / 2, x + h * k2 / 2)
    k4 = rhs(t + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


class ClosedLoop(Protocol):
    """What `integrate` needs from a closed loop."""

    state_names: list[str]
    switches: list[SwitchEvent]
    events: list[TraceEvent]

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray: ...

    def on_grid(self, k: int, t: float, x: np.ndarray) -> np.ndarray: ...

    def record(self, t: float, x: np.ndarray) -> dict[str, Any]: ...


class OdeLoop:
    """Open-loop x' = f(t, x) without events."""

    def __init__(self, f: Rhs, state_names: Sequence[str]):
        self.f = f
        self.state_names = list(state_names)
        self.switches: list[SwitchEvent] = []
        self.events: list[TraceEvent] = []

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.f(t, x), dtype=float)

    def on_grid(self, k: int, t: float, x: np.ndarray) -> np.ndarray:
        return x

    def record(self, t: float, x: np.ndarray) -> dict[str, Any]:
        return dict(zip(self.state_names, (float(v) for v in x)))


def _trace(
    name: str, h: float, rows: list[dict[str, Any]], loop: ClosedLoop
) -> SimulationTrace:
    return SimulationTrace(
        scenario=name,
        step=h,
        frame=pd.DataFrame(rows),
        switches=list(loop.switches),
        events=list(loop.events),
    )


def integrate(
    loop: ClosedLoop,
    x0: Sequence[float],
    t_end: float,
    h: float,
    t0: float = 0.0,
    name: str = "run",
) -> SimulationTrace:
    """
    RK4 from t0 to t_end with step h; t_end snaps to the grid.

    Raises:
        ValueError: If h <= 0 or t_end < t0
        ValidityExitError: On a singular selected decoupling matrix or a
            non-finite state; the partial trace up to the last valid row is
            attached
    """
    if h <= 0:
        raise ValueError(f"Step must be positive, got {h}")
    if t_end < t0:
        raise ValueError(f"End time {t_end} before start time {t0}")
    steps = int(round((t_end - t0) / h))
    x = np.asarray(x0, dtype=float).copy()
    rows: list[dict[str, Any]] = []
    for k in range(steps + 1):
        t = t0 + k * h
        try:
            x = loop.on_grid(k, t, x)
            row = loop.record(t, x)
            rows.append({"t": t, **row})
            if k == steps:
                break
            x_next = rk4_step(loop.rhs, t, x, h)
        except SingularDecouplingError as e:
            logger.error("validity_exit", time=t, reason=str(e))
            trace = _trace(name, h, rows, loop)
            trace.completed, trace.exit_time, trace.exit_reason = False, t, str(e)
            raise ValidityExitError(str(e), time=t, trace=trace) from e
        if not np.all(np.isfinite(x_next)):
            logger.error("validity_exit", time=t + h, reason="non-finite state")
            trace = _trace(name, h, rows, loop)
            trace.completed, trace.exit_time, trace.exit_reason = False, t + h, "non-finite state"
            raise ValidityExitError("Non-finite state", time=t + h, trace=trace)
        x = x_next
    logger.debug("integration_complete", name=name, steps=steps, h=h)
    return _trace(name, h, rows, loop)
