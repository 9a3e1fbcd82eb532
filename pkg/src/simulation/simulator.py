"""
Closed-Loop Simulation

Runs switching scenarios on the prolonged system: the unified controller with
a switch schedule, or the direct-shutdown baseline that cuts inputs and hands
over to a fresh reduced controller. Also computes transient metrics and
time-constant fits on the resulting traces.

Example Usage:
    scenario = SwitchScenario.load("scenarios/motivating_unified.json")
    trace = simulate(system, system.output_map(), scenario, params)
    metric = transient_metric(trace, "x3", 8.0, window=2.0, threshold=1e-3)
"""

from collections.abc import Sequence
from typing import Any, Optional

import numpy as np
import pandas as pd
from scipy.linalg import expm

from src.analysis.classification import InputClassifier
from src.analysis.negotiation_graph import GraphBuilder
from src.control.controller import UnifiedController
from src.control.gains import GainSet, make_gains
from src.control.references import ReferenceSignal, build_references
from src.models.classification import RealizingPair
from src.models.config import ToolkitParams
from src.models.graph import MeldVertex, NegotiabilityGraph, vertex_key
from src.models.scenario import SwitchScenario, SwitchSpec
from src.models.system import IndexSet, OutputMap, ProlongationPattern, ProlongedSystem, SystemDefinition
from src.models.trace import SimulationTrace, SwitchEvent, TraceEvent, TransientMetric
from src.symbolic.expression import compile_vector
from src.system.indexing import slice_by
from src.system.prolongation import remove_inputs
from src.simulation.integrator import integrate
from src.utils.errors import ScenarioError
from src.utils.logger import get_logger

logger = get_logger(phase="simulation", component="simulator")


class ControlledLoop:
    """Prolonged dynamics closed by a UnifiedController, with a switch schedule."""

    def __init__(
        self,
        controller: UnifiedController,
        schedule: Sequence[SwitchSpec] = (),
        h: float = 1e-3,
        t0: float = 0.0,
        zeroed_inputs: Sequence[str] = (),
        vertex_label: Optional[str] = None,
    ):
        psys = controller.psys
        self.controller = controller
        self.psys = psys
        self.state_names = list(psys.state_names)
        self.switches: list[SwitchEvent] = []
        self.events: list[TraceEvent] = []
        self.zeroed_inputs = list(zeroed_inputs)
        self.vertex_label = vertex_label
        self._drift = compile_vector(psys.drift, psys.state_names)
        self._columns = compile_vector([e for col in psys.columns for e in col], psys.state_names)
        k0 = int(round(t0 / h))
        self._schedule: dict[int, list[SwitchSpec]] = {}
        for spec in schedule:
            # switches snap to the grid
            self._schedule.setdefault(int(round(spec.time / h)) - k0, []).append(spec)
        self._cache: Optional[tuple[float, np.ndarray, np.ndarray]] = None

    def _control(self, t: float, x: np.ndarray) -> np.ndarray:
        if self._cache is not None:
            t_c, x_c, v_c = self._cache
            if t_c == t and np.array_equal(x_c, x):
                return v_c
        v = self.controller.control(t, x)
        self._cache = (t, x.copy(), v)
        return v

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        v = self._control(t, x)
        G = self._columns(x)[0].reshape(self.psys.m, self.psys.n)
        return self._drift(x)[0] + G.T @ v

    def on_grid(self, k: int, t: float, x: np.ndarray) -> np.ndarray:
        for spec in self._schedule.get(k, []):
            event = self.controller.switch(spec.vertex, t, x)
            self.switches.append(event)
            self.events.append(
                TraceEvent(
                    time=t,
                    kind=f"switch_{event.outcome}",
                    detail={"source": event.source, "target": event.target, "reason": event.reason},
                )
            )
        return x

    def record(self, t: float, x: np.ndarray) -> dict[str, Any]:
        c = self.controller
        v = self._control(t, x)
        u = c.physical_inputs(x, v)
        row: dict[str, Any] = dict(zip(self.state_names, (float(s) for s in x)))
        for name in [*self.psys.base.inputs, *self.zeroed_inputs]:
            row[f"u_{name}"] = 0.0
        for name, value in zip(c.input_names, u):
            row[f"u_{name}"] = float(value)
        for name, value in zip(c.input_names, v):
            row[f"v_{name}"] = float(value)
        row["vertex"] = self.vertex_label or c.state.label
        for name, jets in c.errors(t, x).items():
            for k, value in enumerate(jets):
                row[f"e_{name}" if k == 0 else f"e_{name}_d{k}"] = float(value)
        return row


def _gains(
    vertex: MeldVertex, psys: ProlongedSystem, scenario: SwitchScenario, params: ToolkitParams
) -> GainSet:
    profile = vertex.profile
    return make_gains(
        {name: int(r or 0) for name, r in zip(profile.channels, profile.r)},
        scenario.gains,
        default_pole=params.simulation.default_output_pole,
        input_orders={psys.base.inputs[j - 1]: psys.pattern.order(j) for j in psys.surviving},
        default_input_pole=params.simulation.default_input_pole,
    )


def _initial_state(psys: ProlongedSystem, scenario: SwitchScenario) -> np.ndarray:
    x0 = np.asarray(psys.point, dtype=float)
    index = {name: k for k, name in enumerate(psys.state_names)}
    unknown = [name for name in scenario.initial_state if name not in index]
    if unknown:
        raise ScenarioError(f"Initial state names not in {psys.state_names}: {unknown}")
    for name, value in scenario.initial_state.items():
        x0[index[name]] = value
    return x0


def _controller(
    graph: NegotiabilityGraph,
    psys: ProlongedSystem,
    scenario: SwitchScenario,
    params: ToolkitParams,
    initial: str,
) -> UnifiedController:
    full = graph.vertex(vertex_key(IndexSet(), IndexSet()))
    return UnifiedController(
        graph,
        psys,
        _gains(full, psys, scenario, params),
        build_references(scenario.references, list(full.profile.channels)),
        dwell=scenario.dwell,
        initial=initial,
        tol_rank=params.tolerances.tol_rank,
        input_references={
            name: ReferenceSignal(spec)
            for name, spec in scenario.references.items()
            if name in psys.base.inputs
        },
    )


def _step(scenario: SwitchScenario, params: ToolkitParams) -> float:
    return scenario.step or params.simulation.step


def run_unified(
    sys: SystemDefinition,
    y: OutputMap,
    scenario: SwitchScenario,
    params: Optional[ToolkitParams] = None,
    graph: Optional[NegotiabilityGraph] = None,
) -> SimulationTrace:
    """
    One linearizing law on Sigma^(l); switches move along graph edges.

    Raises:
        NotCommonProlongationError: If the scenario pattern is not in L^∅
        ValidityExitError: If the closed loop leaves the validity set
    """
    params = params or ToolkitParams()
    builder = GraphBuilder(sys, y, scenario.pattern, params, scenario.output or "y", scenario.labels)
    graph = graph or builder.build()
    controller = _controller(graph, builder.psys, scenario, params, scenario.initial_vertex)
    h = _step(scenario, params)
    loop = ControlledLoop(controller, scenario.switches, h=h)
    trace = integrate(loop, _initial_state(builder.psys, scenario), scenario.duration, h, name=scenario.name)
    logger.info(
        "simulation_complete",
        scenario=scenario.name,
        switches=[(s.time, s.target, s.outcome) for s in trace.switches],
    )
    return trace


def _single_vertex_graph(
    sys: SystemDefinition, y: OutputMap, pattern: ProlongationPattern, params: ToolkitParams, label: str
) -> tuple[NegotiabilityGraph, ProlongedSystem]:
    builder = GraphBuilder(sys, y, pattern, params)
    vertex = builder.check_common_prolongation().model_copy(update={"label": label})
    graph = NegotiabilityGraph(
        system=sys.name,
        output="y",
        pattern=pattern,
        state_names=list(builder.psys.state_names),
        vertices=[vertex],
        starred=[vertex.key],
    )
    return graph, builder.psys


def reduced_pair_for(
    sys: SystemDefinition,
    y: OutputMap,
    scenario: SwitchScenario,
    params: ToolkitParams,
) -> RealizingPair:
    """Reduced pair from the scenario, or the first one the classifier finds."""
    removed = scenario.removed
    if scenario.reduced_pattern is not None and scenario.reduced_omitted is not None:
        return RealizingPair(
            removed=removed,
            omitted=scenario.reduced_omitted,
            pattern=scenario.reduced_pattern,
            kind="reduced",
        )
    pair = InputClassifier(sys, y, params).check_dexterity(removed)
    if pair is None:
        raise ScenarioError(f"{removed.label()} is not a dexterity subset within the search budget")
    return pair


def run_direct_shutdown(
    sys: SystemDefinition,
    y: OutputMap,
    A: IndexSet,
    pair: Optional[RealizingPair],
    scenario: SwitchScenario,
    params: Optional[ToolkitParams] = None,
) -> SimulationTrace:
    """
    Baseline: full-task controller on Sigma^(l) until t_s, then inputs A are
    clamped to zero and a fresh reduced controller on Sigma_{A-bar}^(l~) takes
    over. New stacks start at the current input value with zero derivatives.

    Raises:
        ScenarioError: If the pair does not belong to A
        ValidityExitError: If either phase leaves its validity set
    """
    params = params or ToolkitParams()
    h = _step(scenario, params)
    graph1, psys1 = _single_vertex_graph(sys, y, scenario.pattern, params, "full")
    controller1 = _controller(graph1, psys1, scenario, params, graph1.vertices[0].key)
    x0 = _initial_state(psys1, scenario)

    if not A or not scenario.switches:
        return integrate(ControlledLoop(controller1, h=h), x0, scenario.duration, h, name=scenario.name)
    if pair is None or pair.removed != A:
        raise ScenarioError(f"Direct shutdown of {A.label()} needs a reduced pair for {A.label()}")
    if pair.pattern.p != sys.p or not pair.pattern.respects(A):
        raise ScenarioError(
            f"Reduced pattern {pair.pattern.label()} must have {sys.p} entries, zero on {A.label()}"
        )

    t_s = round(scenario.switches[0].time / h) * h
    first = integrate(ControlledLoop(controller1, h=h), x0, t_s, h, name=scenario.name)
    last = first.frame.iloc[-1]

    kept = A.complement(sys.p)
    reduced_sys = remove_inputs(sys, A)
    kept_channels = pair.omitted.complement(len(y))
    reduced_y = OutputMap(
        names=slice_by(y.names, kept_channels),
        exprs=slice_by(y.exprs, kept_channels),
        tags=slice_by(y.tags, kept_channels),
    )
    reduced_pattern = ProlongationPattern(orders=tuple(slice_by(pair.pattern.orders, kept)))
    label = f"reduced A{A.label()}"
    graph2, psys2 = _single_vertex_graph(reduced_sys, reduced_y, reduced_pattern, params, label)
    controller2 = _controller(graph2, psys2, scenario, params, graph2.vertices[0].key)

    x_switch = []
    for name in psys2.state_names:
        if name in last.index and name in psys1.state_names:
            x_switch.append(float(last[name]))
        elif name.endswith("_d0"):
            x_switch.append(float(last[f"u_{name[:-3]}"]))
        else:
            x_switch.append(0.0)

    loop2 = ControlledLoop(
        controller2,
        h=h,
        t0=t_s,
        zeroed_inputs=[sys.inputs[i - 1] for i in A],
    )
    second = integrate(loop2, x_switch, scenario.duration, h, t0=t_s, name=scenario.name)

    event = SwitchEvent(
        time=t_s,
        source="full",
        target=label,
        outcome="accepted",
        reason="direct-shutdown",
        pre_laws=controller1.laws(),
        post_laws=controller2.laws(),
    )
    frame = pd.concat([first.frame.iloc[:-1], second.frame], ignore_index=True, sort=False)
    logger.info(
        "direct_shutdown_complete",
        scenario=scenario.name,
        removed=A.indices,
        reduced_pattern=reduced_pattern.orders,
        omitted=pair.omitted.indices,
    )
    return SimulationTrace(
        scenario=scenario.name,
        step=h,
        frame=frame,
        switches=[event],
        events=[TraceEvent(time=t_s, kind="direct_shutdown", detail={"removed": list(A.indices)})],
    )


def simulate(
    sys: SystemDefinition,
    y: OutputMap,
    scenario: SwitchScenario,
    params: Optional[ToolkitParams] = None,
) -> SimulationTrace:
    """Run a scenario in its mode."""
    params = params or ToolkitParams()
    if scenario.mode == "direct-shutdown":
        pair = reduced_pair_for(sys, y, scenario, params)
        return run_direct_shutdown(sys, y, scenario.removed, pair, scenario, params)
    return run_unified(sys, y, scenario, params)


def companion(coefficients: Sequence[float]) -> np.ndarray:
    """State matrix of e^(m) + k^(m-1) e^(m-1) + ... + k^0 e = 0 in (e, ..., e^(m-1))."""
    m = len(coefficients)
    C = np.zeros((m, m))
    C[:-1, 1:] = np.eye(m - 1)
    C[-1, :] = -np.asarray(coefficients, dtype=float)
    return C


def error_jets(trace: SimulationTrace, channel: str, row: int, order: int) -> np.ndarray:
    names = [f"e_{channel}" if k == 0 else f"e_{channel}_d{k}" for k in range(order)]
    missing = [n for n in names if n not in trace.frame.columns]
    if missing:
        raise ScenarioError(f"Trace lacks error jets {missing}")
    return np.array([float(trace.frame[n].iloc[row]) for n in names])


def transient_metric(
    trace: SimulationTrace,
    channel: str,
    t_s: float,
    window: float = 2.0,
    threshold: float = 1e-3,
) -> TransientMetric:
    """
    sup over (t_s, t_s + window] of |e(t) - e_pred(t)|, where e_pred continues
    the pre-switch error law from the error jets at t_s.

    Raises:
        ScenarioError: If no accepted switch sits at t_s, or the channel is
            inactive on both sides of it
    """
    event = next(
        (s for s in trace.accepted_switches() if abs(s.time - t_s) <= trace.step / 2 + 1e-12),
        None,
    )
    if event is None:
        raise ScenarioError(f"No accepted switch at t={t_s}")
    law = event.pre_laws.get(channel, event.post_laws.get(channel))
    if law is None:
        raise ScenarioError(f"Channel '{channel}' is inactive on both sides of the switch at t={t_s}")

    times = trace.times
    start = trace.row_at(event.time)
    mask = (times > times[start] + 1e-12) & (times <= times[start] + window + 1e-9)
    actual = trace.column(f"e_{channel}")[mask]
    if len(law) == 0:
        predicted = np.zeros_like(actual)
    else:
        E0 = error_jets(trace, channel, start, len(law))
        C = companion(law)
        predicted = np.array([(expm(C * (t - times[start])) @ E0)[0] for t in times[mask]])
    deviation = np.abs(actual - predicted)
    if deviation.size == 0 or np.all(np.isnan(deviation)):
        raise ScenarioError(f"No samples of e_{channel} after t={t_s}")
    value = float(np.nanmax(deviation))
    logger.info("transient_metric", channel=channel, switch_time=event.time, value=value)
    return TransientMetric(
        channel=channel, switch_time=event.time, window=window, value=value, threshold=threshold
    )


def fit_time_constant(trace: SimulationTrace, column: str, t0: float, t1: float) -> float:
    """
    Time constant of a decaying column over [t0, t1] by log-linear least squares.

    Raises:
        ValueError: If the window has fewer than two nonzero samples or the
            signal does not decay
    """
    times = trace.times
    values = np.abs(trace.column(column))
    mask = (times >= t0) & (times <= t1) & (values > 0) & np.isfinite(values)
    if mask.sum() < 2:
        raise ValueError(f"Not enough nonzero samples of {column} in [{t0}, {t1}]")
    slope, _ = np.polyfit(times[mask], np.log(values[mask]), 1)
    if slope >= 0:
        raise ValueError(f"{column} does not decay over [{t0}, {t1}]")
    return float(-1.0 / slope)
