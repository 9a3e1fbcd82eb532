"""
Analysis Coordinator Module

Orchestrates the toolkit commands: loads parameters, resolves systems and
scenarios, runs classification, graph construction and simulation with
progress tracking, and persists every report through the ReportStore.
Negotiable-union listings are checkpointed per pattern and resume where an
interrupted run stopped.
"""

from pathlib import Path
from typing import Any, Optional

from src.analysis.classification import InputClassifier
from src.analysis.negotiation_graph import GraphBuilder, starred_rows
from src.builtins import builtin_for, load_scenario, resolve_system
from src.models.classification import ClassificationReport
from src.models.config import ToolkitParams
from src.models.graph import NegotiabilityGraph, UnionRow
from src.models.scenario import SwitchScenario
from src.models.system import OutputMap, ProlongationPattern, SystemDefinition
from src.models.trace import SimulationTrace, TransientMetric
from src.simulation.simulator import simulate, transient_metric
from src.simulation.trace_writer import write_trace
from src.system.indexing import enumerate_patterns
from src.utils.errors import ConfigurationError, ScenarioError
from src.utils.logger import bind_run, get_logger
from src.utils.progress_tracker import ProgressTracker
from src.utils.report_store import ReportStore

DEFAULT_CONFIG = Path("config/toolkit_params.json")


class AnalysisCoordinator:
    """
    Command orchestration with one correlation id per run.

    Parameters come from config/toolkit_params.json when present (defaults
    otherwise); command-line overrides are applied on top.
    """

    def __init__(
        self,
        config_path: str | Path | None = None,
        report_dir: str | Path = "results",
        correlation_id: str | None = None,
        overrides: Optional[dict[str, Any]] = None,
        quiet: bool = False,
    ):
        """
        Initialize the coordinator.

        Args:
            config_path: Toolkit parameters file; an explicit path must exist
            report_dir: Directory for JSONL reports
            correlation_id: Correlation ID for logging (auto-generated if None)
            overrides: Keyword overrides for ToolkitParams.with_overrides
            quiet: Suppress progress bars

        Raises:
            FileNotFoundError: If an explicit config path does not exist
            ConfigurationError: If the config fails validation
        """
        self.config_path = Path(config_path) if config_path is not None else None
        self.params = self._load_config().with_overrides(**(overrides or {}))
        self.store = ReportStore(report_dir)
        self.progress_tracker = ProgressTracker(quiet=quiet)
        self.correlation_id = bind_run(correlation_id)
        self.logger = get_logger(phase="coordinator", component="analysis_coordinator")
        self.logger.info(
            "coordinator_initialized",
            config_path=str(self.config_path) if self.config_path else None,
            report_dir=str(report_dir),
            seed=self.params.sampling.seed,
        )

    def _load_config(self) -> ToolkitParams:
        if self.config_path is not None:
            return ToolkitParams.load(self.config_path)
        if DEFAULT_CONFIG.exists():
            return ToolkitParams.load(DEFAULT_CONFIG)
        return ToolkitParams()

    # -- resolution --------------------------------------------------------

    def resolve(
        self, system_ref: str, output: Optional[str] = None
    ) -> tuple[SystemDefinition, OutputMap, str]:
        """System, output map and output name for a builtin id or file path."""
        sys = resolve_system(system_ref)
        builtin = builtin_for(sys)
        name = output or (builtin.output if builtin else None) or next(iter(sys.outputs), None)
        if name is None:
            raise ConfigurationError(f"System {sys.name} declares no outputs")
        return sys, sys.output_map(name), name

    def labels_for(self, sys: SystemDefinition) -> dict[str, str]:
        builtin = builtin_for(sys)
        return dict(builtin.labels) if builtin else {}

    # -- commands ----------------------------------------------------------

    def classify(
        self, system_ref: str, output: Optional[str] = None, families: bool = False
    ) -> ClassificationReport:
        sys, y, name = self.resolve(system_ref, output)
        params = self.params
        if families:
            data = params.model_dump()
            data["budget"]["collect_families"] = True
            params = ToolkitParams(**data)
        report = InputClassifier(sys, y, params, output_name=name).classify(self.progress_tracker)
        key = f"classify-{sys.name}"
        self.store.clear(key)
        self.store.save_batch(key, 0, [row.summary() for row in report.rows])
        self.store.mark_report_complete(key)
        self.logger.info(
            "classification_saved",
            system=sys.name,
            report=str(self.store.batch_file(key, 0)),
            exit_code=report.exit_code,
        )
        return report

    def graph(
        self,
        system_ref: str,
        pattern: Optional[ProlongationPattern] = None,
        output: Optional[str] = None,
    ) -> NegotiabilityGraph:
        """
        Raises:
            ConfigurationError: If no pattern is given and the system has no default
            NotCommonProlongationError: If the pattern is not in L^∅
        """
        sys, y, name = self.resolve(system_ref, output)
        builtin = builtin_for(sys)
        pattern = pattern or (builtin.pattern if builtin else None)
        if pattern is None:
            raise ConfigurationError(f"No prolongation pattern given for {sys.name}")
        builder = GraphBuilder(sys, y, pattern, self.params, name, self.labels_for(sys))
        graph = builder.build(self.progress_tracker)
        key = f"graph-{sys.name}-{'_'.join(str(o) for o in pattern.orders)}"
        self.store.clear(key)
        self.store.save_batch(key, 0, [v.summary() for v in graph.vertices])
        self.store.save_batch(key, 1, [e.model_dump(mode="json") for e in graph.edges])
        self.store.mark_report_complete(key)
        return graph

    def union(self, system_ref: str, output: Optional[str] = None) -> list[UnionRow]:
        """N_star over every pattern within l_max, one checkpoint batch per pattern."""
        sys, y, name = self.resolve(system_ref, output)
        patterns = list(enumerate_patterns(sys.p, self.params.budget.l_max))
        key = f"union-{sys.name}-l{self.params.budget.l_max}"
        if self.store.is_report_complete(key):
            self.store.clear(key)
        start = self.store.get_resume_point(key)
        if start > 0:
            self.logger.info("union_resumed", batches_completed=start, total=len(patterns))

        rows = [UnionRow(**r) for r in self.store.load_batches(key, before=start)]
        screen = InputClassifier(sys, y, self.params, output_name=name)
        labels = self.labels_for(sys)
        title = f"Negotiable union of {sys.name}"
        with self.progress_tracker.phase(title, total=len(patterns), done=start) as bar:
            for batch_id in range(start, len(patterns)):
                found = starred_rows(sys, y, patterns[batch_id], self.params, name, labels, screen)
                self.store.save_batch(key, batch_id, found)
                rows.extend(found)
                bar.advance(patterns[batch_id].label())
        self.store.mark_report_complete(key)
        self.logger.info("union_complete", system=sys.name, rows=len(rows), patterns=len(patterns))
        return rows

    def scenario(self, ref: str) -> tuple[SwitchScenario, SystemDefinition, OutputMap]:
        """Scenario with builtin vertex labels merged under its own."""
        scenario = load_scenario(ref)
        sys, y, name = self.resolve(scenario.system, scenario.output)
        labels = {**self.labels_for(sys), **scenario.labels}
        return scenario.model_copy(update={"labels": labels, "output": name}), sys, y

    def simulate(
        self,
        ref: str,
        csv_path: Optional[str | Path] = None,
        plot_path: Optional[str | Path] = None,
    ) -> tuple[SimulationTrace, list[TransientMetric]]:
        """
        Run a scenario, write its trace, and measure transients on the watched
        channels at every accepted switch.
        """
        scenario, sys, y = self.scenario(ref)
        trace = simulate(sys, y, scenario, self.params)
        if csv_path is not None:
            write_trace(trace, csv_path, plot_path)
        metrics = self.metrics(trace, scenario)
        key = f"simulate-{scenario.name}"
        self.store.clear(key)
        self.store.save_batch(key, 0, [trace.summary()])
        self.store.save_batch(key, 1, metrics)
        self.store.mark_report_complete(key)
        return trace, metrics

    def metrics(self, trace: SimulationTrace, scenario: SwitchScenario) -> list[TransientMetric]:
        window = scenario.transient_window or self.params.simulation.transient_window
        threshold = self.params.tolerances.no_transient
        out = []
        for event in trace.accepted_switches():
            if event.reason == "self":
                continue
            for channel in scenario.watch:
                try:
                    out.append(transient_metric(trace, channel, event.time, window, threshold))
                except ScenarioError as e:
                    self.logger.warning("metric_skipped", channel=channel, time=event.time, reason=str(e))
        return out
