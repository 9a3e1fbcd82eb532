"""
Command-Line Interface

    python -m src classify --builtin motivating_square
    python -m src graph --builtin rigid_body --ell 2,2,2,0,0,0 --dot table1.dot
    python -m src simulate --builtin motivating_unified --csv unified.csv --plot unified.gp
    python -m src check --only 1,2,3
    python -m src export-builtin mecanum --out mecanum.sys

Exit codes: 0 success, 1 error, 2 success with budget warnings.
Reports go to stdout, logs and progress bars to stderr.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import jsonlines
import typer
from rich.console import Console
from rich.table import Table

from src.acceptance import run_suite
from src.analysis.negotiation_graph import export_dot
from src.builtins import BUILTINS, get_builtin
from src.coordinator import AnalysisCoordinator
from src.models.classification import ClassificationReport
from src.models.graph import NegotiabilityGraph, UnionRow
from src.models.system import ProlongationPattern
from src.models.trace import SimulationTrace, TransientMetric
from src.simulation.trace_writer import write_trace
from src.system.dsl import render_system
from src.utils.errors import ToolkitError, ValidityExitError
from src.utils.logger import configure_logging

app = typer.Typer(
    name="dexterity",
    help="Dexterity, redundant and essential input classification for input-affine systems.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()
err_console = Console(stderr=True)


@dataclass
class CliState:
    seed: Optional[int] = None
    tol_zero: Optional[float] = None
    tol_rank: Optional[float] = None
    samples: Optional[int] = None
    config: Optional[Path] = None
    report_dir: Path = Path("results")
    quiet: bool = False

    def coordinator(self, a_max: Optional[int] = None, l_max: Optional[int] = None) -> AnalysisCoordinator:
        overrides: dict[str, Any] = {
            "seed": self.seed,
            "tol_zero": self.tol_zero,
            "tol_rank": self.tol_rank,
            "samples": self.samples,
            "a_max": a_max,
            "l_max": l_max,
        }
        return AnalysisCoordinator(
            config_path=self.config,
            report_dir=self.report_dir,
            overrides=overrides,
            quiet=self.quiet,
        )


def _fail(message: str) -> typer.Exit:
    err_console.print(f"[bold red]error:[/bold red] {message}")
    return typer.Exit(code=1)


def _reference(path: Optional[str], builtin: Optional[str], what: str) -> str:
    if (path is None) == (builtin is None):
        raise typer.BadParameter(f"Give either a {what} file or --builtin, not both or neither")
    return builtin if builtin is not None else path  # type: ignore[return-value]


@app.callback()
def main(
    ctx: typer.Context,
    seed: Optional[int] = typer.Option(None, "--seed", help="Sampling seed"),
    tol_zero: Optional[float] = typer.Option(None, "--tol-zero", help="Zero-test tolerance"),
    tol_rank: Optional[float] = typer.Option(None, "--tol-rank", help="Decoupling-measure threshold"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Validity samples per output"),
    config: Optional[Path] = typer.Option(None, "--config", help="Toolkit parameters JSON"),
    report_dir: Path = typer.Option(Path("results"), "--report-dir", help="Directory for JSONL reports"),
    log_level: str = typer.Option("WARNING", "--log-level", help="DEBUG, INFO, WARNING or ERROR"),
    log_file: str = typer.Option("logs/dexterity.log", "--log-file"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="No progress bars"),
) -> None:
    configure_logging(log_file=log_file, log_level=log_level)
    ctx.obj = CliState(
        seed=seed,
        tol_zero=tol_zero,
        tol_rank=tol_rank,
        samples=samples,
        config=config,
        report_dir=report_dir,
        quiet=quiet,
    )


# -- classify ----------------------------------------------------------------


def classification_table(report: ClassificationReport) -> Table:
    table = Table(title=f"{report.system} / {report.output} ({', '.join(report.channels)})")
    table.add_column("input")
    table.add_column("label")
    table.add_column("delta", justify="right")
    for i, name in enumerate(report.inputs, start=1):
        delta = report.min_loss.get(i)
        table.add_row(name, report.labels.get(name, "-"), "-" if delta is None else str(delta))
    return table


def pairs_table(report: ClassificationReport) -> Table:
    table = Table(title="Dexterity subsets")
    for column in ("A", "O", "pattern", "kind", "channels", "exclusions"):
        table.add_column(column)
    for pair in report.dexterity_family:
        table.add_row(
            pair.removed.label(),
            pair.omitted.label(),
            pair.pattern.label(),
            pair.kind,
            ", ".join(pair.channels),
            ", ".join(pair.factors) or "-",
        )
    return table


@app.command()
def classify(
    ctx: typer.Context,
    system: Optional[str] = typer.Argument(None, help="System definition file"),
    builtin: Optional[str] = typer.Option(None, "--builtin", help=f"One of: {', '.join(BUILTINS)}"),
    output: Optional[str] = typer.Option(None, "--output", help="Output name (default: first)"),
    amax: Optional[int] = typer.Option(None, "--amax", min=1, help="Largest removed set"),
    lmax: Optional[int] = typer.Option(None, "--lmax", min=0, help="Largest prolongation order"),
    families: bool = typer.Option(False, "--families", help="Collect full admissible families"),
    report: Optional[Path] = typer.Option(None, "--report", help="Write the report as JSONL"),
) -> None:
    """Label every input redundant, dexterity or essential; list D and delta."""
    state: CliState = ctx.obj
    ref = _reference(system, builtin, "system")
    try:
        result = state.coordinator(a_max=amax, l_max=lmax).classify(ref, output, families)
    except ToolkitError as e:
        raise _fail(str(e)) from e

    console.print(classification_table(result))
    console.print(pairs_table(result))
    console.print(f"D = {{{', '.join(s.label() for s in result.dexterity_sets())}}}")
    for warning in result.warnings:
        err_console.print(f"[yellow]warning:[/yellow] {warning}")
    if report is not None:
        with jsonlines.open(report, mode="w") as writer:
            writer.write(result.summary())
            writer.write_all(row.summary() for row in result.rows)
    raise typer.Exit(code=result.exit_code)


# -- graph -------------------------------------------------------------------


def graph_table(graph: NegotiabilityGraph) -> Table:
    table = Table(title=f"{graph.system} / {graph.output} l={graph.pattern.label()}")
    for column in ("vertex", "key", "channels", "r", "starred", "exclusions"):
        table.add_column(column)
    for v in graph.vertices:
        table.add_row(
            v.label or "-",
            v.key,
            ", ".join(v.profile.channels),
            ",".join(str(r) for r in v.profile.r),
            "*" if graph.in_starred(v.key) else "",
            ", ".join(v.validity.factors) or "-",
        )
    return table


def union_table(rows: list[UnionRow]) -> Table:
    table = Table(title="Negotiable union")
    for column in ("pattern", "A", "O", "label"):
        table.add_column(column)
    for row in rows:
        table.add_row(
            row.pattern.label(),
            row.removed.label(),
            row.omitted.label(),
            row.label or "-",
        )
    return table


@app.command()
def graph(
    ctx: typer.Context,
    system: Optional[str] = typer.Argument(None, help="System definition file"),
    builtin: Optional[str] = typer.Option(None, "--builtin", help=f"One of: {', '.join(BUILTINS)}"),
    ell: Optional[str] = typer.Option(None, "--ell", help="Prolongation pattern, e.g. 2,2,2,0,0,0"),
    output: Optional[str] = typer.Option(None, "--output"),
    lmax: Optional[int] = typer.Option(None, "--lmax", min=0),
    dot: Optional[Path] = typer.Option(None, "--dot", help="Write the graph as DOT"),
    union: bool = typer.Option(False, "--union", help="List the negotiable union over all patterns"),
) -> None:
    """Realizable melds, compatibility edges and starred component of one pattern."""
    state: CliState = ctx.obj
    ref = _reference(system, builtin, "system")
    try:
        pattern = ProlongationPattern.parse(ell) if ell else None
    except ValueError as e:
        raise typer.BadParameter(f"Invalid pattern '{ell}': {e}") from e
    try:
        coordinator = state.coordinator(l_max=lmax)
        if union:
            console.print(union_table(coordinator.union(ref, output)))
            return
        result = coordinator.graph(ref, pattern, output)
    except ToolkitError as e:
        raise _fail(str(e)) from e

    console.print(graph_table(result))
    console.print(f"{len(result.edges)} edges; starred component: {len(result.starred)} vertices")
    if dot is not None:
        dot.write_text(export_dot(result), encoding="utf-8")
        err_console.print(f"DOT written to {dot}")


# -- simulate ----------------------------------------------------------------


def switch_table(trace: SimulationTrace) -> Table:
    table = Table(title=f"Switches of {trace.scenario}")
    for column in ("t", "from", "to", "outcome", "reason"):
        table.add_column(column)
    for s in trace.switches:
        table.add_row(f"{s.time:g}", s.source, s.target, s.outcome, s.reason or "-")
    return table


def metric_table(metrics: list[TransientMetric]) -> Table:
    table = Table(title="Transient metrics")
    for column in ("t_s", "channel", "sup |e - e_pred|", "no transient"):
        table.add_column(column)
    for m in metrics:
        table.add_row(f"{m.switch_time:g}", m.channel, f"{m.value:.3e}", "yes" if m.no_transient else "no")
    return table


@app.command()
def simulate(
    ctx: typer.Context,
    scenario: Optional[str] = typer.Argument(None, help="Scenario JSON file"),
    builtin: Optional[str] = typer.Option(None, "--builtin", help="Builtin scenario id"),
    csv: Optional[Path] = typer.Option(None, "--csv", help="Trace CSV (default: <report-dir>/<name>.csv)"),
    plot: Optional[Path] = typer.Option(None, "--plot", help="gnuplot script for the trace"),
) -> None:
    """Run a switching scenario and report switches and transient metrics."""
    state: CliState = ctx.obj
    ref = _reference(scenario, builtin, "scenario")
    csv_path = csv or state.report_dir / f"{Path(ref).stem}.csv"
    try:
        trace, metrics = state.coordinator().simulate(ref, csv_path, plot)
    except ValidityExitError as e:
        if e.trace is not None:
            write_trace(e.trace, csv_path, plot)
            err_console.print(f"Partial trace written to {csv_path}")
        raise _fail(str(e)) from e
    except ToolkitError as e:
        raise _fail(str(e)) from e

    console.print(switch_table(trace))
    if metrics:
        console.print(metric_table(metrics))
    console.print(f"Trace written to {csv_path}")


# -- check -------------------------------------------------------------------


@app.command()
def check(
    ctx: typer.Context,
    only: Optional[str] = typer.Option(None, "--only", help="Comma-separated criterion numbers"),
) -> None:
    """Run the acceptance suite; exit 1 if any criterion fails."""
    state: CliState = ctx.obj
    try:
        selection = [int(n) for n in only.split(",")] if only else None
    except ValueError as e:
        raise typer.BadParameter(f"Invalid criterion list '{only}'") from e
    coordinator = state.coordinator()
    try:
        results = run_suite(selection, coordinator.params, coordinator.progress_tracker)
    except KeyError as e:
        raise _fail(str(e)) from e

    table = Table(title="Acceptance suite")
    for column in ("#", "criterion", "result", "runtime", "detail"):
        table.add_column(column)
    for r in results:
        verdict = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        runtime = f"{r.runtime:.1f} s" + ("" if r.within_budget else f" (> {r.budget:g} s)")
        table.add_row(str(r.number), r.title, verdict, runtime, r.detail)
    console.print(table)
    coordinator.store.save_batch("acceptance", 0, results)
    if not all(r.passed for r in results):
        raise typer.Exit(code=1)


# -- export-builtin ----------------------------------------------------------


@app.command("export-builtin")
def export_builtin(
    builtin_id: str = typer.Argument(..., help=f"One of: {', '.join(BUILTINS)}"),
    out: Optional[Path] = typer.Option(None, "--out", help="Destination file (default: stdout)"),
) -> None:
    """Write a builtin system in the system-definition file format."""
    try:
        text = render_system(get_builtin(builtin_id).system())
    except ToolkitError as e:
        raise _fail(str(e)) from e
    if out is None:
        typer.echo(text, nl=False)
    else:
        out.write_text(text, encoding="utf-8")
        err_console.print(f"{builtin_id} written to {out}")


if __name__ == "__main__":
    app()
