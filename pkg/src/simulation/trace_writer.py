"""
Trace Writer

Writes a SimulationTrace as CSV (pandas), a gnuplot script that plots one
subplot per tracked channel with vertical markers at accepted switches, and a
jsonlines event log next to the CSV.
"""

import re
from pathlib import Path
from typing import Optional

import jsonlines

from src.models.trace import SimulationTrace
from src.utils.logger import get_logger

logger = get_logger(phase="simulation", component="trace_writer")

JET_COLUMN = re.compile(r"e_.+_d[1-9][0-9]*")


def write_csv(trace: SimulationTrace, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trace.frame.to_csv(path, index=False, float_format="%.10g")
    return path


def write_events(trace: SimulationTrace, path: Path | str) -> Path:
    """Switch requests and trace events, time-ordered, one JSON object per line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records = [{"type": "switch", **s.model_dump(mode="json")} for s in trace.switches]
    records += [{"type": "event", **e.model_dump(mode="json")} for e in trace.events]
    if not trace.completed:
        records.append(
            {"type": "validity_exit", "time": trace.exit_time, "reason": trace.exit_reason}
        )
    records.sort(key=lambda r: r.get("time") or 0.0)
    with jsonlines.open(path, mode="w") as writer:
        writer.write_all(records)
    return path


def plotted_channels(trace: SimulationTrace) -> list[str]:
    """Error columns of order 0 (e_<channel>), in trace order."""
    return [
        c for c in trace.frame.columns if c.startswith("e_") and not JET_COLUMN.fullmatch(c)
    ]


def gnuplot_script(
    trace: SimulationTrace,
    csv_name: str,
    channels: Optional[list[str]] = None,
    output: Optional[str] = None,
) -> str:
    """
    Script that stacks one subplot per channel over time. Switch times are
    drawn as dashed vertical lines.
    """
    columns = list(trace.frame.columns)
    channels = channels or plotted_channels(trace)
    missing = [c for c in channels if c not in columns]
    if missing:
        raise KeyError(f"Trace has no columns {missing}")
    output = output or f"{Path(csv_name).stem}.png"
    lines = [
        f"# {trace.scenario}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set terminal pngcairo size 900,{max(240, 200 * len(channels))}",
        f"set output '{output}'",
        f"set multiplot layout {len(channels)},1",
        "set grid",
    ]
    for s in trace.accepted_switches():
        lines.append(f"set arrow from {s.time:g}, graph 0 to {s.time:g}, graph 1 nohead dt 2")
    for k, name in enumerate(channels):
        if k == len(channels) - 1:
            lines.append("set xlabel 't [s]'")
        lines.append(f"set ylabel '{name}'")
        lines.append(f"plot '{csv_name}' using 1:{columns.index(name) + 1} with lines lw 2")
    lines.append("unset multiplot")
    return "\n".join(lines) + "\n"


def write_trace(
    trace: SimulationTrace,
    csv_path: Path | str,
    plot_path: Optional[Path | str] = None,
    channels: Optional[list[str]] = None,
) -> dict[str, Path]:
    """CSV, event log (<csv stem>.events.jsonl) and optional gnuplot script."""
    csv_path = write_csv(trace, csv_path)
    written = {
        "csv": csv_path,
        "events": write_events(trace, csv_path.with_suffix(".events.jsonl")),
    }
    if plot_path is not None:
        plot_path = Path(plot_path)
        plot_path.parent.mkdir(parents=True, exist_ok=True)
        plot_path.write_text(gnuplot_script(trace, csv_path.name, channels))
        written["plot"] = plot_path
    logger.info("trace_written", **{k: str(v) for k, v in written.items()})
    return written
