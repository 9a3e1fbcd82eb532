"""
System-Definition File Format

Plain text, sectioned, '#' comments:

    system motivating_square
    params: k=2
    states: x1 x2 x3 x4
    inputs: u1 u2 u3
    operating_point: 0 0 0 0
    box: ±1 ±1 ±1 ±1          # ±w around the operating value, or lo:hi
    input_point: 0 0 0        # optional, operating input values
    input_box: ±1 ±1 ±1       # optional
    f:
      x2
      ...
    g u1:
      0
      ...
    output y:
      x1
      pos = x3                # optional channel label

Every line with a ':' opens a section; other lines belong to the open block.
"""

import re
from pathlib import Path
from typing import Optional

import sympy
from pydantic import ValidationError

from src.models.system import SystemDefinition
from src.symbolic.expression import SymbolTable, render
from src.symbolic.parser import parse_expression
from src.utils.errors import EvaluationError, ExpressionSyntaxError, SystemDefinitionError
from src.utils.logger import get_logger

logger = get_logger(phase="system_model", component="dsl")

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_INLINE = ("params", "states", "inputs", "operating_point", "box", "input_point", "input_box")


class _Block:
    def __init__(self, kind: str, name: Optional[str], line: int):
        self.kind = kind
        self.name = name
        self.line = line
        self.entries: list[tuple[int, str]] = []


class SystemFileParser:
    """Parses one system file; errors carry file:line."""

    def __init__(self, text: str, filename: str = "<string>"):
        self.text = text
        self.filename = filename
        self.name: Optional[str] = None
        self.inline: dict[str, tuple[int, str]] = {}
        self.blocks: list[_Block] = []

    def error(self, message: str, line: Optional[int]) -> SystemDefinitionError:
        return SystemDefinitionError(message, file=self.filename, line=line)

    def parse(self) -> SystemDefinition:
        self._scan()
        last_line = self.text.count("\n") + 1
        if self.name is None:
            raise self.error("Missing 'system <name>' header", 1)
        for key in ("states", "inputs"):
            if key not in self.inline:
                raise self.error(f"Missing '{key}:' section", last_line)

        states = self._names("states")
        inputs = self._names("inputs")
        params = self._params()
        table = SymbolTable(names=states, parameters=params)

        drift_blocks = [b for b in self.blocks if b.kind == "f"]
        if len(drift_blocks) != 1:
            raise self.error("Expected exactly one 'f:' section", last_line)
        drift = self._expressions(drift_blocks[0], table, len(states))

        columns: dict[str, list[sympy.Expr]] = {}
        outputs: dict[str, list[sympy.Expr]] = {}
        labels: dict[str, list[str]] = {}
        for block in self.blocks:
            if block.kind == "g":
                if block.name not in inputs:
                    raise self.error(f"Column for unknown input '{block.name}'", block.line)
                if block.name in columns:
                    raise self.error(f"Duplicate column for '{block.name}'", block.line)
                columns[block.name] = self._expressions(block, table, len(states))
            elif block.kind == "output":
                assert block.name is not None
                outputs[block.name], labels[block.name] = self._output(block, table)
        missing = [u for u in inputs if u not in columns]
        if missing:
            raise self.error(f"Missing 'g <input>:' section for {', '.join(missing)}", last_line)

        point = self._numbers("operating_point", len(states))
        box = self._box("box", len(states), point)
        input_point = self._numbers("input_point", len(inputs))
        input_box = self._box("input_box", len(inputs), input_point)

        try:
            return SystemDefinition(
                name=self.name,
                states=states,
                inputs=inputs,
                params=params,
                drift=drift,
                columns=[columns[u] for u in inputs],
                outputs=outputs,
                output_labels=labels,
                operating_point=point,
                box=box,
                input_point=input_point,
                input_box=input_box,
            )
        except (ValidationError, ExpressionSyntaxError) as e:
            raise self.error(f"Inconsistent system: {e}", last_line) from e

    def _scan(self) -> None:
        current: Optional[_Block] = None
        for lineno, raw in enumerate(self.text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("system ") or line == "system":
                parts = line.split()
                if len(parts) != 2 or not _IDENT.match(parts[1]):
                    raise self.error("Expected 'system <name>'", lineno)
                self.name = parts[1]
                current = None
                continue
            if ":" in line and "=" not in line.split(":", 1)[0]:
                head, rest = (s.strip() for s in line.split(":", 1))
                words = head.split()
                if words[0] in _INLINE and len(words) == 1:
                    if words[0] in self.inline:
                        raise self.error(f"Duplicate '{words[0]}:' section", lineno)
                    self.inline[words[0]] = (lineno, rest)
                    current = None
                elif words[0] == "f" and len(words) == 1:
                    current = _Block("f", None, lineno)
                elif words[0] in ("g", "output") and len(words) == 2:
                    current = _Block(words[0], words[1], lineno)
                else:
                    raise self.error(f"Unknown section '{head}'", lineno)
                if current is not None:
                    self.blocks.append(current)
                    if rest:
                        current.entries.append((lineno, rest))
                continue
            if current is None:
                raise self.error(f"Expression outside a section: '{line}'", lineno)
            current.entries.append((lineno, line))

    def _names(self, key: str) -> list[str]:
        lineno, rest = self.inline[key]
        names = rest.split()
        for name in names:
            if not _IDENT.match(name):
                raise self.error(f"Invalid name '{name}' in '{key}:'", lineno)
        if len(set(names)) != len(names):
            raise self.error(f"Duplicate name in '{key}:'", lineno)
        return names

    def _params(self) -> dict[str, float]:
        if "params" not in self.inline:
            return {}
        lineno, rest = self.inline["params"]
        params: dict[str, float] = {}
        for item in rest.split():
            name, sep, value = item.partition("=")
            if not sep or not _IDENT.match(name):
                raise self.error(f"Expected name=value, got '{item}'", lineno)
            try:
                params[name] = float(value)
            except ValueError as e:
                raise self.error(f"Invalid parameter value '{value}'", lineno) from e
        return params

    def _numbers(self, key: str, count: int) -> Optional[list[float]]:
        if key not in self.inline:
            return None
        lineno, rest = self.inline[key]
        try:
            values = [float(v) for v in rest.split()]
        except ValueError as e:
            raise self.error(f"Invalid number in '{key}:'", lineno) from e
        if len(values) != count:
            raise self.error(f"'{key}:' needs {count} values, got {len(values)}", lineno)
        return values

    def _box(
        self, key: str, count: int, center: Optional[list[float]]
    ) -> Optional[list[tuple[float, float]]]:
        if key not in self.inline:
            return None
        lineno, rest = self.inline[key]
        entries = rest.split()
        if len(entries) != count:
            raise self.error(f"'{key}:' needs {count} entries, got {len(entries)}", lineno)
        centers = center or [0.0] * count
        box: list[tuple[float, float]] = []
        try:
            for entry, c in zip(entries, centers):
                if entry.startswith("±") or entry.startswith("+-"):
                    w = float(entry.lstrip("±+-"))
                    box.append((c - w, c + w))
                elif ":" in entry:
                    lo, hi = entry.split(":")
                    box.append((float(lo), float(hi)))
                else:
                    raise ValueError(entry)
        except ValueError as e:
            raise self.error(f"Invalid box entry in '{key}:' (use ±w or lo:hi)", lineno) from e
        if any(lo > hi for lo, hi in box):
            raise self.error(f"Empty interval in '{key}:'", lineno)
        return box

    def _parse(self, lineno: int, text: str, table: SymbolTable) -> sympy.Expr:
        try:
            return parse_expression(text, table)
        except (ExpressionSyntaxError, EvaluationError) as e:
            raise self.error(str(e), lineno) from e

    def _expressions(self, block: _Block, table: SymbolTable, count: int) -> list[sympy.Expr]:
        if len(block.entries) != count:
            raise self.error(
                f"Section needs {count} expressions, got {len(block.entries)}", block.line
            )
        return [self._parse(lineno, text, table) for lineno, text in block.entries]

    def _output(
        self, block: _Block, table: SymbolTable
    ) -> tuple[list[sympy.Expr], list[str]]:
        if not block.entries:
            raise self.error(f"Output '{block.name}' has no channels", block.line)
        exprs: list[sympy.Expr] = []
        labels: list[str] = []
        for j, (lineno, text) in enumerate(block.entries, start=1):
            label, sep, body = text.partition("=")
            if sep:
                label = label.strip()
                if not _IDENT.match(label):
                    raise self.error(f"Invalid channel label '{label}'", lineno)
            else:
                body, label = text, ""
            e = self._parse(lineno, body, table)
            exprs.append(e)
            labels.append(label or default_label(block.name or "y", j, e))
        return exprs, labels


def default_label(output: str, j: int, e: sympy.Expr) -> str:
    """Channel label: the symbol name for bare symbols, else <output><j>."""
    return e.name if isinstance(e, sympy.Symbol) else f"{output}{j}"


def parse_system(text: str, filename: str = "<string>") -> SystemDefinition:
    """
    Parse a system definition.

    Raises:
        SystemDefinitionError: With file:line diagnostics
    """
    system = SystemFileParser(text, filename).parse()
    logger.debug("system_parsed", system=system.name, file=filename, n=system.n, p=system.p)
    return system


def load_system(path: Path | str) -> SystemDefinition:
    path = Path(path)
    if not path.exists():
        raise SystemDefinitionError(f"System file not found: {path}")
    return parse_system(path.read_text(encoding="utf-8"), filename=str(path))


def _interval(lo: float, hi: float) -> str:
    return f"{lo!r}:{hi!r}"


def render_system(sys: SystemDefinition) -> str:
    """Render a system; parse_system(render_system(s)) reproduces s."""
    lines = [f"system {sys.name}"]
    if sys.params:
        lines.append("params: " + " ".join(f"{k}={v!r}" for k, v in sys.params.items()))
    lines.append("states: " + " ".join(sys.states))
    lines.append("inputs: " + " ".join(sys.inputs))
    if sys.operating_point is not None:
        lines.append("operating_point: " + " ".join(repr(float(v)) for v in sys.operating_point))
    if sys.box is not None:
        lines.append("box: " + " ".join(_interval(lo, hi) for lo, hi in sys.box))
    if sys.input_point is not None:
        lines.append("input_point: " + " ".join(repr(float(v)) for v in sys.input_point))
    if sys.input_box is not None:
        lines.append("input_box: " + " ".join(_interval(lo, hi) for lo, hi in sys.input_box))
    lines.append("f:")
    lines.extend(f"  {render(e)}" for e in sys.drift)
    for u, col in zip(sys.inputs, sys.columns):
        lines.append(f"g {u}:")
        lines.extend(f"  {render(e)}" for e in col)
    for name, exprs in sys.outputs.items():
        lines.append(f"output {name}:")
        labels = sys.output_labels.get(name, [])
        for j, e in enumerate(exprs, start=1):
            label = labels[j - 1] if j - 1 < len(labels) else default_label(name, j, e)
            if label == default_label(name, j, e):
                lines.append(f"  {render(e)}")
            else:
                lines.append(f"  {label} = {render(e)}")
    return "\n".join(lines) + "\n"


