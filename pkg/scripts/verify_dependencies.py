#!/usr/bin/env python3
"""
Check that the toolkit's libraries import, report their versions, and run the
two numerical paths every analysis depends on: sympy expressions compiled to
numpy, and Halton samples from scipy.

Usage:
    python scripts/verify_dependencies.py
"""

import sys
from importlib import import_module
from importlib.metadata import PackageNotFoundError, version
from typing import Callable

from rich.console import Console
from rich.table import Table

# (import name, distribution name)
DEPENDENCIES = [
    ("numpy", "numpy"),
    ("scipy.stats.qmc", "scipy"),
    ("scipy.linalg", "scipy"),
    ("sympy", "sympy"),
    ("pandas", "pandas"),
    ("jsonschema", "jsonschema"),
    ("pydantic", "pydantic"),
    ("structlog", "structlog"),
    ("typer", "typer"),
    ("jsonlines", "jsonlines"),
    ("tenacity", "tenacity"),
    ("pytest", "pytest"),
    ("pytest_mock", "pytest-mock"),
    ("ruff", "ruff"),
    ("mypy", "mypy"),
]

MAJOR_FLOORS = {"pydantic": 2}


def _version(distribution: str) -> str:
    try:
        return version(distribution)
    except PackageNotFoundError:
        return "?"


def _lambdify_smoke() -> None:
    np = import_module("numpy")
    sympy = import_module("sympy")
    x = sympy.Symbol("x")
    f = sympy.lambdify([x], sympy.sin(x) ** 2 + sympy.cos(x) ** 2, "numpy")
    if not np.allclose(f(np.linspace(-3.0, 3.0, 7)), 1.0):
        raise RuntimeError("lambdify gave wrong values")


def _halton_smoke() -> None:
    qmc = import_module("scipy.stats.qmc")
    points = qmc.Halton(d=3, scramble=False).random(16)
    if points.shape != (16, 3) or not ((points >= 0) & (points < 1)).all():
        raise RuntimeError("Halton points outside the unit cube")


SMOKE_CHECKS: list[tuple[str, Callable[[], None]]] = [
    ("sympy -> numpy lambdify", _lambdify_smoke),
    ("scipy Halton sampling", _halton_smoke),
]


def check_imports() -> list[tuple[str, str, str]]:
    """(module, version, problem) per dependency; problem is '' when fine."""
    rows = []
    for module_name, distribution in DEPENDENCIES:
        try:
            import_module(module_name)
        except ImportError as e:
            rows.append((module_name, "-", str(e)))
            continue
        found = _version(distribution)
        floor = MAJOR_FLOORS.get(distribution)
        problem = ""
        if floor is not None and found != "?" and int(found.split(".")[0]) < floor:
            problem = f"needs {distribution} >= {floor}"
        rows.append((module_name, found, problem))
    return rows


def check_numerics() -> list[tuple[str, str]]:
    """(check, problem) per smoke check."""
    results = []
    for name, check in SMOKE_CHECKS:
        try:
            check()
            results.append((name, ""))
        except Exception as e:  # noqa: BLE001
            results.append((name, f"{type(e).__name__}: {e}"))
    return results


def main(console: Console | None = None) -> int:
    console = console or Console()
    imports = check_imports()
    table = Table(title="Dependencies")
    table.add_column("module")
    table.add_column("version")
    table.add_column("status")
    for module_name, found, problem in imports:
        table.add_row(module_name, found, f"[red]{problem}[/red]" if problem else "[green]ok[/green]")
    console.print(table)

    numerics = check_numerics() if not any(p for _, _, p in imports) else []
    for name, problem in numerics:
        console.print(f"[red]✗ {name}: {problem}[/red]" if problem else f"[green]✓ {name}[/green]")

    failed = [m for m, _, p in imports if p] + [n for n, p in numerics if p]
    if failed:
        console.print(f"[bold red]{len(failed)} checks failed:[/bold red] {', '.join(failed)}")
        return 1
    console.print("[bold green]All dependencies verified[/bold green]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
