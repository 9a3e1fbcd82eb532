"""
Unit tests for the dependency verification script.
"""

import sys
from unittest.mock import MagicMock

import pytest

sys.path.insert(0, "scripts")
import verify_dependencies  # noqa: E402
from verify_dependencies import DEPENDENCIES, check_imports, check_numerics, main  # noqa: E402


@pytest.fixture
def console():
    return MagicMock()


def _printed(console) -> str:
    return " ".join(str(c.args[0]) for c in console.print.call_args_list)


def test_dependencies_cover_numeric_stack():
    """Verify that the symbolic and numeric libraries are checked."""
    modules = {module_name for module_name, _ in DEPENDENCIES}
    assert {"numpy", "sympy", "scipy.linalg", "scipy.stats.qmc", "typer"} <= modules


def test_missing_module_is_reported(mocker):
    """Test that an ImportError becomes a problem row."""
    mocker.patch.object(verify_dependencies, "DEPENDENCIES", [("nonexistent_module", "nothing")])

    rows = check_imports()

    assert rows[0][0] == "nonexistent_module"
    assert rows[0][1] == "-"
    assert "nonexistent_module" in rows[0][2]


def test_major_floor_is_enforced(mocker):
    """Test that pydantic 1 is flagged."""
    mocker.patch.object(verify_dependencies, "DEPENDENCIES", [("pydantic", "pydantic")])
    mocker.patch.object(verify_dependencies, "import_module")
    mocker.patch.object(verify_dependencies, "version", return_value="1.10.13")

    rows = check_imports()

    assert rows == [("pydantic", "1.10.13", "needs pydantic >= 2")]


def test_smoke_check_failure_is_captured(mocker):
    """Test that a raising smoke check is reported, not propagated."""

    def broken():
        raise RuntimeError("Halton points outside the unit cube")

    mocker.patch.object(verify_dependencies, "SMOKE_CHECKS", [("halton", broken)])

    assert check_numerics() == [("halton", "RuntimeError: Halton points outside the unit cube")]


def test_real_smoke_checks_pass():
    """Test lambdify and Halton sampling on the installed stack."""
    assert all(problem == "" for _, problem in check_numerics())


def test_main_success(mocker, console):
    """Test exit code 0 and the success line."""
    mocker.patch.object(verify_dependencies, "check_imports", return_value=[("numpy", "2.1.0", "")])
    mocker.patch.object(verify_dependencies, "check_numerics", return_value=[("halton", "")])

    assert main(console) == 0
    assert "All dependencies verified" in _printed(console)


def test_main_failure_skips_numerics(mocker, console):
    """Test exit code 1 and no smoke checks when an import is missing."""
    mocker.patch.object(
        verify_dependencies, "check_imports", return_value=[("sympy", "-", "No module named 'sympy'")]
    )
    numerics = mocker.patch.object(verify_dependencies, "check_numerics")

    assert main(console) == 1
    numerics.assert_not_called()
    assert "1 checks failed" in _printed(console)
    assert "sympy" in _printed(console)
