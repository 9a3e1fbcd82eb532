"""
Integration Test Configuration

Shared fixtures for whole-flow tests: toolkit parameters with a reduced
validity sample, a throwaway report directory, and CI detection.

Slow tests (flying-platform meld table, long simulations, the acceptance
suite) are marked @pytest.mark.slow and skipped when CI=true.
"""

import os

import pytest

from src.coordinator import AnalysisCoordinator
from src.models.config import ToolkitParams


@pytest.fixture
def is_ci_environment() -> bool:
    """
    Detect if tests are running in CI environment.

    Returns:
        True if CI environment variable is set to 'true'
    """
    return os.getenv("CI", "").lower() == "true"


@pytest.fixture
def params() -> ToolkitParams:
    """Default parameters with 64 validity samples."""
    return ToolkitParams().with_overrides(samples=64)


@pytest.fixture
def coordinator(tmp_path, monkeypatch) -> AnalysisCoordinator:
    """Coordinator writing reports under tmp_path, without a config file."""
    monkeypatch.chdir(tmp_path)
    return AnalysisCoordinator(
        report_dir=tmp_path / "results",
        correlation_id="integration",
        overrides={"samples": 64},
        quiet=True,
    )


@pytest.fixture(autouse=True)
def skip_slow_tests_in_ci(request, is_ci_environment):
    """
    Automatically skip slow integration tests when running in CI.

    Slow tests are skipped in CI to keep pipeline times reasonable.
    """
    if is_ci_environment and request.node.get_closest_marker("slow"):
        pytest.skip("Skipping slow test in CI environment")
