"""
Structured logging for the toolkit.

Every record is one JSON line rendered by structlog. Importing the package
logs warnings to stderr only; the command line adds the log file and level.
Module loggers are created at import time, so the run id is not bound on them:
`bind_run` puts it in the context variables, and every record of the run
carries it.

Example Usage:
    from src.utils.logger import bind_run, get_logger

    logger = get_logger(phase="classification", component="classifier")
    bind_run("square-0")
    logger.info("subset_checked", removed=[2], dexterity=True, pattern=[0, 0, 0])

Log Levels:
    - DEBUG: Per-pattern search steps, zero-test verdicts
    - INFO: Phase progress, verdicts, files written
    - WARNING: Empty validity samples, budget-limited subsets, rejected switches
    - ERROR: Validity exits, failed acceptance criteria
"""

import logging
import sys
import uuid
from pathlib import Path
from typing import Any, Optional, cast

import numpy as np
import structlog
import sympy
from structlog.stdlib import BoundLogger
from structlog.types import EventDict, WrappedLogger


def _json_safe(value: Any) -> Any:
    if isinstance(value, sympy.Basic):
        from src.symbolic.expression import render

        return render(value) if isinstance(value, sympy.Expr) else str(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (tuple, list)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(_json_safe(v) for v in value)
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    return value


def jsonify_symbolic(
    logger: WrappedLogger, method_name: str, event_dict: EventDict
) -> EventDict:
    """Render sympy values in the toolkit grammar and numpy values as Python ones."""
    return {key: _json_safe(value) for key, value in event_dict.items()}


def configure_logging(
    log_file: Optional[str] = "logs/dexterity.log", log_level: str = "INFO"
) -> None:
    """
    Route JSON records to stderr and, unless `log_file` is None, to a file.

    stdout is left to the reports.
    """
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        handlers.insert(0, logging.FileHandler(log_path, encoding="utf-8"))

    logging.basicConfig(
        format="%(message)s",
        level=log_level.upper(),
        handlers=handlers,
        force=True,
    )

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            jsonify_symbolic,
            structlog.processors.JSONRenderer(),
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=False,
    )


def bind_run(correlation_id: Optional[str] = None, **context: Any) -> str:
    """
    Bind the run id (and any extra context) for every logger in this context.

    Returns:
        The bound id; a fresh one when none is given
    """
    run_id = correlation_id or uuid.uuid4().hex[:12]
    structlog.contextvars.bind_contextvars(correlation_id=run_id, **context)
    return run_id


def get_logger(
    phase: Optional[str] = None,
    component: Optional[str] = None,
    correlation_id: Optional[str] = None,
) -> BoundLogger:
    """
    Logger with phase and component bound.

    An explicit correlation_id takes precedence over the one from `bind_run`.
    """
    context = {"phase": phase, "component": component, "correlation_id": correlation_id}
    logger = structlog.get_logger().bind(**{k: v for k, v in context.items() if v is not None})
    return cast(BoundLogger, logger)


configure_logging(log_file=None, log_level="WARNING")
