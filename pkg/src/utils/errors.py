"""
Exception Hierarchy

All toolkit failures derive from ToolkitError so the CLI can map them to exit
code 1 with a single handler. Verdicts that are values (no realizing pair, not
flat) are never raised.
"""

from typing import Any, Optional


class ToolkitError(Exception):
    """Base class for all toolkit exceptions."""


class ConfigurationError(ToolkitError):
    """Raised when a configuration or scenario file fails schema validation."""


class ExpressionSyntaxError(ToolkitError):
    """Lexical or syntax error in an expression, with the offending position."""

    def __init__(self, message: str, text: str = "", position: int = 0):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position}")


class UnknownSymbolError(ExpressionSyntaxError):
    """Identifier not registered in the symbol table."""

    def __init__(self, name: str, text: str = "", position: int = 0):
        self.name = name
        super().__init__(f"Unknown symbol '{name}'", text=text, position=position)


class ArityError(ExpressionSyntaxError):
    """Function applied to the wrong number of arguments."""

    def __init__(self, function: str, count: int, text: str = "", position: int = 0):
        self.function = function
        self.count = count
        super().__init__(
            f"Function '{function}' takes 1 argument, got {count}",
            text=text,
            position=position,
        )


class EvaluationError(ToolkitError):
    """Numeric evaluation hit a singularity or produced a non-finite value."""


class ZeroTestExhaustedError(EvaluationError):
    """Zero test could not collect enough finite samples."""


class SystemDefinitionError(ToolkitError):
    """Inconsistent system definition; DSL errors carry file and line."""

    def __init__(
        self, message: str, file: Optional[str] = None, line: Optional[int] = None
    ):
        self.file = file
        self.line = line
        if file is not None and line is not None:
            message = f"{file}:{line}: {message}"
        elif line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IndexSetError(ToolkitError):
    """Index set out of range, unsorted, duplicated, or merge size mismatch."""


class PatternRestrictionError(ToolkitError):
    """Prolongation pattern prolongs a removed input."""


class NonSquareOutputError(ToolkitError):
    """Output channel count differs from the virtual input count."""


class RelativeDegreeCapError(ToolkitError):
    """Relative degree cap below the admissible minimum."""


class SingularDecouplingError(ToolkitError):
    """Decoupling matrix singular at the evaluation point."""

    def __init__(self, message: str, determinant: float = 0.0):
        self.determinant = determinant
        super().__init__(message)


class NotCommonProlongationError(ToolkitError):
    """The pattern does not keep the full output flat."""

    def __init__(
        self,
        message: str,
        reason: Optional[str] = None,
        degrees: Optional[dict[str, Optional[int]]] = None,
    ):
        self.reason = reason
        self.degrees = degrees or {}
        super().__init__(message)


class GainSynthesisError(ToolkitError):
    """Requested poles do not give a Hurwitz polynomial of the right order."""


class ScenarioError(ToolkitError):
    """Scenario is inconsistent with its system or graph."""


class ValidityExitError(ToolkitError):
    """Closed loop left the validity set; carries the trace up to the exit."""

    def __init__(self, message: str, time: float, trace: Any = None):
        self.time = time
        self.trace = trace
        super().__init__(f"{message} at t={time:.6g}")
