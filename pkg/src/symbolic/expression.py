"""
Symbolic Expression Core

Expressions are sympy trees restricted to the toolkit grammar: rational or
float constants, registered symbols, + - * /, integer powers, and the
elementary functions sin, cos, tan, exp, ln and sqrt.

Example Usage:
    from src.symbolic.expression import SymbolTable, differentiate, render
    from src.symbolic.parser import parse_expression

    table = SymbolTable(names=["x1", "x3"])
    e = parse_expression("x1 * sin(x3)", table)
    render(differentiate(e, "x1"))  # "sin(x3)"
"""

from collections.abc import Callable, Iterable, Mapping, Sequence
from typing import Any, Union

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, field_validator
from sympy.printing.precedence import precedence
from sympy.printing.str import StrPrinter

from src.utils.errors import EvaluationError, UnknownSymbolError

SymbolicExpression = sympy.Expr

FUNCTIONS: dict[str, Callable[[sympy.Expr], sympy.Expr]] = {
    "sin": sympy.sin,
    "cos": sympy.cos,
    "tan": sympy.tan,
    "exp": sympy.exp,
    "ln": sympy.log,
    "sqrt": sympy.sqrt,
}


def symbol(name: str) -> sympy.Symbol:
    """Return the canonical sympy symbol for a registered name."""
    return sympy.Symbol(name)


def to_constant(value: Union[int, float, str]) -> sympy.Expr:
    """Exact rational for decimal-looking values, so 9.81 becomes 981/100."""
    return sympy.nsimplify(value, rational=True)


class SymbolTable(BaseModel):
    """Ordered variable names plus numeric parameter bindings."""

    model_config = ConfigDict(frozen=True)

    names: list[str] = Field(default_factory=list)
    parameters: dict[str, float] = Field(default_factory=dict)

    @field_validator("names")
    @classmethod
    def validate_unique(cls, v: list[str]) -> list[str]:
        """Reject duplicate names."""
        seen: set[str] = set()
        for name in v:
            if name in seen:
                raise ValueError(f"Duplicate symbol name: {name}")
            seen.add(name)
        return v

    def __contains__(self, name: object) -> bool:
        return name in self.names or name in self.parameters

    def symbol(self, name: str) -> sympy.Symbol:
        """Look up a registered name.

        Raises:
            UnknownSymbolError: If the name is neither a variable nor a parameter
        """
        if name not in self:
            raise UnknownSymbolError(name)
        return symbol(name)

    def extended(self, names: Iterable[str]) -> "SymbolTable":
        """New table with extra variable names appended."""
        return SymbolTable(
            names=[*self.names, *names], parameters=dict(self.parameters)
        )

    def parameter_substitution(self) -> dict[sympy.Symbol, sympy.Expr]:
        """Parameter symbols mapped to exact constants."""
        return {symbol(k): to_constant(v) for k, v in self.parameters.items()}

    def check_registered(self, e: sympy.Expr) -> None:
        """Raise UnknownSymbolError for the first unregistered free symbol."""
        for s in sorted(e.free_symbols, key=lambda s: s.name):
            if s.name not in self:
                raise UnknownSymbolError(s.name)


def simplify(e: Union[sympy.Expr, int, float]) -> sympy.Expr:
    """Canonical expanded form; idempotent and value preserving."""
    return sympy.expand(sympy.sympify(e))


def differentiate(e: sympy.Expr, v: Union[str, sympy.Symbol]) -> sympy.Expr:
    """Exact partial derivative with respect to a variable."""
    var = symbol(v) if isinstance(v, str) else v
    return simplify(sympy.diff(e, var))


def free_names(e: sympy.Expr) -> list[str]:
    return sorted(s.name for s in e.free_symbols)


def is_literal_zero(e: sympy.Expr) -> bool:
    return bool(sympy.sympify(e) == 0)


def compile_vector(
    exprs: Sequence[sympy.Expr], variables: Sequence[str]
) -> Callable[[Any], np.ndarray]:
    """
    Compile expressions into one vectorized numpy function.

    Args:
        exprs: Expressions to evaluate together
        variables: Argument order of the points passed to the returned function

    Returns:
        Function mapping points of shape (k,) or (N, k) to values of shape (N, m).
        Singular points produce non-finite entries rather than raising.
    """
    args = [symbol(v) for v in variables]
    fn = sympy.lambdify(args, list(exprs), modules="numpy", cse=True)
    m = len(exprs)

    def evaluate_many(points: Any) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        columns = [pts[:, k] for k in range(pts.shape[1])]
        with np.errstate(all="ignore"):
            raw = fn(*columns)
        out = np.empty((pts.shape[0], m))
        for j, value in enumerate(raw):
            out[:, j] = np.real_if_close(value)
        return out

    return evaluate_many


def evaluate(e: sympy.Expr, assignment: Mapping[str, float]) -> float:
    """
    Evaluate at a full assignment.

    Raises:
        EvaluationError: On unbound variables or a non-finite result
            (division by zero, ln of non-positive, sqrt of negative)
    """
    names = free_names(e)
    missing = [n for n in names if n not in assignment]
    if missing:
        raise EvaluationError(f"Unbound variables: {', '.join(missing)}")
    value = compile_vector([e], names)([assignment[n] for n in names])[0, 0]
    if not np.isfinite(value):
        raise EvaluationError(
            f"Non-finite value {value} for {render(e)} at {dict(assignment)}"
        )
    return float(value)


class GrammarPrinter(StrPrinter):
    """Prints sympy trees back into the expression grammar."""

    def _print_Pow(self, expr: sympy.Pow, rational: bool = False) -> str:
        base, exp = expr.base, expr.exp
        if exp.is_Rational and not exp.is_Integer:
            # only sqrt introduces fractional exponents
            p, q = int(exp.p), int(exp.q)
            inner = self._print(base)
            while q > 1:
                inner = f"sqrt({inner})"
                q //= 2
            return inner if p == 1 else f"{inner}^{p}"
        base_str = self.parenthesize(base, precedence(expr), strict=True)
        return f"{base_str}^{self._print(exp)}"

    def _print_log(self, expr: sympy.log) -> str:
        return f"ln({self._print(expr.args[0])})"

    def _print_Exp1(self, expr: Any) -> str:
        return "exp(1)"

    def _print_Float(self, expr: sympy.Float) -> str:
        return repr(float(expr))


_PRINTER = GrammarPrinter()


def render(e: Union[sympy.Expr, int, float]) -> str:
    """Render in the grammar; parse(render(e)) reproduces simplify(e)."""
    return _PRINTER.doprint(sympy.sympify(e))
