"""
Input removal and prolongation (dynamic extension).

Example Usage:
    psys = prolong(system, ProlongationPattern.parse("0,1,0"), IndexSet())
    psys.state_names   # ['x1', 'x2', 'x3', 'x4', 'u2_d0']
    psys.virtual_inputs  # ['u1', 'u2_d1', 'u3']
"""

from collections.abc import Sequence
from typing import Optional

import sympy

from src.models.system import IndexSet, ProlongationPattern, ProlongedSystem, SystemDefinition
from src.symbolic.expression import simplify, symbol
from src.system.indexing import slice_by
from src.utils.errors import IndexSetError, PatternRestrictionError
from src.utils.logger import get_logger

logger = get_logger(phase="system_model", component="prolongation")

# interval for stack derivatives of order >= 1
DERIVATIVE_BOX = (-1.0, 1.0)


def _check_index_set(sys: SystemDefinition, A: IndexSet) -> None:
    if any(i > sys.p for i in A):
        raise IndexSetError(f"Index set {A.label()} out of range for p={sys.p}")


def remove_inputs(sys: SystemDefinition, A: IndexSet) -> SystemDefinition:
    """
    Sigma_{A-bar}: keep only the inputs outside A (u_A identically zero).

    Raises:
        IndexSetError: If A is the full input set or out of range
    """
    _check_index_set(sys, A)
    if len(A) >= sys.p:
        raise IndexSetError("Cannot remove every input")
    if not A:
        return sys
    kept = A.complement(sys.p)
    return sys.model_copy(
        update={
            "name": f"{sys.name}_without_{'_'.join(str(i) for i in A)}",
            "inputs": slice_by(sys.inputs, kept),
            "columns": slice_by(sys.columns, kept),
            "input_point": slice_by(sys.input_point, kept) if sys.input_point else None,
            "input_box": slice_by(sys.input_box, kept) if sys.input_box else None,
        }
    )


def prolong(
    sys: SystemDefinition,
    pattern: ProlongationPattern,
    A: Optional[IndexSet] = None,
) -> ProlongedSystem:
    """
    Build Sigma_{A-bar}^(l).

    Args:
        sys: Base system
        pattern: Chain lengths, one per base input
        A: Removed inputs (must have zero chain length)

    Returns:
        ProlongedSystem with n + sum_{i not in A} l_i states

    Raises:
        PatternRestrictionError: If the pattern prolongs a removed input or has
            the wrong length
    """
    A = A or IndexSet()
    _check_index_set(sys, A)
    if pattern.p != sys.p:
        raise PatternRestrictionError(
            f"Pattern {pattern.label()} has {pattern.p} entries, system has {sys.p} inputs"
        )
    if not pattern.respects(A):
        raise PatternRestrictionError(
            f"Pattern {pattern.label()} prolongs removed inputs {A.label()}"
        )

    subst = sys.symbol_table.parameter_substitution()
    drift_x = [e.xreplace(subst) for e in sys.drift]
    cols_x = [[e.xreplace(subst) for e in col] for col in sys.columns]
    surviving = [i for i in range(1, sys.p + 1) if i not in A]

    def stack(i: int, k: int) -> str:
        return f"{sys.inputs[i - 1]}_d{k}"

    state_names = list(sys.states)
    for i in surviving:
        state_names.extend(stack(i, k) for k in range(pattern.order(i)))
    index_of = {name: k for k, name in enumerate(state_names)}
    n_l = len(state_names)

    drift: list[sympy.Expr] = list(drift_x)
    for i in surviving:
        if pattern.order(i):
            u_i = symbol(stack(i, 0))
            drift = [d + g * u_i for d, g in zip(drift, cols_x[i - 1])]
    for i in surviving:
        l_i = pattern.order(i)
        for k in range(l_i):
            drift.append(symbol(stack(i, k + 1)) if k + 1 < l_i else sympy.Integer(0))
    drift = [simplify(d) for d in drift]

    columns: list[list[sympy.Expr]] = []
    virtual_inputs: list[str] = []
    for i in surviving:
        l_i = pattern.order(i)
        if l_i:
            col = [sympy.Integer(0)] * n_l
            col[index_of[stack(i, l_i - 1)]] = sympy.Integer(1)
            virtual_inputs.append(stack(i, l_i))
        else:
            col = [*cols_x[i - 1], *([sympy.Integer(0)] * (n_l - sys.n))]
            virtual_inputs.append(sys.inputs[i - 1])
        columns.append(col)

    point = list(sys.state_point)
    box = list(sys.state_box)
    for i in surviving:
        for k in range(pattern.order(i)):
            point.append(sys.input_values[i - 1] if k == 0 else 0.0)
            box.append(sys.input_ranges[i - 1] if k == 0 else DERIVATIVE_BOX)

    psys = ProlongedSystem(
        base=sys,
        pattern=pattern,
        removed=A,
        state_names=state_names,
        virtual_inputs=virtual_inputs,
        surviving=surviving,
        drift=drift,
        columns=columns,
        point=point,
        box=box,
    )
    logger.debug(
        "system_prolonged",
        system=sys.name,
        pattern=pattern.orders,
        removed=A.indices,
        n_prolonged=n_l,
    )
    return psys


def natural_embedding(psys: ProlongedSystem) -> list[float]:
    """x0 followed by (u0_i, 0, ..., 0) for each prolonged input."""
    return list(psys.point)


def zero_surface_point(
    psys: ProlongedSystem, A: IndexSet, base: Optional[Sequence[float]] = None
) -> list[float]:
    """
    Copy of base with every stack coordinate of the inputs in A set to zero.

    Inputs of A that are not prolonged (or already removed) have no stack
    coordinates and are left alone.
    """
    values = list(psys.point if base is None else base)
    index_of = {name: k for k, name in enumerate(psys.state_names)}
    for i in A:
        if i in psys.removed:
            continue
        for name in psys.stack_names(i):
            values[index_of[name]] = 0.0
    return values


def zero_surface_indices(psys: ProlongedSystem, A: IndexSet) -> list[int]:
    """0-based state positions of the stack coordinates of A."""
    index_of = {name: k for k, name in enumerate(psys.state_names)}
    return [
        index_of[name]
        for i in A
        if i not in psys.removed
        for name in psys.stack_names(i)
    ]
