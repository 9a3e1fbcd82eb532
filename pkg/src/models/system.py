"""
System Models

Pydantic models for input-affine systems, index sets, prolongation patterns,
output maps and prolonged systems. Indices are 1-based throughout, matching
input and output numbering in system files and reports.
"""

from collections.abc import Iterable, Iterator, Sequence
from typing import Literal, Optional

import sympy
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.symbolic.expression import SymbolTable, symbol


class IndexSet(BaseModel):
    """Sorted, duplicate-free subset of {1..p}."""

    model_config = ConfigDict(frozen=True)

    indices: tuple[int, ...] = ()

    @field_validator("indices")
    @classmethod
    def validate_indices(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        """Indices must be positive, sorted and unique."""
        if any(i < 1 for i in v):
            raise ValueError(f"Indices must be >= 1, got {list(v)}")
        if list(v) != sorted(set(v)):
            raise ValueError(f"Indices must be sorted and unique, got {list(v)}")
        return v

    @classmethod
    def of(cls, *indices: int) -> "IndexSet":
        return cls(indices=tuple(sorted(set(indices))))

    @classmethod
    def parse(cls, text: str) -> "IndexSet":
        """Parse "1,2", "{1,2}" or "" into an index set."""
        body = text.strip().strip("{}").strip()
        if not body:
            return cls()
        return cls.of(*(int(part) for part in body.split(",")))

    def complement(self, p: int) -> "IndexSet":
        return IndexSet(indices=tuple(i for i in range(1, p + 1) if i not in self))

    def label(self) -> str:
        return "{" + ",".join(str(i) for i in self.indices) + "}"

    def __iter__(self) -> Iterator[int]:  # type: ignore[override]
        return iter(self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i: object) -> bool:
        return i in self.indices

    def __bool__(self) -> bool:
        return bool(self.indices)


class ProlongationPattern(BaseModel):
    """Per-input integrator chain lengths (l_1..l_p)."""

    model_config = ConfigDict(frozen=True)

    orders: tuple[int, ...]

    @field_validator("orders")
    @classmethod
    def validate_orders(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(o < 0 for o in v):
            raise ValueError(f"Prolongation orders must be >= 0, got {list(v)}")
        return v

    @classmethod
    def zeros(cls, p: int) -> "ProlongationPattern":
        return cls(orders=(0,) * p)

    @classmethod
    def parse(cls, text: str) -> "ProlongationPattern":
        """Parse "2,2,2,0,0,0" or "{1,0,1}"."""
        body = text.strip().strip("{}()").strip()
        return cls(orders=tuple(int(part) for part in body.split(",")))

    @property
    def p(self) -> int:
        return len(self.orders)

    @property
    def total(self) -> int:
        return sum(self.orders)

    def order(self, i: int) -> int:
        """Chain length of input i (1-based)."""
        return self.orders[i - 1]

    def respects(self, removed: IndexSet) -> bool:
        """True when no removed input is prolonged (the lattice N0^p restricted)."""
        return all(self.orders[i - 1] == 0 for i in removed)

    def label(self) -> str:
        return "(" + ",".join(str(o) for o in self.orders) + ")"


class ChannelTag(BaseModel):
    """Provenance of an output channel: original output j or input j at order 0."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["output", "input"]
    index: int = Field(ge=1)


class OutputMap(BaseModel):
    """Named output channels with expressions and provenance tags."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    names: list[str]
    exprs: list[sympy.Expr]
    tags: list[ChannelTag]

    @model_validator(mode="after")
    def validate_channels(self) -> "OutputMap":
        if not (len(self.names) == len(self.exprs) == len(self.tags)):
            raise ValueError("Output names, expressions and tags must align")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("Channel provenance tags must be unique")
        return self

    @classmethod
    def from_original(cls, names: Sequence[str], exprs: Sequence[sympy.Expr]) -> "OutputMap":
        return cls(
            names=list(names),
            exprs=list(exprs),
            tags=[ChannelTag(kind="output", index=j) for j in range(1, len(exprs) + 1)],
        )

    def __len__(self) -> int:
        return len(self.exprs)


class SystemDefinition(BaseModel):
    """
    Input-affine system xdot = f(x) + sum_i g_i(x) u_i with named outputs.

    Operating values and sampling boxes cover states and inputs; the input
    values matter once an input becomes a state of a prolonged system.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    states: list[str]
    inputs: list[str]
    params: dict[str, float] = Field(default_factory=dict)
    drift: list[sympy.Expr]
    columns: list[list[sympy.Expr]]
    outputs: dict[str, list[sympy.Expr]] = Field(default_factory=dict)
    output_labels: dict[str, list[str]] = Field(default_factory=dict)
    operating_point: Optional[list[float]] = None
    box: Optional[list[tuple[float, float]]] = None
    input_point: Optional[list[float]] = None
    input_box: Optional[list[tuple[float, float]]] = None

    @model_validator(mode="after")
    def validate_dimensions(self) -> "SystemDefinition":
        n, p = len(self.states), len(self.inputs)
        if len(self.drift) != n:
            raise ValueError(f"Drift has {len(self.drift)} entries, expected {n}")
        if len(self.columns) != p:
            raise ValueError(f"Got {len(self.columns)} input columns, expected {p}")
        for name, col in zip(self.inputs, self.columns):
            if len(col) != n:
                raise ValueError(f"Column g_{name} has {len(col)} entries, expected {n}")
        state_table = SymbolTable(names=list(self.states), parameters=self.params)
        for e in [*self.drift, *(e for col in self.columns for e in col)]:
            state_table.check_registered(e)
        for exprs in self.outputs.values():
            for e in exprs:
                state_table.check_registered(e)
        if self.operating_point is not None and len(self.operating_point) != n:
            raise ValueError("Operating point dimension mismatch")
        if self.box is not None:
            if len(self.box) != n:
                raise ValueError("Sampling box dimension mismatch")
            for (lo, hi), x0, name in zip(self.box, self.state_point, self.states):
                if not lo <= x0 <= hi:
                    raise ValueError(f"Sampling box for {name} does not contain x0")
        if self.input_point is not None and len(self.input_point) != p:
            raise ValueError("Input operating point dimension mismatch")
        if self.input_box is not None:
            if len(self.input_box) != p:
                raise ValueError("Input box dimension mismatch")
            for (lo, hi), u0, name in zip(self.input_box, self.input_values, self.inputs):
                if not lo <= u0 <= hi:
                    raise ValueError(f"Input box for {name} does not contain its value")
        return self

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def p(self) -> int:
        return len(self.inputs)

    @property
    def symbol_table(self) -> SymbolTable:
        return SymbolTable(names=[*self.states, *self.inputs], parameters=self.params)

    @property
    def state_point(self) -> list[float]:
        return list(self.operating_point or [0.0] * self.n)

    @property
    def state_box(self) -> list[tuple[float, float]]:
        if self.box is not None:
            return list(self.box)
        return [(x - 1.0, x + 1.0) for x in self.state_point]

    @property
    def input_values(self) -> list[float]:
        return list(self.input_point or [0.0] * self.p)

    @property
    def input_ranges(self) -> list[tuple[float, float]]:
        if self.input_box is not None:
            return list(self.input_box)
        return [(u - 1.0, u + 1.0) for u in self.input_values]

    def output_map(self, name: Optional[str] = None) -> OutputMap:
        """Named output (first declared when name is None)."""
        if not self.outputs:
            raise KeyError(f"System {self.name} declares no outputs")
        key = name or next(iter(self.outputs))
        if key not in self.outputs:
            raise KeyError(
                f"Unknown output '{key}'; available: {', '.join(self.outputs)}"
            )
        exprs = self.outputs[key]
        labels = self.output_labels.get(key) or [f"{key}{j}" for j in range(1, len(exprs) + 1)]
        return OutputMap.from_original(labels, exprs)


class ProlongedSystem(BaseModel):
    """
    Sigma_{A-bar}^(l): the base system without inputs A, each surviving input i
    extended by a chain of l_i integrators.

    State order: base states, then for each surviving input with l_i >= 1 the
    stack <u>_d0 .. <u>_d(l_i - 1). Virtual inputs are <u>_d(l_i), or <u>
    itself when l_i = 0. Parameters are substituted by exact constants.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: SystemDefinition
    pattern: ProlongationPattern
    removed: IndexSet
    state_names: list[str]
    virtual_inputs: list[str]
    surviving: list[int]
    drift: list[sympy.Expr]
    columns: list[list[sympy.Expr]]
    point: list[float]
    box: list[tuple[float, float]]

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def m(self) -> int:
        return len(self.virtual_inputs)

    def stack_name(self, i: int, k: int) -> str:
        """Name of u_i^(k) (input i is 1-based)."""
        return f"{self.base.inputs[i - 1]}_d{k}"

    def stack_names(self, i: int) -> list[str]:
        return [self.stack_name(i, k) for k in range(self.pattern.order(i))]

    def virtual_input(self, i: int) -> str:
        """Virtual input name for base input i."""
        l_i = self.pattern.order(i)
        return self.stack_name(i, l_i) if l_i else self.base.inputs[i - 1]

    def input_expression(self, i: int) -> sympy.Expr:
        """u_i as an expression on the prolonged system."""
        if i in self.removed:
            return sympy.Integer(0)
        if self.pattern.order(i):
            return symbol(self.stack_name(i, 0))
        return symbol(self.base.inputs[i - 1])

    def virtual_position(self, i: int) -> int:
        """0-based column of base input i among the virtual inputs."""
        return self.surviving.index(i)

    @property
    def symbol_table(self) -> SymbolTable:
        return SymbolTable(names=[*self.state_names, *self.virtual_inputs])

    def point_dict(self, values: Optional[Iterable[float]] = None) -> dict[str, float]:
        vals = list(self.point if values is None else values)
        return dict(zip(self.state_names, vals))

    def box_dict(self) -> dict[str, tuple[float, float]]:
        return dict(zip(self.state_names, self.box))
