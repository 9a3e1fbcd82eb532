"""
Negotiability Graph Models

Meld vertices (A, O) on one common prolongation, compatibility edges with
their witnesses, and the starred component around the full-task vertex.
"""

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from src.models.profile import RelativeDegreeProfile, ValiditySample
from src.models.system import IndexSet, ProlongationPattern


def vertex_key(removed: IndexSet, omitted: IndexSet) -> str:
    """Stable identifier of a meld, e.g. "A{1,2}|O{4,6}"."""
    return f"A{removed.label()}|O{omitted.label()}"


class MeldVertex(BaseModel):
    """
    Flat output y_{O-bar, A} of the prolonged system, indexed by (A, O).

    Two pairs giving the same channel set are still distinct vertices.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    removed: IndexSet
    omitted: IndexSet
    profile: RelativeDegreeProfile
    validity: ValiditySample
    label: Optional[str] = None

    @property
    def key(self) -> str:
        return vertex_key(self.removed, self.omitted)

    @property
    def display(self) -> str:
        return self.label or self.key

    @property
    def is_full_task(self) -> bool:
        return not self.removed and not self.omitted

    def summary(self) -> dict[str, Any]:
        return {
            "key": self.key,
            "label": self.label,
            "A": list(self.removed.indices),
            "O": list(self.omitted.indices),
            "channels": self.profile.channels,
            "r": self.profile.r,
            "det_at_point": self.profile.witness,
            "validity": self.validity.summary(),
        }


class GraphEdge(BaseModel):
    """Undirected compatibility edge; `first` < `second` by vertex order."""

    first: str
    second: str
    witness: list[float]
    probes: int = 0

    def touches(self, key: str) -> bool:
        return key in (self.first, self.second)

    def other(self, key: str) -> str:
        return self.second if key == self.first else self.first


class NegotiabilityGraph(BaseModel):
    """G^l: melds of one pattern, compatibility edges and the starred component."""

    system: str
    output: str
    pattern: ProlongationPattern
    state_names: list[str]
    vertices: list[MeldVertex] = Field(default_factory=list)
    edges: list[GraphEdge] = Field(default_factory=list)
    starred: list[str] = Field(default_factory=list, description="Keys reachable from (∅,∅)")

    def vertex(self, key: str) -> MeldVertex:
        for v in self.vertices:
            if v.key == key:
                return v
        raise KeyError(f"No vertex {key} in graph for pattern {self.pattern.label()}")

    def find(self, name: str) -> MeldVertex:
        """Vertex by display label or key."""
        for v in self.vertices:
            if name in (v.label, v.key):
                return v
        raise KeyError(f"No vertex labelled '{name}' in graph for pattern {self.pattern.label()}")

    def neighbours(self, key: str) -> list[str]:
        return [e.other(key) for e in self.edges if e.touches(key)]

    def edge(self, a: str, b: str) -> Optional[GraphEdge]:
        for e in self.edges:
            if {e.first, e.second} == {a, b}:
                return e
        return None

    def in_starred(self, key: str) -> bool:
        return key in self.starred

    def summary(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "output": self.output,
            "pattern": list(self.pattern.orders),
            "vertices": len(self.vertices),
            "edges": len(self.edges),
            "starred": [self.vertex(k).display for k in self.starred],
        }


class UnionRow(BaseModel):
    """One starred-component vertex of one admissible pattern."""

    pattern: ProlongationPattern
    removed: IndexSet
    omitted: IndexSet
    label: Optional[str] = None

    def summary(self) -> dict[str, Any]:
        return {
            "pattern": list(self.pattern.orders),
            "A": list(self.removed.indices),
            "O": list(self.omitted.indices),
            "label": self.label,
        }
