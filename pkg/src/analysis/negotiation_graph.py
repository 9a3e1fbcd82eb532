"""
Negotiation Graph

The l-realizable family of melds (A, O) on one common prolongation, their
compatibility graph, and the starred component reachable from the full-task
vertex (∅, ∅).

Candidates are screened on the jet table of the full system; every vertex
that survives is re-derived with Lie derivatives on Sigma^(l) and carries its
exact profile and validity sample, so the controller can use it directly.

Example Usage:
    builder = GraphBuilder(system, system.output_map("y"), ProlongationPattern.parse("0,1,0"))
    graph = builder.build()
    print(export_dot(graph))
"""

from collections import deque
from collections.abc import Mapping
from typing import Optional

from src.analysis.classification import InputClassifier
from src.analysis.linearization import OutputAnalyzer, augmented_output, output_on
from src.models.config import ToolkitParams
from src.models.graph import GraphEdge, MeldVertex, NegotiabilityGraph, UnionRow, vertex_key
from src.models.system import IndexSet, OutputMap, ProlongationPattern, SystemDefinition
from src.system.indexing import enumerate_patterns, enumerate_subsets
from src.system.prolongation import prolong
from src.utils.errors import NotCommonProlongationError
from src.utils.logger import get_logger
from src.utils.progress_tracker import ProgressTracker, phase

logger = get_logger(phase="graph", component="negotiation_graph")


class GraphBuilder:
    """Builds N^l and G^l for one (system, output, pattern)."""

    def __init__(
        self,
        sys: SystemDefinition,
        y: OutputMap,
        pattern: ProlongationPattern,
        params: Optional[ToolkitParams] = None,
        output_name: str = "y",
        labels: Optional[Mapping[str, str]] = None,
        a_max: Optional[int] = None,
    ):
        params = params or ToolkitParams()
        # jet columns must cover the pattern
        needed = max(pattern.orders, default=0)
        if needed > params.budget.l_max:
            params = params.with_overrides(l_max=needed)
        self.params = params
        self.sys = sys
        self.y = y
        self.pattern = pattern
        self.output_name = output_name
        self.labels = dict(labels or {})
        self.a_max = params.a_max_for(sys.p) if a_max is None else min(a_max, sys.p - 1)
        self.psys = prolong(sys, pattern)
        self.analyzer = OutputAnalyzer(self.psys, params)
        self.classifier = InputClassifier(sys, y, params, output_name=output_name)

    def _vertex(self, removed: IndexSet, omitted: IndexSet) -> Optional[MeldVertex]:
        output = augmented_output(self.psys, self.y, omitted, removed)
        profile = self.analyzer.profile(output, allow_wide=len(output) < self.psys.m)
        if profile.degree_sum != self.psys.n:
            return None
        validity = self.analyzer.sample_validity(profile, with_factors=True)
        if validity.empty:
            return None
        return MeldVertex(
            removed=removed,
            omitted=omitted,
            profile=profile,
            validity=validity,
            label=self.labels.get(vertex_key(removed, omitted)),
        )

    def check_common_prolongation(self) -> MeldVertex:
        """
        The full-task vertex, after checking that y is flat on Sigma^(l).

        Raises:
            NotCommonProlongationError: If l is not in L^∅
        """
        profile = self.analyzer.profile(
            output_on(self.psys, self.y), allow_wide=len(self.y) < self.psys.m
        )
        if profile.degree_sum != self.psys.n:
            where = f"{self.sys.name} prolonged by {self.pattern.label()}"
            degrees = dict(zip(profile.channels, profile.r))
            per_channel = ", ".join(f"{name}: {r}" for name, r in degrees.items())
            if profile.degree_sum is None:
                message = f"Output '{self.output_name}' has an undefined relative degree on {where}"
            else:
                relation = "<" if profile.degree_sum < self.psys.n else ">"
                message = (
                    f"Output '{self.output_name}' is not flat for {where}: relative degree "
                    f"{profile.degree_sum} {relation} n_l = {self.psys.n} ({per_channel})"
                )
            raise NotCommonProlongationError(
                message, reason=profile.reason or "degree-sum-short", degrees=degrees
            )
        validity = self.analyzer.sample_validity(profile, with_factors=True)
        if validity.empty:
            raise NotCommonProlongationError(
                f"Decoupling matrix of '{self.output_name}' is singular on every sample of "
                f"{self.sys.name} prolonged by {self.pattern.label()}",
                reason="singular-decoupling",
            )
        return MeldVertex(
            removed=IndexSet(),
            omitted=IndexSet(),
            profile=profile,
            validity=validity,
            label=self.labels.get(vertex_key(IndexSet(), IndexSet())),
        )

    def build_realizable_family(
        self, progress: Optional[ProgressTracker] = None
    ) -> list[MeldVertex]:
        """
        N^l: every (A, O) with |O| = |A| whose output y_{O-bar, A} is flat on
        Sigma^(l), full-task vertex first, then by |A|, A and O.

        Raises:
            NotCommonProlongationError: If y itself is not flat on Sigma^(l)
        """
        vertices = [self.check_common_prolongation()]
        table = self.classifier.table()
        subsets = list(enumerate_subsets(self.sys.p, self.a_max, min_size=1))
        title = f"Melds of {self.sys.name} {self.pattern.label()}"
        with phase(progress, title, total=len(subsets)) as bar:
            for removed in subsets:
                candidates = self.classifier.candidates(table, self.pattern, removed, augmented=True)
                for omitted, r in candidates:
                    kept = list(omitted.complement(len(self.y)))
                    if not table.verdict(self.pattern, kept, inputs=removed, r=r).flat:
                        continue
                    vertex = self._vertex(removed, omitted)
                    if vertex is None:
                        logger.debug(
                            "meld_rejected_on_lie_check",
                            removed=removed.indices,
                            omitted=omitted.indices,
                        )
                        continue
                    vertices.append(vertex)
                bar.advance(removed.label())
        logger.info(
            "realizable_family_built",
            system=self.sys.name,
            pattern=self.pattern.orders,
            vertices=[v.display for v in vertices],
        )
        return vertices

    def build_graph(self, vertices: list[MeldVertex]) -> NegotiabilityGraph:
        """
        Compatibility edges between every pair of vertices, and the starred
        component by breadth-first search from (∅, ∅).
        """
        graph = NegotiabilityGraph(
            system=self.sys.name,
            output=self.output_name,
            pattern=self.pattern,
            state_names=list(self.psys.state_names),
            vertices=vertices,
        )
        for a in range(len(vertices)):
            for b in range(a + 1, len(vertices)):
                first, second = vertices[a], vertices[b]
                result = self.analyzer.compatible(
                    first.profile, first.validity, second.profile, second.validity
                )
                if result.compatible and result.witness is not None:
                    graph.edges.append(
                        GraphEdge(
                            first=first.key,
                            second=second.key,
                            witness=result.witness,
                            probes=result.probes,
                        )
                    )
        full = vertex_key(IndexSet(), IndexSet())
        graph.starred = starred_component(graph, full)
        logger.info(
            "graph_built",
            pattern=self.pattern.orders,
            vertices=len(vertices),
            edges=len(graph.edges),
            starred=len(graph.starred),
        )
        return graph

    def build(self, progress: Optional[ProgressTracker] = None) -> NegotiabilityGraph:
        return self.build_graph(self.build_realizable_family(progress))


def starred_component(graph: NegotiabilityGraph, start: str) -> list[str]:
    """Keys reachable from `start`, in vertex order; empty if start is absent."""
    keys = [v.key for v in graph.vertices]
    if start not in keys:
        return []
    adjacent = adjacency(graph)
    seen = {start}
    queue = deque([start])
    while queue:
        current = queue.popleft()
        for nxt in adjacent[current]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return [k for k in keys if k in seen]


def adjacency(graph: NegotiabilityGraph) -> dict[str, list[str]]:
    """Neighbour keys per vertex, both in vertex order."""
    order = {v.key: k for k, v in enumerate(graph.vertices)}
    out: dict[str, list[str]] = {v.key: [] for v in graph.vertices}
    for e in graph.edges:
        out[e.first].append(e.second)
        out[e.second].append(e.first)
    return {k: sorted(v, key=order.__getitem__) for k, v in out.items()}


def _dot_id(key: str) -> str:
    return '"' + key.replace('"', '\\"') + '"'


def export_dot(graph: NegotiabilityGraph) -> str:
    """Undirected DOT text; starred-component vertices are filled."""
    lines = [
        "graph negotiability {",
        f'  label="{graph.system} {graph.output} l={graph.pattern.label()}";',
        "  node [shape=box, fontname=Helvetica];",
    ]
    for v in graph.vertices:
        channels = ", ".join(v.profile.channels)
        style = ', style=filled, fillcolor="lightblue"' if graph.in_starred(v.key) else ""
        if v.is_full_task:
            style += ", penwidth=2"
        lines.append(f'  {_dot_id(v.key)} [label="{v.display}\\n({channels})"{style}];')
    for e in graph.edges:
        lines.append(f"  {_dot_id(e.first)} -- {_dot_id(e.second)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def build_realizable_family(
    sys: SystemDefinition,
    y: OutputMap,
    pattern: ProlongationPattern,
    params: Optional[ToolkitParams] = None,
    labels: Optional[Mapping[str, str]] = None,
) -> list[MeldVertex]:
    return GraphBuilder(sys, y, pattern, params, labels=labels).build_realizable_family()


def build_graph(
    sys: SystemDefinition,
    y: OutputMap,
    pattern: ProlongationPattern,
    params: Optional[ToolkitParams] = None,
    output_name: str = "y",
    labels: Optional[Mapping[str, str]] = None,
    progress: Optional[ProgressTracker] = None,
) -> NegotiabilityGraph:
    """Module-level entry point; see GraphBuilder.build."""
    return GraphBuilder(sys, y, pattern, params, output_name, labels).build(progress)


def starred_rows(
    sys: SystemDefinition,
    y: OutputMap,
    pattern: ProlongationPattern,
    params: Optional[ToolkitParams] = None,
    output_name: str = "y",
    labels: Optional[Mapping[str, str]] = None,
    screen: Optional[InputClassifier] = None,
) -> list[UnionRow]:
    """Starred-component vertices of one pattern; empty when the pattern is not in L^∅."""
    params = params or ToolkitParams()
    screen = screen or InputClassifier(sys, y, params, output_name=output_name)
    if not screen.table().verdict(pattern, list(range(1, len(y) + 1))).flat:
        return []
    try:
        graph = GraphBuilder(sys, y, pattern, params, output_name, labels).build()
    except NotCommonProlongationError as e:
        logger.debug("pattern_not_common", pattern=pattern.orders, reason=e.reason)
        return []
    return [
        UnionRow(pattern=pattern, removed=v.removed, omitted=v.omitted, label=v.label)
        for v in (graph.vertex(key) for key in graph.starred)
    ]


def negotiable_union(
    sys: SystemDefinition,
    y: OutputMap,
    params: Optional[ToolkitParams] = None,
    output_name: str = "y",
    labels: Optional[Mapping[str, str]] = None,
) -> list[UnionRow]:
    """
    N_star: starred-component vertices of every pattern in L^∅ within l_max,
    as (l, A, O) rows. Patterns are screened on the jet table first.
    """
    params = params or ToolkitParams()
    screen = InputClassifier(sys, y, params, output_name=output_name)
    rows: list[UnionRow] = []
    for pattern in enumerate_patterns(sys.p, params.budget.l_max):
        rows.extend(starred_rows(sys, y, pattern, params, output_name, labels, screen))
    logger.info("negotiable_union_listed", system=sys.name, rows=len(rows))
    return rows
