"""
Unit tests for the negotiation graph: realizable melds, compatibility edges,
starred component, DOT export and the union over patterns.
"""

import pytest

from src.analysis.negotiation_graph import (
    GraphBuilder,
    adjacency,
    build_graph,
    export_dot,
    negotiable_union,
    starred_component,
)
from src.builtins import get_builtin
from src.models.config import ToolkitParams
from src.models.system import IndexSet, ProlongationPattern
from src.utils.errors import NotCommonProlongationError

FULL = "A{}|O{}"


@pytest.fixture
def params():
    return ToolkitParams().with_overrides(samples=32)


@pytest.fixture
def square_graph(params):
    model = get_builtin("motivating_square")
    return build_graph(
        model.system(),
        model.output_map(),
        ProlongationPattern(orders=(0, 1, 0)),
        params,
        labels={FULL: "full"},
    )


class TestRealizableFamily:
    """Test cases for the meld family on one prolongation."""

    def test_square_melds(self, square_graph):
        """Test that only (∅,∅) and ({2},{3}) are melds of (0,1,0)."""
        # Assert
        assert [v.key for v in square_graph.vertices] == [FULL, "A{2}|O{3}"]
        assert square_graph.vertices[1].profile.channels == ["x1", "x3", "u2"]

    def test_labels_attached(self, square_graph):
        """Test that labels resolve by key and display falls back to it."""
        # Assert
        assert square_graph.find("full").key == FULL
        assert square_graph.vertex("A{2}|O{3}").display == "A{2}|O{3}"

    def test_not_common_prolongation(self, params):
        """Test that a pattern outside L^∅ is rejected with its degree sum."""
        # Arrange
        model = get_builtin("motivating_square")
        builder = GraphBuilder(
            model.system(), model.output_map(), ProlongationPattern(orders=(1, 0, 0)), params
        )

        # Act
        with pytest.raises(NotCommonProlongationError, match="relative degree 4 < n_l = 5") as exc:
            builder.build()

        # Assert
        assert exc.value.degrees == {"x1": 2, "x3": 1, "x4": 1}
        assert exc.value.reason == "degree-sum-short"

    def test_pattern_beyond_budget_extends_l_max(self, params):
        """Test that the builder widens l_max to cover the pattern."""
        # Arrange
        model = get_builtin("motivating_square")

        # Act
        builder = GraphBuilder(
            model.system(),
            model.output_map(),
            ProlongationPattern(orders=(0, 5, 0)),
            params.with_overrides(l_max=1),
        )

        # Assert
        assert builder.params.budget.l_max == 5

    def test_unicycle_meld_on_mecanum(self, params):
        """Test that dropping v3 and theta is a meld of (1,0,1)."""
        # Arrange
        model = get_builtin("mecanum")

        # Act
        vertices = GraphBuilder(
            model.system(),
            model.output_map(),
            ProlongationPattern(orders=(1, 0, 1)),
            params,
            labels=model.labels,
        ).build_realizable_family()

        # Assert
        keys = {v.key: v for v in vertices}
        assert "A{3}|O{3}" in keys
        assert keys["A{3}|O{3}"].label == "unicycle"
        assert "v1_d0" in keys["A{3}|O{3}"].validity.factors


class TestGraph:
    """Test cases for edges, the starred component and export."""

    def test_edge_and_starred(self, square_graph):
        """Test that the two square melds are compatible."""
        # Assert
        edge = square_graph.edge(FULL, "A{2}|O{3}")
        assert edge is not None
        assert len(edge.witness) == 5
        assert square_graph.starred == [FULL, "A{2}|O{3}"]
        assert adjacency(square_graph) == {FULL: ["A{2}|O{3}"], "A{2}|O{3}": [FULL]}

    def test_starred_without_edges(self, square_graph):
        """Test that an isolated full-task vertex is its own component."""
        # Arrange
        bare = square_graph.model_copy(update={"edges": []})

        # Assert
        assert starred_component(bare, FULL) == [FULL]
        assert starred_component(bare, "A{9}|O{9}") == []

    def test_export_dot(self, square_graph):
        """Test the DOT text for filled starred vertices and edges."""
        # Act
        dot = export_dot(square_graph)

        # Assert
        assert dot.startswith("graph negotiability {")
        assert '"A{}|O{}" -- "A{2}|O{3}";' in dot
        assert "style=filled" in dot
        assert "penwidth=2" in dot
        assert dot.rstrip().endswith("}")

    def test_summary(self, square_graph):
        """Test the JSON-ready graph summary."""
        # Act
        summary = square_graph.summary()

        # Assert
        assert summary["vertices"] == 2
        assert summary["edges"] == 1
        assert summary["starred"] == ["full", "A{2}|O{3}"]


class TestNegotiableUnion:
    """Test cases for negotiable_union over admissible patterns."""

    def test_square_union(self, params):
        """Test that only patterns in L^∅ contribute rows."""
        # Arrange
        model = get_builtin("motivating_square")

        # Act
        rows = negotiable_union(
            model.system(), model.output_map(), params.with_overrides(l_max=1)
        )

        # Assert
        patterns = {row.pattern.orders for row in rows}
        assert (0, 0, 0) in patterns
        assert (1, 0, 0) not in patterns
        assert any(
            row.pattern.orders == (0, 1, 0) and row.removed == IndexSet.of(2) for row in rows
        )
