"""
Unit tests for input removal, prolongation and zero surfaces.
"""

import pytest
import sympy

from src.builtins import get_builtin
from src.models.system import IndexSet, ProlongationPattern
from src.symbolic.expression import symbol
from src.system.prolongation import (
    DERIVATIVE_BOX,
    natural_embedding,
    prolong,
    remove_inputs,
    zero_surface_indices,
    zero_surface_point,
)
from src.utils.errors import IndexSetError, PatternRestrictionError


@pytest.fixture
def square():
    return get_builtin("motivating_square").system()


@pytest.fixture
def mecanum():
    return get_builtin("mecanum").system()


class TestRemoveInputs:
    """Test cases for remove_inputs."""

    def test_keeps_surviving_columns(self, square):
        """Test that removing u2 keeps u1 and u3 in order."""
        # Act
        reduced = remove_inputs(square, IndexSet.of(2))

        # Assert
        assert reduced.inputs == ["u1", "u3"]
        assert reduced.columns == [square.columns[0], square.columns[2]]
        assert reduced.drift == square.drift

    def test_empty_set_is_identity(self, square):
        """Test that removing nothing returns the system."""
        # Assert
        assert remove_inputs(square, IndexSet()) is square

    def test_cannot_remove_every_input(self, square):
        """Test that at least one input must survive."""
        # Act & Assert
        with pytest.raises(IndexSetError, match="Cannot remove every input"):
            remove_inputs(square, IndexSet.of(1, 2, 3))

    def test_out_of_range(self, square):
        """Test that indices beyond p raise."""
        # Act & Assert
        with pytest.raises(IndexSetError, match="out of range for p=3"):
            remove_inputs(square, IndexSet.of(4))


class TestProlong:
    """Test cases for prolong."""

    def test_state_and_input_names(self, square):
        """Test stack naming and virtual inputs for (0,2,0)."""
        # Act
        psys = prolong(square, ProlongationPattern(orders=(0, 2, 0)))

        # Assert
        assert psys.state_names == ["x1", "x2", "x3", "x4", "u2_d0", "u2_d1"]
        assert psys.virtual_inputs == ["u1", "u2_d2", "u3"]
        assert psys.n == 6
        assert psys.m == 3

    def test_prolonged_input_enters_drift(self, square):
        """Test that g_2 u2_d0 moves into the drift and the chain closes."""
        # Act
        psys = prolong(square, ProlongationPattern(orders=(0, 1, 0)))

        # Assert
        u = symbol("u2_d0")
        assert psys.drift[1] == symbol("x3") + u
        assert psys.drift[2] == symbol("x4") + u
        assert psys.drift[4] == 0
        assert psys.columns[1] == [0, 0, 0, 0, 1]

    def test_unprolonged_columns_are_padded(self, square):
        """Test that static inputs keep g_i padded with zeros."""
        # Act
        psys = prolong(square, ProlongationPattern(orders=(0, 1, 0)))

        # Assert
        assert psys.columns[0] == [0, 1, 0, 0, 0]
        assert psys.columns[2] == [0, 0, 0, 1, 0]

    def test_removed_inputs_drop_out(self, square):
        """Test Sigma_{A-bar}^(l) with A={2}."""
        # Act
        psys = prolong(square, ProlongationPattern(orders=(1, 0, 0)), IndexSet.of(2))

        # Assert
        assert psys.surviving == [1, 3]
        assert psys.virtual_inputs == ["u1_d1", "u3"]
        assert psys.input_expression(2) == 0
        assert psys.input_expression(1) == symbol("u1_d0")

    def test_pattern_must_respect_removed(self, square):
        """Test that removed inputs cannot be prolonged."""
        # Act & Assert
        with pytest.raises(PatternRestrictionError, match="prolongs removed inputs"):
            prolong(square, ProlongationPattern(orders=(0, 1, 0)), IndexSet.of(2))

    def test_pattern_length_checked(self, square):
        """Test that the pattern has one entry per input."""
        # Act & Assert
        with pytest.raises(PatternRestrictionError, match="has 2 entries"):
            prolong(square, ProlongationPattern(orders=(0, 1)))

    def test_parameters_substituted_exactly(self):
        """Test that parameters become exact rationals."""
        # Arrange
        rigid = get_builtin("rigid_body").system()

        # Act
        psys = prolong(rigid, ProlongationPattern.zeros(6))

        # Assert
        names = {s.name for e in psys.drift for s in e.free_symbols}
        assert "g0" not in names
        assert sympy.Rational(981, 100) in {abs(a) for e in psys.drift for a in e.atoms(sympy.Rational)}

    def test_embedding_and_box(self, mecanum):
        """Test that stacks start at the operating input value with zero derivatives."""
        # Act
        psys = prolong(mecanum, ProlongationPattern(orders=(2, 0, 0)))

        # Assert
        assert natural_embedding(psys) == [0.0, 0.0, 0.0, 1.0, 0.0]
        assert psys.box[3] == pytest.approx((0.1, 1.9))
        assert psys.box[4] == DERIVATIVE_BOX


class TestZeroSurface:
    """Test cases for zero_surface_point and zero_surface_indices."""

    def test_zeroes_stack_coordinates(self, mecanum):
        """Test that the stack of v1 is cleared and nothing else changes."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern(orders=(2, 0, 1)))
        base = [0.5, 0.5, 0.1, 1.0, 0.2, -0.3]

        # Act
        point = zero_surface_point(psys, IndexSet.of(1), base)

        # Assert
        assert point == [0.5, 0.5, 0.1, 0.0, 0.0, -0.3]
        assert zero_surface_indices(psys, IndexSet.of(1)) == [3, 4]

    def test_unprolonged_inputs_have_no_coordinates(self, mecanum):
        """Test that inputs without stacks are left alone."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern(orders=(1, 0, 0)))

        # Assert
        assert zero_surface_indices(psys, IndexSet.of(2)) == []
        assert zero_surface_point(psys, IndexSet.of(2)) == psys.point


class TestRemovalAgreement:
    """prolong with A against prolonging the system without A."""

    @pytest.mark.parametrize(
        "builtin_id, orders, removed",
        [
            ("motivating_square", (0, 0, 0), (2,)),
            ("motivating_square", (0, 1, 0), (1,)),
            ("motivating_square", (2, 0, 0), (2, 3)),
            ("mecanum", (1, 0, 0), (3,)),
            ("mecanum", (0, 0, 0), (1, 2)),
        ],
    )
    def test_same_prolonged_system(self, builtin_id, orders, removed):
        """Test that both constructions give the same states, drift and columns."""
        # Arrange
        sys = get_builtin(builtin_id).system()
        A = IndexSet.of(*removed)
        kept = A.complement(sys.p)

        # Act
        direct = prolong(sys, ProlongationPattern(orders=orders), A)
        reduced = prolong(
            remove_inputs(sys, A),
            ProlongationPattern(orders=tuple(orders[i - 1] for i in kept)),
        )

        # Assert
        assert direct.state_names == reduced.state_names
        assert direct.virtual_inputs == reduced.virtual_inputs
        assert direct.drift == reduced.drift
        assert direct.columns == reduced.columns
        assert direct.point == reduced.point
