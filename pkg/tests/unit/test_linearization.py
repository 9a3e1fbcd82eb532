"""
Unit tests for the linearization engine: Lie derivatives, relative-degree
profiles, determinant factors, validity sampling and compatibility.
"""

import numpy as np
import pytest
import sympy

from src.analysis.linearization import (
    OutputAnalyzer,
    augmented_output,
    determinant_factors,
    exclusion_agreement,
    feedback_terms,
    lie_derivative,
    output_on,
)
from src.builtins import get_builtin
from src.models.config import ToolkitParams
from src.models.system import ChannelTag, IndexSet, OutputMap, ProlongationPattern
from src.simulation.integrator import OdeLoop, integrate
from src.symbolic.expression import compile_vector, symbol
from src.system.prolongation import prolong
from src.utils.errors import NonSquareOutputError, RelativeDegreeCapError, SingularDecouplingError


@pytest.fixture
def params():
    return ToolkitParams().with_overrides(samples=32)


@pytest.fixture
def square():
    return get_builtin("motivating_square").system()


@pytest.fixture
def mecanum():
    return get_builtin("mecanum").system()


class TestLieDerivative:
    """Test cases for lie_derivative."""

    def test_along_drift(self, square):
        """Test L_f x1 = x2 on the square."""
        # Assert
        assert lie_derivative(symbol("x1"), square.drift, square.states) == symbol("x2")

    def test_trig_field(self, mecanum):
        """Test L_g1 (x cos(theta) + y sin(theta)) = 1."""
        # Arrange
        h = symbol("x") * sympy.cos(symbol("theta")) + symbol("y") * sympy.sin(symbol("theta"))

        # Act
        result = lie_derivative(h, mecanum.columns[0], mecanum.states)

        # Assert
        assert sympy.simplify(result - 1) == 0


class TestOutputs:
    """Test cases for output_on and augmented_output."""

    def test_augmented_channels(self, square):
        """Test that u_A follows the kept original channels."""
        # Arrange
        psys = prolong(square, ProlongationPattern(orders=(0, 1, 0)))

        # Act
        y = augmented_output(psys, square.output_map(), IndexSet.of(3), IndexSet.of(2))

        # Assert
        assert y.names == ["x1", "x3", "u2"]
        assert y.exprs[2] == symbol("u2_d0")
        assert y.tags[2] == ChannelTag(kind="input", index=2)

    def test_static_input_channel_is_virtual_input(self, square):
        """Test that an unprolonged input channel is the input itself."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))

        # Act
        y = augmented_output(psys, square.output_map(), IndexSet.of(1), IndexSet.of(1))

        # Assert
        assert y.exprs[-1] == symbol("u1")

    def test_parameters_bound(self):
        """Test that output_on substitutes parameter values."""
        # Arrange
        rigid = get_builtin("rigid_body").system()
        psys = prolong(rigid, ProlongationPattern.zeros(6))

        # Act
        y = output_on(psys, rigid.output_map("pose"))

        # Assert
        names = {s.name for e in y.exprs for s in e.free_symbols}
        assert names <= set(psys.state_names)


class TestProfile:
    """Test cases for OutputAnalyzer.profile."""

    def test_prolonged_square_profile(self, square, params):
        """Test r, A and the flat verdict for (0,1,0)."""
        # Arrange
        psys = prolong(square, ProlongationPattern(orders=(0, 1, 0)))
        analyzer = OutputAnalyzer(psys, params)

        # Act
        profile = analyzer.profile(output_on(psys, square.output_map()))

        # Assert
        assert profile.r == [2, 2, 1]
        assert profile.degree_sum == 5
        assert profile.A_sym == [[1, 0, 0], [0, 1, 1], [0, 0, 1]]
        assert profile.flat
        assert profile.witness == pytest.approx(np.sqrt(8.0) / 3.0)

    def test_duplicated_channel_is_singular(self, mecanum, params):
        """Test the singular-decoupling reason."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern.zeros(3))
        x, y = symbol("x"), symbol("y")
        out = OutputMap.from_original(["a", "b", "c"], [x, y, x])

        # Act
        profile = OutputAnalyzer(psys, params).profile(out)

        # Assert
        assert profile.degree_sum == 3
        assert not profile.flat
        assert profile.reason == "singular-decoupling"

    def test_square_sum_short(self, square, params):
        """Test the degree-sum-short reason when the chains miss a state."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))
        y = OutputMap.from_original(["a", "b", "c"], [symbol("x2"), symbol("x3"), symbol("x4")])

        # Act
        profile = OutputAnalyzer(psys, params).profile(y)

        # Assert
        assert profile.r == [1, 1, 1]
        assert profile.reason == "degree-sum-short"
        assert profile.witness is None

    def test_repeated_channel_is_singular(self, square, params):
        """Test that a repeated channel overshoots n and reads singular."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))
        x1, x3 = symbol("x1"), symbol("x3")
        y = OutputMap.from_original(["a", "b", "c"], [x1, x3, x1])

        # Act
        profile = OutputAnalyzer(psys, params).profile(y)

        # Assert
        assert profile.r == [2, 1, 2]
        assert profile.reason == "singular-decoupling"

    def test_full_state_of_rectangular_system_is_singular(self, params):
        """Test y = x on the four-input system: A has two equal rows."""
        # Arrange
        rect = get_builtin("motivating_rect").system()
        psys = prolong(rect, ProlongationPattern.zeros(4))

        # Act
        profile = OutputAnalyzer(psys, params).profile(output_on(psys, rect.output_map("full")))

        # Assert
        assert profile.r == [2, 1, 1, 1]
        assert profile.A_sym == [[1, 1, 0, 0], [1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 1, 1]]
        assert not profile.flat
        assert profile.reason == "singular-decoupling"
        assert profile.witness == pytest.approx(0.0, abs=1e-12)

    def test_constant_channel_undefined(self, square, params):
        """Test that a constant channel has no relative degree."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))
        y = OutputMap.from_original(["a", "b", "c"], [symbol("x1"), symbol("x3"), sympy.Integer(1)])

        # Act
        profile = OutputAnalyzer(psys, params).profile(y)

        # Assert
        assert profile.r[2] is None
        assert profile.reason == "relative-degree-undefined"
        assert profile.degree_sum is None

    def test_mecanum_singular_when_stopped(self, mecanum, params):
        """Test that (x, y, v3) loses rank at v1 = 0."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern(orders=(1, 0, 1)))
        analyzer = OutputAnalyzer(psys, params)
        y = augmented_output(psys, mecanum.output_map(), IndexSet.of(3), IndexSet.of(3))
        stopped = [0.0, 0.0, 0.0, 0.0, 0.0]

        # Act
        profile = analyzer.profile(y)

        # Assert
        assert profile.flat
        assert profile.r == [2, 2, 1]
        assert profile.measure(stopped)[0] == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(SingularDecouplingError):
            feedback_terms(profile, stopped)
        A, b = feedback_terms(profile, psys.point)
        assert A.shape == (3, 3)
        assert b.shape == (3,)

    def test_non_square_rejected(self, square, params):
        """Test that two channels on three inputs need allow_wide."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))
        y = OutputMap.from_original(["a", "b"], [symbol("x1"), symbol("x3")])
        analyzer = OutputAnalyzer(psys, params)

        # Act & Assert
        with pytest.raises(NonSquareOutputError, match="2 channels but the system has 3"):
            analyzer.profile(y)
        assert analyzer.profile(y, allow_wide=True).m == 2

    def test_cap_too_small(self, square, params):
        """Test that the cap must exceed n_l."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))

        # Act & Assert
        with pytest.raises(RelativeDegreeCapError, match="below n_l"):
            OutputAnalyzer(psys, params).profile(square.output_map(), cap=3)

    @pytest.mark.parametrize(
        "orders, removed, omitted",
        [((0, 1, 0), (2,), (3,)), ((0, 0, 0), (1,), (1,)), ((1, 1, 0), (1, 2), (1, 3))],
    )
    def test_input_channel_rows_are_unit_rows(self, square, params, orders, removed, omitted):
        """Test that every input channel row of A is the unit row of its virtual input."""
        # Arrange
        psys = prolong(square, ProlongationPattern(orders=orders))
        y = augmented_output(psys, square.output_map(), IndexSet.of(*omitted), IndexSet.of(*removed))

        # Act
        profile = OutputAnalyzer(psys, params).profile(y)

        # Assert
        kept = 3 - len(omitted)
        for row, j in zip(profile.A_sym[kept:], removed):
            target = psys.virtual_position(j)
            assert row == [1 if k == target else 0 for k in range(psys.m)]
        assert profile.r[kept:] == [orders[j - 1] for j in removed]


class TestDeterminantFactors:
    """Test cases for determinant_factors and exclusion_agreement."""

    def test_unicycle_factor(self):
        """Test that det [[c, -v s], [s, v c]] factors to v."""
        # Arrange
        th, v = symbol("theta"), symbol("v1_d0")
        A = [[sympy.cos(th), -v * sympy.sin(th)], [sympy.sin(th), v * sympy.cos(th)]]

        # Act
        factors = determinant_factors(A)

        # Assert
        assert factors == [v]

    def test_constant_determinant_has_no_factors(self):
        """Test that unit determinants produce no exclusions."""
        # Assert
        assert determinant_factors([[sympy.Integer(1), sympy.Integer(0)], [sympy.Integer(0), sympy.Integer(2)]]) == []

    def test_product_split_into_irreducible_factors(self):
        """Test that an expanded entry is reported factor by factor."""
        # Arrange
        x, y = symbol("x"), symbol("y")
        A = [[x * y + x, sympy.Integer(0)], [sympy.Integer(0), 2 * y]]

        # Act
        factors = determinant_factors(A)

        # Assert
        assert set(factors) == {x, y, y + 1}
        assert len(factors) == 3

    def test_agreement(self):
        """Test zero and sign agreement of sampled fields."""
        # Arrange
        x = np.linspace(-1.0, 1.0, 11)

        # Assert
        assert exclusion_agreement(2.0 * x, -x)
        assert not exclusion_agreement(x, x**2)
        assert not exclusion_agreement(x, x + 0.5)


class TestValidityAndCompatibility:
    """Test cases for sample_validity and compatible."""

    def test_validity_sample(self, square, params):
        """Test that a constant decoupling matrix accepts every sample."""
        # Arrange
        psys = prolong(square, ProlongationPattern.zeros(3))
        analyzer = OutputAnalyzer(psys, params)
        profile = analyzer.profile(output_on(psys, square.output_map()))

        # Act
        sample = analyzer.sample_validity(profile, with_factors=True)

        # Assert
        assert len(sample.points) == 33
        assert sample.accepted == list(range(33))
        assert sample.factors == []
        assert sample.points[0] == [0.0, 0.0, 0.0, 0.0]

    def test_empty_sample_warns(self, mecanum, params, mocker):
        """Test that an empty accepted set is a warning, not an error."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern.zeros(3))
        analyzer = OutputAnalyzer(psys, params)
        y = OutputMap.from_original(["a", "b", "c"], [symbol("x"), symbol("y"), symbol("x")])
        profile = analyzer.profile(y)
        logger = mocker.patch("src.analysis.linearization.logger")

        # Act
        sample = analyzer.sample_validity(profile)

        # Assert
        assert sample.empty
        assert all(reason == "singular" for _, reason in sample.rejected)
        logger.warning.assert_called_once()

    def test_compatible_outputs(self, mecanum, params):
        """Test that the omnidirectional and unicycle outputs share a region."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern(orders=(1, 0, 1)))
        analyzer = OutputAnalyzer(psys, params)
        full = analyzer.profile(output_on(psys, mecanum.output_map()))
        reduced = analyzer.profile(
            augmented_output(psys, mecanum.output_map(), IndexSet.of(3), IndexSet.of(3))
        )

        # Act
        result = analyzer.compatible(
            full, analyzer.sample_validity(full), reduced, analyzer.sample_validity(reduced)
        )

        # Assert
        assert result.compatible
        assert result.witness is not None
        assert result.probes > 0


class TestClosedLoopLinearization:
    """The linearizing feedback turns each channel into a chain of integrators."""

    def test_output_derivatives_follow_virtual_input(self, mecanum, params):
        """Test that finite differences of y_i of order r_i reproduce constant v_i."""
        # Arrange
        psys = prolong(mecanum, ProlongationPattern(orders=(1, 0, 1)))
        analyzer = OutputAnalyzer(psys, params)
        profile = analyzer.profile(
            augmented_output(psys, mecanum.output_map(), IndexSet.of(3), IndexSet.of(3))
        )
        drift = compile_vector(psys.drift, psys.state_names)
        columns = compile_vector([e for col in psys.columns for e in col], psys.state_names)
        v = np.array([0.3, -0.2, 0.1])
        h = 1e-3

        def closed_loop(t, x):
            A, b = feedback_terms(profile, x)
            G = columns(x)[0].reshape(psys.m, psys.n)
            return drift(x)[0] + G.T @ np.linalg.solve(A, -b + v)

        # Act
        trace = integrate(OdeLoop(closed_loop, psys.state_names), psys.point, 0.1, h)
        states = trace.frame[psys.state_names].to_numpy()
        outputs = compile_vector([chain[0] for chain in profile.chain], psys.state_names)(states)

        # Assert
        assert profile.r == [2, 2, 1]
        for i, r in enumerate(profile.r):
            estimate = np.diff(outputs[:, i], n=r) / h**r
            np.testing.assert_allclose(estimate, v[i], atol=1e-5)
