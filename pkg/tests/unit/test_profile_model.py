"""
Unit tests for the decoupling nonsingularity measure.
"""

import numpy as np
import pytest

from src.models.profile import decoupling_measure


def _rotation(phi: float, theta: float) -> np.ndarray:
    cp, sp, ct, st = np.cos(phi), np.sin(phi), np.cos(theta), np.sin(theta)
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    ry = np.array([[ct, 0, st], [0, 1, 0], [-st, 0, ct]])
    return ry @ rx


class TestDecouplingMeasure:
    """Test cases for decoupling_measure."""

    def test_identity(self):
        """Test that a unit matrix measures one."""
        assert decoupling_measure(np.eye(3)) == pytest.approx(1.0)

    def test_singular_stays_singular_under_column_scaling(self):
        """Test that rescaling an input never hides a rank drop."""
        # Arrange
        A = np.array([[1.0, 2.0], [2.0, 4.0]]) @ np.diag([1.0, 1e6])

        # Assert
        assert decoupling_measure(A) < 1e-10

    def test_small_column_does_not_read_singular(self):
        """Test that a column in small units keeps a well-posed matrix nonsingular."""
        # Arrange
        A = np.array([[1.0, 1e-9], [1.0, 2e-9]])

        # Act
        measure = decoupling_measure(A)

        # Assert
        assert measure > 0.1

    def test_force_torque_block_near_hover(self):
        """Test the flying-platform full-task law with torque columns around 1e3."""
        # Arrange
        f = np.array([-0.92, 0.0, 9.65])
        skew = np.array([[0, -f[2], f[1]], [f[2], 0, -f[0]], [-f[1], f[0], 0]])
        R = _rotation(0.047, 0.024)
        inertia = np.diag([100.0, 100.0, 50.0])
        A = np.block([[R, -R @ skew @ inertia], [np.zeros((3, 3)), inertia]])

        # Act
        measure = decoupling_measure(A)

        # Assert
        assert measure > 1e-3

    def test_batched_with_non_finite(self):
        """Test shape handling and NaN for non-finite samples."""
        # Arrange
        batch = np.stack([np.eye(2), np.array([[np.inf, 0.0], [0.0, 1.0]]), np.zeros((2, 2))])

        # Act
        out = decoupling_measure(batch)

        # Assert
        assert out.shape == (3,)
        assert out[0] == pytest.approx(1.0)
        assert np.isnan(out[1])
        assert out[2] == 0.0

    def test_wide_matrix_full_row_rank(self):
        """Test the Gram measure of a wide matrix."""
        # Arrange
        A = np.array([[1.0, 0.0, 0.0], [0.0, 1e-6, 1e-6]])

        # Assert
        assert decoupling_measure(A) > 0.5
        assert decoupling_measure(np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0]])) < 1e-6

    def test_empty_rows(self):
        """Test that a matrix with no channels measures one."""
        assert decoupling_measure(np.zeros((0, 3))) == pytest.approx(1.0)
