"""
Relative-Degree Profile Models

RelativeDegreeProfile carries the symbolic decoupling data of one output on
one prolonged system; ValiditySample carries the sampled evidence of where it
is nonsingular.
"""

from typing import Any, Literal, Optional

import numpy as np
import sympy
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from src.models.system import ChannelTag, IndexSet, ProlongationPattern
from src.symbolic.expression import compile_vector, render

FailureReason = Literal[
    "relative-degree-undefined", "degree-sum-short", "singular-decoupling"
]


BALANCE_SWEEPS = 4


def _unit(A: np.ndarray, axis: int) -> np.ndarray:
    norms = np.linalg.norm(A, axis=axis, keepdims=True)
    return A / np.where(norms > 0, norms, 1.0)


def decoupling_measure(A: np.ndarray) -> np.ndarray:
    """
    Nonsingularity measure of equilibrated decoupling matrices.

    Columns and rows are scaled to unit norm in alternating sweeps, ending on
    the rows, so input units (forces next to torques) do not move the value.
    |det| for square matrices, sqrt(det(A A^T)) for wide ones (full row rank).
    Accepts shape (m, p) or (N, m, p); non-finite entries give NaN.
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    m, p = A.shape[1], A.shape[2]
    if m == 0:
        out = np.ones(A.shape[0])
        return out[0] if single else out
    finite = np.isfinite(A).all(axis=(1, 2))
    safe = np.where(finite[:, None, None], A, 0.0)
    for _ in range(BALANCE_SWEEPS):
        safe = _unit(_unit(safe, axis=1), axis=2)
    if m == p:
        out = np.abs(np.linalg.det(safe))
    else:
        gram = safe @ np.swapaxes(safe, 1, 2)
        out = np.sqrt(np.clip(np.linalg.det(gram), 0.0, None))
    out = np.where(finite, out, np.nan)
    return out[0] if single else out


class RelativeDegreeProfile(BaseModel):
    """
    Vector relative degree r, decoupling matrix A(x), drift vector b(x) and
    flatness verdict of an output on a prolonged system.

    Channels whose relative degree is undefined within the cap have r = None
    and zero rows. Input channels with zero chain length have r = 0.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    channels: list[str]
    tags: list[ChannelTag]
    pattern: ProlongationPattern
    removed: IndexSet = Field(default_factory=IndexSet)
    state_names: list[str]
    virtual_inputs: list[str]
    r: list[Optional[int]]
    A_sym: list[list[sympy.Expr]]
    b_sym: list[sympy.Expr]
    chain: list[list[sympy.Expr]] = Field(default_factory=list)
    flat: bool
    witness: Optional[float] = None
    reason: Optional[FailureReason] = None

    _compiled: Any = PrivateAttr(default=None)

    @property
    def m(self) -> int:
        return len(self.channels)

    @property
    def degree_sum(self) -> Optional[int]:
        if any(r is None for r in self.r):
            return None
        return sum(r for r in self.r if r is not None)

    def _functions(self) -> Any:
        if self._compiled is None:
            flat_A = [e for row in self.A_sym for e in row]
            self._compiled = (
                compile_vector(flat_A, self.state_names),
                compile_vector(self.b_sym, self.state_names),
            )
        return self._compiled

    def decoupling(self, points: Any) -> np.ndarray:
        """A(x) at points of shape (k,) or (N, k); returns (N, m, p)."""
        fa, _ = self._functions()
        values = fa(points)
        return values.reshape(values.shape[0], self.m, len(self.virtual_inputs))

    def drift_vector(self, points: Any) -> np.ndarray:
        """b(x) at points; returns (N, m)."""
        _, fb = self._functions()
        return fb(points)

    def measure(self, points: Any) -> np.ndarray:
        """Row-normalized nonsingularity measure at points; returns (N,)."""
        return decoupling_measure(self.decoupling(points))

    def summary(self) -> dict[str, Any]:
        """JSON-ready report entry."""
        return {
            "channels": self.channels,
            "pattern": list(self.pattern.orders),
            "removed": list(self.removed.indices),
            "r": self.r,
            "degree_sum": self.degree_sum,
            "n_state": len(self.state_names),
            "flat": self.flat,
            "det_at_point": self.witness,
            "reason": self.reason,
            "decoupling": [[render(e) for e in row] for row in self.A_sym],
            "drift": [render(e) for e in self.b_sym],
        }


class ValiditySample(BaseModel):
    """Sampled validity evidence; point 0 is the evaluation point x0."""

    points: list[list[float]]
    accepted: list[int]
    rejected: list[tuple[int, str]] = Field(default_factory=list)
    factors: list[str] = Field(default_factory=list)
    tol_rank: float = 1e-8

    @property
    def empty(self) -> bool:
        return not self.accepted

    def accepted_points(self) -> np.ndarray:
        pts = np.asarray(self.points, dtype=float)
        return pts[self.accepted] if self.accepted else pts[:0]

    def summary(self) -> dict[str, Any]:
        return {
            "samples": len(self.points),
            "accepted": len(self.accepted),
            "rejected": len(self.rejected),
            "exclusion_factors": self.factors,
        }


class CompatibilityResult(BaseModel):
    """Outcome of a compatibility test between two outputs."""

    compatible: bool
    witness: Optional[list[float]] = None
    probes: int = 0
