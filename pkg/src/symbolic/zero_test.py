"""
Identically-Zero Testing

Sampling-based certification that an expression vanishes on a box: after
simplification, an expression is declared zero when every one of `trials`
seeded random evaluations stays below tol_zero. Nonzero verdicts always carry
a witness point. Samples that hit a singularity are redrawn a bounded number
of times.
"""

from collections.abc import Mapping
from typing import Optional

import numpy as np
import sympy
from pydantic import BaseModel
from tenacity import Retrying, retry_if_exception_type, stop_after_attempt

from src.symbolic.expression import (
    compile_vector,
    free_names,
    is_literal_zero,
    simplify,
)
from src.utils.errors import EvaluationError, ZeroTestExhaustedError
from src.utils.logger import get_logger

Box = Mapping[str, tuple[float, float]]

logger = get_logger(phase="symbolic", component="zero_test")


class ZeroVerdict(BaseModel):
    """Outcome of a zero test."""

    zero: bool
    witness: Optional[dict[str, float]] = None
    value: Optional[float] = None
    samples: int = 0
    seed: int = 0


class _SingularSamples(Exception):
    """Too few finite samples in the current draw."""


class ZeroTester:
    """
    Zero tester bound to one sampling box, with a per-expression cache.

    Args:
        box: Interval per variable
        trials: Finite samples required for a zero verdict
        tol: Absolute threshold tol_zero
        seed: Base RNG seed, recorded in every verdict
        max_retries: Redraw rounds for singular samples
        bindings: Fixed values for variables outside the box
    """

    def __init__(
        self,
        box: Box,
        trials: int = 64,
        tol: float = 1e-9,
        seed: int = 0,
        max_retries: int = 8,
        bindings: Optional[Mapping[str, float]] = None,
    ):
        self.box = dict(box)
        self.trials = trials
        self.tol = tol
        self.seed = seed
        self.max_retries = max_retries
        self.bindings = dict(bindings or {})
        self._cache: dict[sympy.Expr, ZeroVerdict] = {}

    def test(self, e: sympy.Expr) -> ZeroVerdict:
        """Zero verdict for e, cached by expression."""
        e = simplify(e)
        cached = self._cache.get(e)
        if cached is not None:
            return cached
        verdict = self._test(e)
        self._cache[e] = verdict
        return verdict

    def is_zero(self, e: sympy.Expr) -> bool:
        return self.test(e).zero

    def _test(self, e: sympy.Expr) -> ZeroVerdict:
        if is_literal_zero(e):
            return ZeroVerdict(zero=True, seed=self.seed)

        names = free_names(e)
        sampled = [n for n in names if n not in self.bindings]
        missing = [n for n in sampled if n not in self.box]
        if missing:
            raise EvaluationError(
                f"Variables not covered by box or bindings: {', '.join(missing)}"
            )
        if self.bindings:
            e = e.subs({sympy.Symbol(k): v for k, v in self.bindings.items()})
        fn = compile_vector([e], sampled)
        lows = np.array([self.box[n][0] for n in sampled], dtype=float)
        highs = np.array([self.box[n][1] for n in sampled], dtype=float)
        rng = np.random.default_rng(self.seed)

        collected = 0
        witness: Optional[tuple[np.ndarray, float]] = None

        def draw_round() -> None:
            nonlocal collected, witness
            needed = self.trials - collected
            points = rng.uniform(lows, highs, size=(needed, len(sampled)))
            values = fn(points)[:, 0]
            finite = np.isfinite(values)
            collected += int(finite.sum())
            over = np.flatnonzero(finite & (np.abs(values) > self.tol))
            if over.size:
                k = int(over[np.argmax(np.abs(values[over]))])
                witness = (points[k], float(values[k]))
                return
            if collected < self.trials:
                raise _SingularSamples(f"{self.trials - collected} singular samples")

        try:
            for attempt in Retrying(
                stop=stop_after_attempt(self.max_retries),
                retry=retry_if_exception_type(_SingularSamples),
                reraise=True,
            ):
                with attempt:
                    draw_round()
        except _SingularSamples as e_sing:
            logger.warning(
                "zero_test_exhausted",
                expression=e,
                collected=collected,
                trials=self.trials,
            )
            raise ZeroTestExhaustedError(
                f"Only {collected}/{self.trials} finite samples after "
                f"{self.max_retries} rounds"
            ) from e_sing

        if witness is not None:
            point, value = witness
            assignment = {n: float(x) for n, x in zip(sampled, point)}
            assignment.update(self.bindings)
            return ZeroVerdict(
                zero=False,
                witness=assignment,
                value=value,
                samples=collected,
                seed=self.seed,
            )
        return ZeroVerdict(zero=True, samples=collected, seed=self.seed)


def is_identically_zero(
    e: sympy.Expr,
    box: Box,
    trials: int = 64,
    tol: float = 1e-9,
    seed: int = 0,
    max_retries: int = 8,
) -> ZeroVerdict:
    """One-shot zero test; see ZeroTester."""
    return ZeroTester(
        box, trials=trials, tol=tol, seed=seed, max_retries=max_retries
    ).test(e)
