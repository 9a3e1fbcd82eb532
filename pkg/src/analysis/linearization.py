"""
Linearization Engine

Lie derivatives, vector relative degree, decoupling matrix A(x), drift vector
b(x), flatness verdicts, validity sampling and compatibility between outputs.

Example Usage:
    psys = prolong(system, ProlongationPattern.parse("0,1,0"))
    analyzer = OutputAnalyzer(psys, params)
    profile = analyzer.profile(augmented_output(psys, y, IndexSet.of(3), IndexSet.of(2)))
    sample = analyzer.sample_validity(profile)
"""

from collections.abc import Sequence
from typing import Optional

import numpy as np
import sympy
from scipy.stats import qmc

from src.models.config import ToolkitParams
from src.models.profile import (
    CompatibilityResult,
    FailureReason,
    RelativeDegreeProfile,
    ValiditySample,
    decoupling_measure,
)
from src.models.system import ChannelTag, IndexSet, OutputMap, ProlongedSystem
from src.symbolic.expression import render, simplify, symbol
from src.symbolic.zero_test import ZeroTester
from src.utils.errors import (
    NonSquareOutputError,
    RelativeDegreeCapError,
    SingularDecouplingError,
)
from src.utils.logger import get_logger

logger = get_logger(phase="linearization", component="linearization")

# factoring is skipped above this operation count
MAX_FACTOR_OPS = 4000

# (relative degree, decoupling row, drift term, derivative chain) of one channel
ChannelDerivation = tuple[Optional[int], list[sympy.Expr], sympy.Expr, list[sympy.Expr]]


def lie_derivative(
    h: sympy.Expr, field: Sequence[sympy.Expr], variables: Sequence[str]
) -> sympy.Expr:
    """L_field h = sum_k (dh/dx_k) field_k, simplified."""
    total = sympy.Integer(0)
    for name, f_k in zip(variables, field):
        if f_k == 0:
            continue
        d = sympy.diff(h, symbol(name))
        if d != 0:
            total += d * f_k
    return simplify(total)


def output_on(psys: ProlongedSystem, y: OutputMap) -> OutputMap:
    """Original output expressed on the prolonged system (parameters bound)."""
    subst = psys.base.symbol_table.parameter_substitution()
    return OutputMap(
        names=list(y.names),
        exprs=[simplify(e.xreplace(subst)) for e in y.exprs],
        tags=list(y.tags),
    )


def augmented_output(
    psys: ProlongedSystem, y: OutputMap, O: IndexSet, A: IndexSet
) -> OutputMap:
    """
    y_{O-bar, A}: original channels outside O followed by the input channels u_A.

    An input channel is its order-0 stack coordinate, or the virtual input itself
    when its chain length is zero.
    """
    kept = O.complement(len(y))
    base = output_on(psys, y)
    names = [base.names[j - 1] for j in kept]
    exprs = [base.exprs[j - 1] for j in kept]
    tags = [base.tags[j - 1] for j in kept]
    for i in A:
        names.append(psys.base.inputs[i - 1])
        exprs.append(psys.input_expression(i))
        tags.append(ChannelTag(kind="input", index=i))
    return OutputMap(names=names, exprs=exprs, tags=tags)


def determinant_factors(A_sym: Sequence[Sequence[sympy.Expr]]) -> list[sympy.Expr]:
    """
    Non-constant factors of det A (square) or det(A A^T) (wide).

    Irreducible factors from `sympy.factor_list`, each trigsimp'ed and split
    again; factors that reduce to constants are dropped. Determinants too
    large to factor fall back to their common-term split.
    """
    M = sympy.Matrix(A_sym)
    if M.rows == 0:
        return []
    det = M.det(method="berkowitz") if M.rows == M.cols else (M * M.T).det(method="berkowitz")
    det = sympy.together(det)
    try:
        if sympy.count_ops(det) > MAX_FACTOR_OPS:
            raise sympy.PolynomialError("determinant too large to factor")
        _, pairs = sympy.factor_list(det)
        candidates = [base for base, _ in pairs]
    except sympy.PolynomialError:
        candidates = [
            f.base if isinstance(f, sympy.Pow) and f.exp.is_Integer else f
            for f in sympy.Mul.make_args(sympy.factor_terms(det))
        ]

    factors: list[sympy.Expr] = []
    for candidate in candidates:
        if sympy.count_ops(candidate) <= 200:
            candidate = sympy.trigsimp(candidate)
        for f in sympy.Mul.make_args(candidate):
            base = f.base if isinstance(f, sympy.Pow) and f.exp.is_Integer else f
            if base.is_number or not base.free_symbols:
                continue
            if -base in factors or base in factors:
                continue
            factors.append(base)
    return factors


def exclusion_agreement(
    first: np.ndarray, second: np.ndarray, tol: float = 1e-8
) -> bool:
    """
    Zero/sign agreement of two scalar fields sampled at the same points.

    Both must vanish together, and where neither vanishes the sign ratio must
    be constant.
    """
    a = np.asarray(first, dtype=float)
    b = np.asarray(second, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    zero_a = np.abs(a) <= tol
    zero_b = np.abs(b) <= tol
    if np.any(zero_a != zero_b):
        return False
    signs = np.sign(a[~zero_a]) * np.sign(b[~zero_b])
    return bool(signs.size == 0 or np.all(signs == signs[0]))


class OutputAnalyzer:
    """
    Relative-degree, validity and compatibility computations on one prolonged
    system, with a shared zero tester and sample set.
    """

    def __init__(self, psys: ProlongedSystem, params: Optional[ToolkitParams] = None):
        self.psys = psys
        self.params = params or ToolkitParams()
        sampling = self.params.sampling
        box = psys.box_dict()
        for name in psys.virtual_inputs:
            box.setdefault(name, (-1.0, 1.0))
        self.tester = ZeroTester(
            box,
            trials=sampling.zero_test_trials,
            tol=self.params.tolerances.tol_zero,
            seed=sampling.seed,
            max_retries=sampling.zero_test_retries,
        )
        self._samples: Optional[np.ndarray] = None
        self._channels: dict[tuple[sympy.Expr, int], ChannelDerivation] = {}

    @property
    def tol_rank(self) -> float:
        return self.params.tolerances.tol_rank

    def default_cap(self) -> int:
        return self.psys.n + self.params.budget.degree_cap_margin

    def profile(
        self,
        y: OutputMap,
        cap: Optional[int] = None,
        point: Optional[Sequence[float]] = None,
        allow_wide: bool = False,
    ) -> RelativeDegreeProfile:
        """
        Vector relative degree, decoupling matrix and flatness verdict.

        Args:
            y: Output on the prolonged system (use output_on/augmented_output)
            cap: Relative degree cap (default n_l + margin)
            point: Evaluation point for the verdict (default natural embedding)
            allow_wide: Accept fewer channels than virtual inputs (full row rank)

        Raises:
            NonSquareOutputError: Channel count differs from the virtual input count
            RelativeDegreeCapError: cap < n_l + 1
        """
        psys = self.psys
        m, p = len(y), psys.m
        if m != p and not (allow_wide and m < p):
            raise NonSquareOutputError(
                f"Output has {m} channels but the system has {p} virtual inputs"
            )
        cap = cap if cap is not None else self.default_cap()
        if cap < psys.n + 1:
            raise RelativeDegreeCapError(f"Cap {cap} below n_l + 1 = {psys.n + 1}")

        virtual = [symbol(v) for v in psys.virtual_inputs]
        r: list[Optional[int]] = []
        rows: list[list[sympy.Expr]] = []
        drift: list[sympy.Expr] = []
        chains: list[list[sympy.Expr]] = []
        for h in y.exprs:
            if h in virtual:
                # input channel without integrators: relative degree 0
                r.append(0)
                rows.append([sympy.Integer(1 if v == h else 0) for v in virtual])
                drift.append(sympy.Integer(0))
                chains.append([])
                continue
            found, row, term, chain = self._channel(h, cap)
            r.append(found)
            rows.append(row)
            drift.append(term)
            chains.append(chain)

        profile = self._verdict(y, r, rows, drift, chains, point)
        logger.debug(
            "profile_computed",
            channels=y.names,
            pattern=psys.pattern.orders,
            r=r,
            flat=profile.flat,
            reason=profile.reason,
        )
        return profile

    def _channel(self, h: sympy.Expr, cap: int) -> ChannelDerivation:
        key = (h, cap)
        if key in self._channels:
            return self._channels[key]
        psys = self.psys
        current = simplify(h)
        chain: list[sympy.Expr] = []
        result: ChannelDerivation = (
            None,
            [sympy.Integer(0)] * psys.m,
            sympy.Integer(0),
            [],
        )
        for k in range(1, cap + 1):
            chain.append(current)
            row = [lie_derivative(current, g, psys.state_names) for g in psys.columns]
            if any(not self.tester.is_zero(e) for e in row):
                result = (k, row, lie_derivative(current, psys.drift, psys.state_names), chain)
                break
            current = lie_derivative(current, psys.drift, psys.state_names)
        self._channels[key] = result
        return result

    def _verdict(
        self,
        y: OutputMap,
        r: list[Optional[int]],
        rows: list[list[sympy.Expr]],
        drift: list[sympy.Expr],
        chains: list[list[sympy.Expr]],
        point: Optional[Sequence[float]],
    ) -> RelativeDegreeProfile:
        psys = self.psys
        reason: Optional[FailureReason] = None
        witness: Optional[float] = None
        profile = RelativeDegreeProfile(
            channels=list(y.names),
            tags=list(y.tags),
            pattern=psys.pattern,
            removed=psys.removed,
            state_names=list(psys.state_names),
            virtual_inputs=list(psys.virtual_inputs),
            r=r,
            A_sym=rows,
            b_sym=drift,
            chain=chains,
            flat=False,
        )
        total = sum(v for v in r if v is not None)
        if any(v is None for v in r):
            reason = "relative-degree-undefined"
        elif total < psys.n:
            reason = "degree-sum-short"
        else:
            # a sum above n_l needs a rank-deficient A
            witness = float(profile.measure(psys.point if point is None else point)[0])
            if not np.isfinite(witness) or witness <= self.tol_rank:
                reason = "singular-decoupling"
            elif total != psys.n:
                reason = "degree-sum-short"
        if reason == "degree-sum-short" or reason == "relative-degree-undefined":
            witness = None
        return profile.model_copy(
            update={"flat": reason is None, "witness": witness, "reason": reason}
        )

    def sample_points(self) -> np.ndarray:
        """x0 followed by the low-discrepancy sample of the box (cached)."""
        if self._samples is None:
            psys = self.psys
            lows = np.array([lo for lo, _ in psys.box], dtype=float)
            highs = np.array([hi for _, hi in psys.box], dtype=float)
            n_samples = self.params.sampling.validity_samples
            halton = qmc.Halton(d=psys.n, scramble=False)
            unit = halton.random(n_samples + 1)[1:]  # skip the origin
            pts = qmc.scale(unit, lows, np.where(highs > lows, highs, lows + 1e-12))
            self._samples = np.vstack([np.asarray(psys.point, dtype=float), pts])
        return self._samples

    def sample_validity(
        self, profile: RelativeDegreeProfile, with_factors: bool = False
    ) -> ValiditySample:
        """
        Accepted points where the decoupling matrix is nonsingular.

        An empty accepted set is reported with a warning; it is not an error.
        """
        points = self.sample_points()
        if profile.degree_sum is None:
            values = np.full(points.shape[0], np.nan)
        else:
            values = profile.measure(points)
        accepted: list[int] = []
        rejected: list[tuple[int, str]] = []
        for k, v in enumerate(values):
            if not np.isfinite(v):
                rejected.append((k, "non-finite"))
            elif v > self.tol_rank:
                accepted.append(k)
            else:
                rejected.append((k, "singular"))
        factors = (
            [render(f) for f in determinant_factors(profile.A_sym)]
            if with_factors and profile.degree_sum is not None
            else []
        )
        if not accepted:
            logger.warning(
                "validity_sample_empty",
                channels=profile.channels,
                pattern=profile.pattern.orders,
                samples=len(points),
            )
        return ValiditySample(
            points=points.tolist(),
            accepted=accepted,
            rejected=rejected,
            factors=factors,
            tol_rank=self.tol_rank,
        )

    def feedback_terms(
        self, profile: RelativeDegreeProfile, point: Sequence[float]
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        Numeric A(x), b(x) at a point.

        Raises:
            SingularDecouplingError: If A is singular there
        """
        return feedback_terms(profile, point, self.tol_rank)

    def compatible(
        self,
        first: RelativeDegreeProfile,
        first_sample: ValiditySample,
        second: RelativeDegreeProfile,
        second_sample: ValiditySample,
    ) -> CompatibilityResult:
        """
        Compatibility of two outputs on this prolonged system: a shared accepted
        sample whose perturbed neighbours are accepted by both.
        """
        shared = sorted(set(first_sample.accepted) & set(second_sample.accepted))
        if not shared:
            return CompatibilityResult(compatible=False)
        sampling = self.params.sampling
        points = np.asarray(first_sample.points, dtype=float)
        widths = np.array([hi - lo for lo, hi in self.psys.box], dtype=float)
        rng = np.random.default_rng(sampling.seed)
        probes = 0
        for k in shared:
            center = points[k]
            directions = rng.standard_normal((sampling.neighbour_probes, len(center)))
            directions /= np.linalg.norm(directions, axis=1, keepdims=True)
            neighbours = center + sampling.probe_radius * widths * directions
            cloud = np.vstack([center, neighbours])
            probes += len(cloud)
            ok_first = first.measure(cloud) > self.tol_rank
            ok_second = second.measure(cloud) > self.tol_rank
            if bool(np.all(ok_first & ok_second)):
                return CompatibilityResult(
                    compatible=True, witness=center.tolist(), probes=probes
                )
        return CompatibilityResult(compatible=False, probes=probes)


def relative_degree_profile(
    psys: ProlongedSystem,
    h: OutputMap,
    cap: Optional[int] = None,
    params: Optional[ToolkitParams] = None,
) -> RelativeDegreeProfile:
    """Module-level convenience around OutputAnalyzer.profile."""
    return OutputAnalyzer(psys, params).profile(h, cap=cap)


def sample_validity(
    psys: ProlongedSystem,
    profile: RelativeDegreeProfile,
    params: Optional[ToolkitParams] = None,
    with_factors: bool = True,
) -> ValiditySample:
    return OutputAnalyzer(psys, params).sample_validity(profile, with_factors=with_factors)


def feedback_terms(
    profile: RelativeDegreeProfile, point: Sequence[float], tol_rank: float = 1e-8
) -> tuple[np.ndarray, np.ndarray]:
    """Numeric (A, b) at a point; raises SingularDecouplingError when singular."""
    A = profile.decoupling(point)[0]
    b = profile.drift_vector(point)[0]
    measure = float(decoupling_measure(A))
    if not np.isfinite(measure) or measure <= tol_rank:
        raise SingularDecouplingError(
            f"Decoupling matrix singular at point (measure={measure:.3g})",
            determinant=measure,
        )
    return A, b
