"""
Output Jets

Total time derivatives of output channels with the input jets u_d0, u_d1, ...
kept as symbols. One table per removed set answers relative-degree and
decoupling questions for every prolongation pattern at once: on the prolonged
system, input j reaches channel i first at order c_ij + l_j, always through
the coefficient a_ij = d y_i^(c_ij) / d u_j_d0.

Example Usage:
    space = JetSpace(system, params)
    table = JetTable(system, system.output_map(), space)
    table.relative_degrees(ProlongationPattern.parse("0,1,0"), [1, 2, 3])  # [2, 2, 1]
"""

from collections.abc import Sequence
from typing import Optional

import numpy as np
import sympy
from pydantic import BaseModel, Field
from scipy.stats import qmc

from src.models.config import ToolkitParams
from src.models.profile import FailureReason, decoupling_measure
from src.models.system import IndexSet, OutputMap, ProlongationPattern, SystemDefinition
from src.symbolic.expression import compile_vector, simplify, symbol
from src.symbolic.zero_test import ZeroTester
from src.system.prolongation import DERIVATIVE_BOX
from src.utils.logger import get_logger

logger = get_logger(phase="classification", component="jets")


class JetVerdict(BaseModel):
    """Screening result of one (pattern, channels, input channels) choice."""

    r: list[Optional[int]]
    n_state: int
    flat: bool
    reason: Optional[FailureReason] = None
    accepted: list[int] = Field(default_factory=list)

    @property
    def at_operating_point(self) -> bool:
        return 0 in self.accepted


class JetSpace:
    """
    Coordinates (states, then every input jet up to order l_max) with the
    operating point and a low-discrepancy sample of the box.

    Row 0 of `points` is the natural embedding of x0: states at x0, u_d0 at the
    input operating values, higher jets at zero.
    """

    def __init__(self, sys: SystemDefinition, params: Optional[ToolkitParams] = None):
        self.sys = sys
        self.params = params or ToolkitParams()
        l_max = self.params.budget.l_max
        names = list(sys.states)
        point = list(sys.state_point)
        box = list(sys.state_box)
        for j, u in enumerate(sys.inputs):
            for k in range(l_max + 1):
                names.append(f"{u}_d{k}")
                point.append(sys.input_values[j] if k == 0 else 0.0)
                box.append(sys.input_ranges[j] if k == 0 else DERIVATIVE_BOX)
        self.names = names
        self.index = {name: k for k, name in enumerate(names)}
        self.box = box

        lows = np.array([lo for lo, _ in box], dtype=float)
        highs = np.array([hi for _, hi in box], dtype=float)
        halton = qmc.Halton(d=len(names), scramble=False)
        unit = halton.random(self.params.sampling.validity_samples + 1)[1:]
        sample = qmc.scale(unit, lows, np.where(highs > lows, highs, lows + 1e-12))
        self.points = np.vstack([np.asarray(point, dtype=float), sample])

    def jet_interval(self, input_index: int, k: int) -> tuple[float, float]:
        """Sampling interval of u_j^(k) (input is 1-based)."""
        return self.sys.input_ranges[input_index - 1] if k == 0 else DERIVATIVE_BOX

    def project(self, zero: IndexSet) -> np.ndarray:
        """Sample points with every jet of the inputs in `zero` set to 0."""
        if not zero:
            return self.points
        projected = self.points.copy()
        for i in zero:
            prefix = f"{self.sys.inputs[i - 1]}_d"
            for name, k in self.index.items():
                if name.startswith(prefix) and name[len(prefix):].isdigit():
                    projected[:, k] = 0.0
        return projected

    def columns(self, names: Sequence[str], points: np.ndarray) -> np.ndarray:
        """Columns for `names`; coordinates outside the space read as zero."""
        out = np.zeros((points.shape[0], len(names)))
        for c, name in enumerate(names):
            k = self.index.get(name)
            if k is not None:
                out[:, c] = points[:, k]
        return out

    def coordinates(self, state_names: Sequence[str], row: int, zero: IndexSet) -> dict[str, float]:
        """
        One (possibly projected) sample as a point of a prolonged system.

        Jets above the sampled orders read as zero, as in `columns`.
        """
        values = self.project(zero)[row]
        return {
            name: float(values[self.index[name]]) if name in self.index else 0.0
            for name in state_names
        }


class JetTable:
    """
    First-appearance orders c_ij and coefficients a_ij of the output channels
    on Sigma_{R-bar}, where R is the removed set.

    Channels that no surviving input can reach (through the state dependency
    graph) are never differentiated; reachable inputs are searched up to the cap.
    """

    def __init__(
        self,
        sys: SystemDefinition,
        y: OutputMap,
        space: JetSpace,
        removed: Optional[IndexSet] = None,
        cap: Optional[int] = None,
    ):
        self.sys = sys
        self.y = y
        self.space = space
        self.removed = removed or IndexSet()
        params = space.params
        self.tol_rank = params.tolerances.tol_rank
        self.surviving = [j for j in range(1, sys.p + 1) if j not in self.removed]
        self.cap = cap or (
            sys.n + len(self.surviving) * params.budget.l_max + params.budget.degree_cap_margin
        )

        subst = sys.symbol_table.parameter_substitution()
        self._jets: dict[str, tuple[int, int]] = {}
        velocity = [e.xreplace(subst) for e in sys.drift]
        for j in self.surviving:
            u0 = symbol(self.jet_name(j, 0))
            col = [e.xreplace(subst) for e in sys.columns[j - 1]]
            velocity = [v + g * u0 for v, g in zip(velocity, col)]
            for k in range(self.cap + 2):
                self._jets[self.jet_name(j, k)] = (j, k)
        self._velocity = {name: simplify(v) for name, v in zip(sys.states, velocity)}

        box = {name: interval for name, interval in zip(sys.states, sys.state_box)}
        for name, (j, k) in self._jets.items():
            box[name] = space.jet_interval(j, k)
        sampling = params.sampling
        self.tester = ZeroTester(
            box,
            trials=sampling.zero_test_trials,
            tol=params.tolerances.tol_zero,
            seed=sampling.seed,
            max_retries=sampling.zero_test_retries,
        )

        self.first: list[dict[int, int]] = []
        self.coeff: list[dict[int, sympy.Expr]] = []
        self._jet_orders: dict[tuple[int, int], dict[int, int]] = {}
        self._compiled: dict[tuple[int, int], tuple[list[str], object]] = {}
        self._tensors: dict[tuple[int, ...], np.ndarray] = {}
        outputs = [simplify(e.xreplace(subst)) for e in y.exprs]
        for i, h in enumerate(outputs):
            self._scan_channel(i, h)
        logger.debug(
            "jet_table_built",
            system=sys.name,
            removed=self.removed.indices,
            first=[dict(f) for f in self.first],
        )

    def jet_name(self, j: int, k: int) -> str:
        return f"{self.sys.inputs[j - 1]}_d{k}"

    def time_derivative(self, F: sympy.Expr) -> sympy.Expr:
        """d/dt F along the system with input jets as symbols."""
        total = sympy.Integer(0)
        for s in F.free_symbols:
            d = sympy.diff(F, s)
            if s.name in self._velocity:
                total += d * self._velocity[s.name]
            elif s.name in self._jets:
                j, k = self._jets[s.name]
                total += d * symbol(self.jet_name(j, k + 1))
        return simplify(total)

    def _reachable(self, h: sympy.Expr) -> list[int]:
        states = {s.name for s in h.free_symbols if s.name in self._velocity}
        frontier = list(states)
        while frontier:
            name = frontier.pop()
            for s in self._velocity[name].free_symbols:
                if s.name in self._velocity and s.name not in states:
                    states.add(s.name)
                    frontier.append(s.name)
        reach = []
        for j in self.surviving:
            u0 = symbol(self.jet_name(j, 0))
            if any(self._velocity[x].has(u0) for x in states) or h.has(u0):
                reach.append(j)
        return reach

    def _scan_channel(self, i: int, h: sympy.Expr) -> None:
        first: dict[int, int] = {}
        coeff: dict[int, sympy.Expr] = {}
        pending = self._reachable(h)
        current = h
        for k in range(1, self.cap + 1):
            if not pending:
                break
            current = self.time_derivative(current)
            for j in list(pending):
                d = sympy.diff(current, symbol(self.jet_name(j, 0)))
                if d != 0 and not self.tester.is_zero(d):
                    first[j] = k
                    coeff[j] = simplify(d)
                    pending.remove(j)
                    orders: dict[int, int] = {}
                    for s in coeff[j].free_symbols:
                        if s.name in self._jets:
                            m, order = self._jets[s.name]
                            orders[m] = max(orders.get(m, -1), order)
                    self._jet_orders[(i, j)] = orders
        self.first.append(first)
        self.coeff.append(coeff)

    def relative_degrees(
        self, pattern: ProlongationPattern, channels: Sequence[int]
    ) -> list[Optional[int]]:
        """r_i = min_j (c_ij + l_j) over surviving inputs, per 1-based channel."""
        r: list[Optional[int]] = []
        for i in channels:
            orders = [c + pattern.order(j) for j, c in self.first[i - 1].items()]
            r.append(min(orders) if orders else None)
        return r

    def _coefficients(self, zero: IndexSet) -> np.ndarray:
        """a_ij at every (projected) sample point, shape (N, channels, surviving)."""
        key = zero.indices
        if key not in self._tensors:
            points = self.space.project(zero)
            tensor = np.zeros((points.shape[0], len(self.first), len(self.surviving)))
            for i, coeff in enumerate(self.coeff):
                for j, a in coeff.items():
                    if (i, j) not in self._compiled:
                        names = sorted(s.name for s in a.free_symbols)
                        self._compiled[(i, j)] = (names, compile_vector([a], names))
                    names, fn = self._compiled[(i, j)]
                    values = fn(self.space.columns(names, points))  # type: ignore[operator]
                    tensor[:, i, self.surviving.index(j)] = values[:, 0]
            self._tensors[key] = tensor
        return self._tensors[key]

    def decoupling(
        self,
        pattern: ProlongationPattern,
        channels: Sequence[int],
        inputs: IndexSet = IndexSet(),
        zero: IndexSet = IndexSet(),
    ) -> Optional[np.ndarray]:
        """
        Numeric decoupling matrices at the sample points, shape (N, m, p_R).

        Rows follow `channels` then the input channels; None when a used
        coefficient depends on a jet at or above its chain length.
        """
        r = self.relative_degrees(pattern, channels)
        tensor = self._coefficients(zero)
        N = tensor.shape[0]
        rows = np.zeros((N, len(channels) + len(inputs), len(self.surviving)))
        for row, (i, r_i) in enumerate(zip(channels, r)):
            if r_i is None:
                continue
            for j, c in self.first[i - 1].items():
                if c + pattern.order(j) != r_i:
                    continue
                for m, order in self._jet_orders.get((i - 1, j), {}).items():
                    if order >= pattern.order(m):
                        return None
                col = self.surviving.index(j)
                rows[:, row, col] = tensor[:, i - 1, col]
        for offset, j in enumerate(inputs):
            rows[:, len(channels) + offset, self.surviving.index(j)] = 1.0
        return rows

    def symbolic_decoupling(
        self,
        pattern: ProlongationPattern,
        channels: Sequence[int],
        inputs: IndexSet = IndexSet(),
    ) -> list[list[sympy.Expr]]:
        """Decoupling matrix entries as expressions over the prolonged coordinates."""
        r = self.relative_degrees(pattern, channels)
        rename = {
            symbol(self.jet_name(j, 0)): symbol(self.sys.inputs[j - 1])
            for j in self.surviving
            if pattern.order(j) == 0
        }
        matrix: list[list[sympy.Expr]] = []
        for i, r_i in zip(channels, r):
            row = [sympy.Integer(0)] * len(self.surviving)
            for j, c in self.first[i - 1].items():
                if r_i is not None and c + pattern.order(j) == r_i:
                    row[self.surviving.index(j)] = self.coeff[i - 1][j].xreplace(rename)
            matrix.append(row)
        for j in inputs:
            matrix.append(
                [sympy.Integer(1 if k == j else 0) for k in self.surviving]
            )
        return matrix

    def verdict(
        self,
        pattern: ProlongationPattern,
        channels: Sequence[int],
        inputs: IndexSet = IndexSet(),
        zero: IndexSet = IndexSet(),
        r: Optional[list[Optional[int]]] = None,
    ) -> JetVerdict:
        """
        Flatness screening of y_channels plus input channels on Sigma_{R-bar}^(l).

        Input channels have relative degree l_j. The state dimension is
        n + sum of l_j over surviving inputs; accepted lists the sample rows
        (0 = operating point) where the equilibrated measure exceeds tol_rank.
        """
        r_out = r if r is not None else self.relative_degrees(pattern, channels)
        r_all = [*r_out, *(pattern.order(j) for j in inputs)]
        n_state = self.sys.n + sum(pattern.order(j) for j in self.surviving)
        if any(v is None for v in r_all):
            return JetVerdict(r=r_all, n_state=n_state, flat=False, reason="relative-degree-undefined")
        if sum(v for v in r_all if v is not None) != n_state:
            return JetVerdict(r=r_all, n_state=n_state, flat=False, reason="degree-sum-short")
        matrices = self.decoupling(pattern, channels, inputs, zero)
        if matrices is None:
            return JetVerdict(r=r_all, n_state=n_state, flat=False, reason="relative-degree-undefined")
        measures = decoupling_measure(matrices)
        accepted = np.flatnonzero(np.isfinite(measures) & (measures > self.tol_rank))
        if accepted.size == 0:
            return JetVerdict(r=r_all, n_state=n_state, flat=False, reason="singular-decoupling")
        return JetVerdict(r=r_all, n_state=n_state, flat=True, accepted=accepted.tolist())
