"""
Unified Switching Controller

One feedback-linearizing law on Sigma^(l) for every meld of the negotiability
graph. Output channels and input channels are stacked (2p rows):

    q(x) = (b(x); 0),  D(x) = (A(x); I),  v = (G D)^-1 (-G q + G w)

where G selects the rows of the active vertex (A, O): the kept output rows
and the input rows of A. Switching changes G only; the state is never reset.

Example Usage:
    controller = UnifiedController(graph, psys, gains, references, dwell=2.0)
    v = controller.control(t, x)
    event = controller.switch("DF", t, x)
"""

from collections.abc import Mapping
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.control.gains import GainSet
from src.control.references import ReferenceSignal
from src.models.graph import MeldVertex, NegotiabilityGraph, vertex_key
from src.models.profile import decoupling_measure
from src.models.system import IndexSet, ProlongedSystem
from src.models.trace import SwitchEvent
from src.symbolic.expression import compile_vector
from src.utils.errors import ScenarioError, SingularDecouplingError
from src.utils.logger import get_logger

logger = get_logger(phase="control", component="controller")


class SelectionState(BaseModel):
    """Active vertex and its rows among the 2p stacked channels (0-based)."""

    key: str
    label: str
    rows: list[int]
    orders: list[int]
    since: float = 0.0


class ControlFrame(BaseModel):
    """Stacked q, D and w at one time and state."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    q: np.ndarray
    D: np.ndarray
    w: np.ndarray


class UnifiedController:
    """
    Switching controller over the melds of one graph.

    Output jets below the relative degree come from the Lie-derivative chains
    of the full-task profile; input jets are read off the prolonged stacks.
    """

    def __init__(
        self,
        graph: NegotiabilityGraph,
        psys: ProlongedSystem,
        gains: GainSet,
        references: Mapping[str, ReferenceSignal],
        dwell: float = 0.0,
        initial: str = "A{}|O{}",
        tol_rank: float = 1e-8,
        input_references: Optional[Mapping[str, ReferenceSignal]] = None,
    ):
        full_key = vertex_key(IndexSet(), IndexSet())
        try:
            full = graph.vertex(full_key)
        except KeyError as e:
            raise ScenarioError("Graph has no full-task vertex") from e
        if psys.removed:
            raise ScenarioError("Unified controller runs on a prolonged system without removals")
        profile = full.profile
        self.graph = graph
        self.psys = psys
        self.gains = gains
        self.dwell = dwell
        self.tol_rank = tol_rank
        self.output_names = list(profile.channels)
        self.input_names = [psys.base.inputs[j - 1] for j in psys.surviving]
        self.p = psys.m
        if len(self.output_names) != self.p:
            raise ScenarioError(
                f"Unified controller needs a square output: {len(self.output_names)} channels, "
                f"{self.p} inputs"
            )
        self.profile = profile
        self.output_orders = [int(r) for r in profile.r if r is not None]
        self.input_orders = [psys.pattern.order(j) for j in psys.surviving]
        self.channel_names = self.output_names + self.input_names
        self.orders = self.output_orders + self.input_orders

        index = {name: k for k, name in enumerate(psys.state_names)}
        self._stacks = [[index[name] for name in psys.stack_names(j)] for j in psys.surviving]
        flat_chain = [e for chain in profile.chain for e in chain]
        self._chain_fn = compile_vector(flat_chain, psys.state_names)
        self._offsets = np.cumsum([0, *self.output_orders])

        missing = [n for n in self.channel_names if n not in {**gains.output_gains, **gains.input_gains}]
        if missing:
            raise ScenarioError(f"No gains for channels {missing}")
        self._coeffs = [np.asarray(gains.for_channel(n), dtype=float) for n in self.channel_names]
        self._eye = np.eye(self.p)
        self._reference_cache: Optional[tuple[float, list[np.ndarray]]] = None
        self.references = {
            name: references.get(name, ReferenceSignal.zero()) for name in self.output_names
        }
        # removed inputs are driven to zero
        inputs = input_references or {}
        self.input_references = {
            name: inputs.get(name, ReferenceSignal.zero()) for name in self.input_names
        }
        self.state = self._selection(self.resolve(initial), 0.0)

    # -- structure ---------------------------------------------------------

    def resolve(self, name: str) -> MeldVertex:
        try:
            return self.graph.find(name)
        except KeyError as e:
            raise ScenarioError(str(e)) from e

    def _selection(self, vertex: MeldVertex, since: float) -> SelectionState:
        rows = [i - 1 for i in vertex.omitted.complement(self.p)]
        rows += [self.p + self.psys.virtual_position(j) for j in vertex.removed]
        return SelectionState(
            key=vertex.key,
            label=vertex.display,
            rows=rows,
            orders=[self.orders[r] for r in rows],
            since=since,
        )

    def laws(self, state: Optional[SelectionState] = None) -> dict[str, list[float]]:
        """Error-filter coefficients of the channels a selection activates."""
        state = state or self.state
        return {
            self.channel_names[r]: list(self.gains.for_channel(self.channel_names[r]))
            for r in state.rows
        }

    # -- signals -----------------------------------------------------------

    def output_jets(self, x: np.ndarray) -> list[np.ndarray]:
        """y_i, y_i', ..., y_i^(r_i - 1) per output channel."""
        values = self._chain_fn(x)[0]
        return [values[self._offsets[i] : self._offsets[i + 1]] for i in range(self.p)]

    def input_jets(self, x: np.ndarray) -> list[np.ndarray]:
        """u_j, ..., u_j^(l_j - 1) per input (empty for l_j = 0)."""
        return [np.asarray(x[idx], dtype=float) for idx in self._stacks]

    def measured_jets(self, x: np.ndarray) -> list[np.ndarray]:
        return self.output_jets(x) + self.input_jets(x)

    def reference_jets(self, t: float) -> list[np.ndarray]:
        """Reference jets up to and including the feed-forward order; the last t is cached."""
        if self._reference_cache is not None and self._reference_cache[0] == t:
            return self._reference_cache[1]
        refs = [self.references[n] for n in self.output_names]
        refs += [self.input_references[n] for n in self.input_names]
        jets = [ref.jets(t, order) for ref, order in zip(refs, self.orders)]
        self._reference_cache = (t, jets)
        return jets

    def build_w(self, t: float, x: np.ndarray) -> np.ndarray:
        """
        w_i = y_i^d(r_i) + sum_k k_i^k (y_i^d(k) - y_i^(k)) for every stacked
        channel; zero-length input chains contribute their reference only.
        """
        w = np.empty(2 * self.p)
        measured = self.measured_jets(x)
        for k, (coeffs, ref, meas) in enumerate(zip(self._coeffs, self.reference_jets(t), measured)):
            order = self.orders[k]
            w[k] = ref[order] + float(coeffs @ (ref[:order] - meas)) if order else ref[0]
        return w

    def frame(self, t: float, x: np.ndarray) -> ControlFrame:
        A = self.profile.decoupling(x)[0]
        b = self.profile.drift_vector(x)[0]
        # per-step frame; fields are built here, not validated
        return ControlFrame.model_construct(
            q=np.concatenate([b, np.zeros(self.p)]),
            D=np.vstack([A, self._eye]),
            w=self.build_w(t, x),
        )

    def errors(self, t: float, x: np.ndarray) -> dict[str, np.ndarray]:
        """e = y - y^d jets below each channel's order (all 2p channels)."""
        out: dict[str, np.ndarray] = {}
        for name, ref, meas, order in zip(
            self.channel_names, self.reference_jets(t), self.measured_jets(x), self.orders
        ):
            out[name] = meas - ref[:order]
        return out

    # -- law ---------------------------------------------------------------

    def selected_matrix(self, x: np.ndarray, state: Optional[SelectionState] = None) -> np.ndarray:
        state = state or self.state
        A = self.profile.decoupling(x)[0]
        D = np.vstack([A, self._eye])
        return D[state.rows]

    def control(self, t: float, x: np.ndarray) -> np.ndarray:
        """
        Virtual input v for the active vertex.

        Raises:
            SingularDecouplingError: If G D is singular at x
        """
        fr = self.frame(t, x)
        rows = self.state.rows
        M = fr.D[rows]
        measure = float(decoupling_measure(M))
        if not np.isfinite(measure) or measure <= self.tol_rank:
            raise SingularDecouplingError(
                f"Selected decoupling matrix of {self.state.label} singular "
                f"(measure={measure:.3g})",
                determinant=measure,
            )
        return np.linalg.solve(M, -fr.q[rows] + fr.w[rows])

    def physical_inputs(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """u_j: stack head when prolonged, otherwise the virtual input."""
        return np.array(
            [x[idx[0]] if idx else v[k] for k, idx in enumerate(self._stacks)], dtype=float
        )

    def switch(self, target: str, t: float, x: np.ndarray) -> SwitchEvent:
        """
        Request a change of vertex at time t and state x.

        Accepted only along an edge of the starred component, after the dwell
        time, and when the target law is nonsingular at x. Rejections leave the
        active vertex unchanged.
        """
        current = self.graph.vertex(self.state.key)
        vertex = self.resolve(target)
        pre = self.laws()
        reason: Optional[str] = None
        if vertex.key == current.key:
            return SwitchEvent(
                time=t,
                source=current.display,
                target=vertex.display,
                outcome="accepted",
                reason="self",
                pre_laws=pre,
                post_laws=pre,
            )
        candidate = self._selection(vertex, t)
        if not self.graph.in_starred(vertex.key):
            reason = "not-in-starred-component"
        elif self.graph.edge(current.key, vertex.key) is None:
            reason = "not-an-edge"
        elif t - self.state.since < self.dwell - 1e-12:
            reason = "dwell"
        else:
            measure = float(decoupling_measure(self.selected_matrix(x, candidate)))
            if not np.isfinite(measure) or measure <= self.tol_rank:
                reason = "target-singular-at-switch-state"

        if reason is not None:
            logger.warning(
                "switch_rejected",
                time=t,
                source=current.display,
                target=vertex.display,
                reason=reason,
            )
            return SwitchEvent(
                time=t,
                source=current.display,
                target=vertex.display,
                outcome="rejected",
                reason=reason,
                pre_laws=pre,
                post_laws=pre,
            )

        self.state = candidate
        logger.info("switch_accepted", time=t, source=current.display, target=vertex.display)
        return SwitchEvent(
            time=t,
            source=current.display,
            target=vertex.display,
            outcome="accepted",
            pre_laws=pre,
            post_laws=self.laws(),
        )
