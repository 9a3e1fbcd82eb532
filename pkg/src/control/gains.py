"""
Gain Synthesis

Per-channel error-filter coefficients from pole placement, checked with the
Routh-Hurwitz criterion. A channel of order m gets k^0..k^(m-1) such that
lambda^m + k^(m-1) lambda^(m-1) + ... + k^0 is Hurwitz.

Example Usage:
    gains = make_gains({"px": 4, "phi": 2}, {"phi": [-4.0, -4.0]}, default_pole=-2.0)
    gains.output_gains["px"]    # [16.0, 32.0, 24.0, 8.0]
"""

from collections.abc import Mapping, Sequence
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from src.models.scenario import ChannelGains
from src.utils.errors import GainSynthesisError
from src.utils.logger import get_logger

logger = get_logger(phase="control", component="gains")


def routh_hurwitz(coefficients: Sequence[float]) -> bool:
    """
    True when lambda^m + k^(m-1) lambda^(m-1) + ... + k^0 has all roots in the
    open left half-plane. `coefficients` is (k^0, ..., k^(m-1)).
    """
    m = len(coefficients)
    if m == 0:
        return True
    # highest degree first
    poly = [1.0, *reversed([float(k) for k in coefficients])]
    if any(c <= 0.0 for c in poly):
        return False
    width = (m + 2) // 2
    first = poly[0::2] + [0.0] * (width - len(poly[0::2]))
    second = poly[1::2] + [0.0] * (width - len(poly[1::2]))
    rows = [first, second]
    for _ in range(m - 1):
        upper, lower = rows[-2], rows[-1]
        pivot = lower[0]
        if abs(pivot) < 1e-14:
            return False
        nxt = [
            (pivot * upper[k + 1] - upper[0] * lower[k + 1]) / pivot
            for k in range(width - 1)
        ] + [0.0]
        rows.append(nxt)
    return all(row[0] > 0.0 for row in rows[: m + 1])


def coefficients_from_poles(poles: Sequence[float]) -> list[float]:
    """(k^0, ..., k^(m-1)) of prod(lambda - pole)."""
    poly = np.real(np.poly(np.asarray(poles, dtype=float)))
    return [float(c) for c in reversed(poly[1:])]


class GainSet(BaseModel):
    """Error-filter coefficients keyed by channel name."""

    output_gains: dict[str, list[float]] = Field(default_factory=dict)
    input_gains: dict[str, list[float]] = Field(default_factory=dict)

    def for_channel(self, name: str) -> list[float]:
        if name in self.output_gains:
            return self.output_gains[name]
        if name in self.input_gains:
            return self.input_gains[name]
        raise KeyError(f"No gains for channel '{name}'")

    def poles(self, name: str) -> list[complex]:
        """Closed-loop error poles of one channel."""
        coeffs = self.for_channel(name)
        if not coeffs:
            return []
        return [complex(r) for r in np.roots([1.0, *reversed(coeffs)])]


def channel_coefficients(
    name: str, order: int, spec: Optional[ChannelGains], default_pole: float
) -> list[float]:
    """
    Coefficients of one channel.

    Raises:
        GainSynthesisError: Wrong pole or coefficient count, or not Hurwitz
    """
    if order == 0:
        return []
    if spec is not None and spec.coefficients is not None:
        coeffs = [float(k) for k in spec.coefficients]
        if len(coeffs) != order:
            raise GainSynthesisError(
                f"Channel '{name}' has order {order} but {len(coeffs)} coefficients were given"
            )
    else:
        poles = spec.poles if spec is not None and spec.poles is not None else [default_pole] * order
        if len(poles) != order:
            raise GainSynthesisError(
                f"Channel '{name}' has order {order} but {len(poles)} poles were given"
            )
        if any(p >= 0.0 for p in poles):
            raise GainSynthesisError(f"Channel '{name}' requests non-Hurwitz poles {list(poles)}")
        coeffs = coefficients_from_poles(poles)
    if not routh_hurwitz(coeffs):
        raise GainSynthesisError(
            f"Channel '{name}' coefficients {coeffs} do not give a Hurwitz polynomial"
        )
    return coeffs


def make_gains(
    output_orders: Mapping[str, int],
    specs: Optional[Mapping[str, ChannelGains]] = None,
    default_pole: float = -2.0,
    input_orders: Optional[Mapping[str, int]] = None,
    default_input_pole: float = -10.0,
) -> GainSet:
    """
    Gains for every output chain and every prolonged input chain.

    Args:
        output_orders: Relative degree r_i per output channel
        specs: Per-channel coefficients or poles; missing channels use defaults
        default_pole: Repeated pole of output chains
        input_orders: Chain length l_j per input; zero-length chains get no filter
        default_input_pole: Repeated pole of input chains

    Raises:
        GainSynthesisError: If a request is not Hurwitz or has the wrong size
    """
    specs = specs or {}
    gains = GainSet()
    for name, order in output_orders.items():
        gains.output_gains[name] = channel_coefficients(name, order, specs.get(name), default_pole)
    for name, order in (input_orders or {}).items():
        gains.input_gains[name] = channel_coefficients(
            name, order, specs.get(name), default_input_pole
        )
    logger.debug(
        "gains_synthesized",
        outputs=gains.output_gains,
        inputs=gains.input_gains,
    )
    return gains
