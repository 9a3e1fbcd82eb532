"""
Reference Signals

Smooth generators with exact analytic derivatives, evaluated as jets
(value, first derivative, ..., k-th derivative) at any time.
"""

import math
from collections.abc import Mapping

import numpy as np
from numpy.polynomial import Polynomial

from src.models.scenario import ReferenceSpec


class ReferenceSignal:
    """One channel's reference; jets are exact derivatives of the generator."""

    def __init__(self, spec: ReferenceSpec):
        self.spec = spec
        scale = math.pi / 180.0 if spec.degrees else 1.0
        if spec.kind == "constant":
            self._poly = Polynomial([spec.value * scale])
        elif spec.kind == "polynomial":
            self._poly = Polynomial([c * scale for c in spec.coefficients])
        else:
            self._poly = Polynomial([spec.offset * scale])
        self._amplitude = spec.amplitude * scale if spec.kind == "sinusoid" else 0.0
        self._derivatives = [self._poly]

    @classmethod
    def constant(cls, value: float) -> "ReferenceSignal":
        return cls(ReferenceSpec(kind="constant", value=value))

    @classmethod
    def zero(cls) -> "ReferenceSignal":
        return cls.constant(0.0)

    def jets(self, t: float, order: int) -> np.ndarray:
        """(y^d(t), y^d'(t), ..., y^d^(order)(t))."""
        out = np.empty(order + 1)
        while len(self._derivatives) <= order:
            self._derivatives.append(self._derivatives[-1].deriv())
        w, phase = self.spec.frequency, self.spec.phase
        for k in range(order + 1):
            value = float(self._derivatives[k](t))
            if self._amplitude:
                # d^k/dt^k sin(wt + phase) = w^k sin(wt + phase + k pi/2)
                value += self._amplitude * w**k * math.sin(w * t + phase + k * math.pi / 2.0)
            out[k] = value
        return out


def build_references(
    specs: Mapping[str, ReferenceSpec], channels: list[str]
) -> dict[str, ReferenceSignal]:
    """Signals for every channel; channels without a spec track zero."""
    return {
        name: ReferenceSignal(specs[name]) if name in specs else ReferenceSignal.zero()
        for name in channels
    }
