"""
Classification Models

Search bounds, realizing pairs and the per-input classification report.
"""

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

from src.models.config import ToolkitParams
from src.models.system import IndexSet, ProlongationPattern

PairKind = Literal["reduced", "augmented", "augmented-zero-compatible"]
InputLabel = Literal["redundant", "essential", "dexterity"]
Agreement = Literal[True, False, "budget-limited"]


class ClassificationConfig(BaseModel):
    """Search bounds of the realizing-pair searches."""

    a_max: int = Field(..., ge=1, description="Largest removed-set cardinality (at most p - 1)")
    l_max: int = Field(..., ge=0, description="Per-input prolongation bound")
    tol_rank: float = Field(default=1e-8, gt=0.0)
    tol_zero: float = Field(default=1e-9, gt=0.0)
    verify_pairs: bool = Field(
        default=True, description="Re-derive found pairs with Lie derivatives"
    )
    collect_families: bool = Field(default=False, description="List L^A and Omega^A")

    @classmethod
    def from_params(cls, params: ToolkitParams, p: int) -> "ClassificationConfig":
        return cls(
            a_max=max(1, params.a_max_for(p)),
            l_max=params.budget.l_max,
            tol_rank=params.tolerances.tol_rank,
            tol_zero=params.tolerances.tol_zero,
            verify_pairs=params.budget.verify_pairs,
            collect_families=params.budget.collect_families,
        )


class RealizingPair(BaseModel):
    """
    A pattern and an omitted-channel set realizing flatness for a removed set.

    Reduced pairs live on Sigma_{A-bar}^(l) with l zero on A; augmented pairs
    live on Sigma^(l) with the removed inputs appended as output channels.
    """

    removed: IndexSet = Field(..., description="Removed input set A")
    omitted: IndexSet = Field(..., description="Omitted output channels O, |O| = |A|")
    pattern: ProlongationPattern
    kind: PairKind
    channels: list[str] = Field(default_factory=list, description="Resulting output channels")
    r: list[int] = Field(default_factory=list)
    at_operating_point: bool = Field(
        default=True, description="Nonsingular at the natural embedding of x0"
    )
    witness: dict[str, float] = Field(
        default_factory=dict, description="Accepted point on the prolonged system"
    )
    zero_witness: Optional[dict[str, float]] = Field(
        default=None, description="Accepted point on the zero surface of A"
    )
    factors: list[str] = Field(default_factory=list, description="Determinant exclusion factors")
    verified: Optional[bool] = Field(
        default=None, description="Lie-derivative cross-check outcome (None when skipped)"
    )

    def summary(self) -> dict[str, Any]:
        return {
            "A": list(self.removed.indices),
            "O": list(self.omitted.indices),
            "pattern": list(self.pattern.orders),
            "kind": self.kind,
            "channels": self.channels,
            "r": self.r,
            "at_operating_point": self.at_operating_point,
            "exclusions": self.factors,
            "verified": self.verified,
        }


class AdmissibleFamilies(BaseModel):
    """L^A and Omega^A within budget for one removed set."""

    removed: IndexSet
    patterns: list[ProlongationPattern] = Field(default_factory=list)
    omitted: list[IndexSet] = Field(default_factory=list)


class EquivalenceRow(BaseModel):
    """Dexterity and flat-input-complement verdicts for one removed set."""

    removed: IndexSet
    dexterity: Optional[RealizingPair] = None
    complement: Optional[RealizingPair] = None
    constructed: Optional[RealizingPair] = None
    restriction_ok: Optional[bool] = None
    agree: Agreement = True

    @property
    def in_dexterity_family(self) -> bool:
        return self.dexterity is not None

    @property
    def in_complement_family(self) -> bool:
        return self.complement is not None and self.complement.kind == "augmented-zero-compatible"

    def summary(self) -> dict[str, Any]:
        return {
            "A": list(self.removed.indices),
            "in_D": self.in_dexterity_family,
            "in_F0": self.in_complement_family,
            "agree": self.agree,
            "dexterity_pair": self.dexterity.summary() if self.dexterity else None,
            "complement_pair": self.complement.summary() if self.complement else None,
            "constructed_pair": self.constructed.summary() if self.constructed else None,
            "restriction_ok": self.restriction_ok,
        }


class ClassificationReport(BaseModel):
    """Input taxonomy of (system, output) within the search budget."""

    system: str
    output: str
    channels: list[str]
    inputs: list[str]
    config: ClassificationConfig
    labels: dict[str, InputLabel] = Field(default_factory=dict)
    redundant: list[int] = Field(default_factory=list)
    dexterity_family: list[RealizingPair] = Field(default_factory=list)
    complement_family: list[RealizingPair] = Field(default_factory=list)
    min_loss: dict[int, int] = Field(default_factory=dict, description="delta^i per dexterity input")
    rows: list[EquivalenceRow] = Field(default_factory=list)
    families: list[AdmissibleFamilies] = Field(default_factory=list)
    warnings: list[str] = Field(default_factory=list)
    seed: int = 0

    def dexterity_sets(self) -> list[IndexSet]:
        return [pair.removed for pair in self.dexterity_family]

    def disagreements(self) -> list[EquivalenceRow]:
        return [row for row in self.rows if row.agree is False]

    def budget_limited(self) -> list[EquivalenceRow]:
        return [row for row in self.rows if row.agree == "budget-limited"]

    @property
    def exit_code(self) -> int:
        """0 clean, 2 when budget warnings were recorded."""
        return 2 if self.warnings or self.budget_limited() else 0

    def summary(self) -> dict[str, Any]:
        return {
            "system": self.system,
            "output": self.output,
            "labels": self.labels,
            "D": [list(s.indices) for s in self.dexterity_sets()],
            "F0": [list(p.removed.indices) for p in self.complement_family],
            "min_loss": {self.inputs[i - 1]: d for i, d in self.min_loss.items()},
            "redundant": [self.inputs[i - 1] for i in self.redundant],
            "a_max": self.config.a_max,
            "l_max": self.config.l_max,
            "seed": self.seed,
            "zero_test": "probabilistic",
            "disagreements": len(self.disagreements()),
            "warnings": self.warnings,
        }
