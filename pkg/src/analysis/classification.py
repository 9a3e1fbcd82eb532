"""
Input Classification

Redundant, essential and dexterity inputs of (system, flat output), dexterity
and flat-input-complement families with one realizing pair per removed set,
minimum losses, and the executed equivalence between both families.

Searches screen candidates on jet tables (integer degree sums, then numeric
decoupling matrices at the sample points) and re-derive every reported pair
with Lie derivatives on the actual prolonged system.

Example Usage:
    classifier = InputClassifier(system, system.output_map("y"), params)
    report = classifier.classify()
    [s.label() for s in report.dexterity_sets()]   # ['{1}', '{2}', '{1,2}']
"""

from typing import Optional

import numpy as np

from src.analysis.jets import JetSpace, JetTable, JetVerdict
from src.analysis.linearization import OutputAnalyzer, augmented_output, determinant_factors
from src.models.classification import (
    AdmissibleFamilies,
    Agreement,
    ClassificationConfig,
    ClassificationReport,
    EquivalenceRow,
    InputLabel,
    PairKind,
    RealizingPair,
)
from src.models.config import ToolkitParams
from src.models.system import IndexSet, OutputMap, ProlongationPattern, SystemDefinition
from src.symbolic.expression import render
from src.system.indexing import (
    enumerate_complements,
    enumerate_patterns,
    enumerate_subsets,
    merge_patterns,
    slice_by,
)
from src.system.prolongation import prolong
from src.utils.errors import NotCommonProlongationError
from src.utils.logger import get_logger
from src.utils.progress_tracker import ProgressTracker, phase

logger = get_logger(phase="classification", component="classifier")


class InputClassifier:
    """
    Classification engine for one (system, output) pair.

    Jet tables are cached per removed set and Lie-derivative analyzers per
    prolonged system, so repeated questions stay cheap.
    """

    def __init__(
        self,
        sys: SystemDefinition,
        y: OutputMap,
        params: Optional[ToolkitParams] = None,
        output_name: str = "y",
        cfg: Optional[ClassificationConfig] = None,
    ):
        self.params = params or ToolkitParams()
        if cfg is not None:
            self.params = self.params.with_overrides(
                l_max=cfg.l_max, tol_rank=cfg.tol_rank, tol_zero=cfg.tol_zero
            )
        self.cfg = cfg or ClassificationConfig.from_params(self.params, sys.p)
        self.sys = sys
        self.y = y
        self.output_name = output_name
        self.m = len(y)
        self.space = JetSpace(sys, self.params)
        self._tables: dict[tuple[int, ...], JetTable] = {}
        self._analyzers: dict[tuple[tuple[int, ...], tuple[int, ...]], OutputAnalyzer] = {}

    # -- shared machinery -------------------------------------------------

    def table(self, removed: IndexSet = IndexSet()) -> JetTable:
        key = removed.indices
        if key not in self._tables:
            self._tables[key] = JetTable(self.sys, self.y, self.space, removed=removed)
        return self._tables[key]

    def analyzer(self, pattern: ProlongationPattern, removed: IndexSet) -> OutputAnalyzer:
        key = (pattern.orders, removed.indices)
        if key not in self._analyzers:
            self._analyzers[key] = OutputAnalyzer(prolong(self.sys, pattern, removed), self.params)
        return self._analyzers[key]

    def _kept(self, omitted: IndexSet) -> list[int]:
        return list(omitted.complement(self.m))

    def _channel_names(self, omitted: IndexSet, inputs: IndexSet) -> list[str]:
        names = slice_by(self.y.names, omitted.complement(self.m))
        return names + [self.sys.inputs[j - 1] for j in inputs]

    def candidates(
        self, table: JetTable, pattern: ProlongationPattern, removed: IndexSet, augmented: bool
    ) -> list[tuple[IndexSet, list[Optional[int]]]]:
        """Omitted sets whose integer degree sum matches the prolonged dimension."""
        r_all = table.relative_degrees(pattern, range(1, self.m + 1))
        target = self.sys.n + sum(pattern.order(j) for j in table.surviving)
        if augmented:
            target -= sum(pattern.order(j) for j in removed)
        out = []
        for omitted in enumerate_complements(self.m, len(removed)):
            r = [r_all[i - 1] for i in self._kept(omitted)]
            if any(v is None for v in r):
                continue
            if sum(v for v in r if v is not None) == target:
                out.append((omitted, r))
        return out

    def _verify(
        self,
        pattern: ProlongationPattern,
        prolonged_removed: IndexSet,
        omitted: IndexSet,
        inputs: IndexSet,
        verdict: JetVerdict,
        witness: dict[str, float],
    ) -> Optional[bool]:
        if not self.cfg.verify_pairs:
            return None
        analyzer = self.analyzer(pattern, prolonged_removed)
        psys = analyzer.psys
        output = augmented_output(psys, self.y, omitted, inputs)
        profile = analyzer.profile(
            output,
            point=[witness[name] for name in psys.state_names],
            allow_wide=True,
        )
        ok = profile.flat and profile.r == verdict.r
        if not ok:
            logger.warning(
                "pair_verification_failed",
                pattern=pattern.orders,
                omitted=omitted.indices,
                inputs=inputs.indices,
                jet_r=verdict.r,
                lie_r=profile.r,
                reason=profile.reason,
            )
        return ok

    def _factors(
        self, table: JetTable, pattern: ProlongationPattern, omitted: IndexSet, inputs: IndexSet
    ) -> list[str]:
        matrix = table.symbolic_decoupling(pattern, self._kept(omitted), inputs)
        return [render(f) for f in determinant_factors(matrix)]

    def _pair(
        self,
        kind: PairKind,
        removed: IndexSet,
        omitted: IndexSet,
        pattern: ProlongationPattern,
        verdict: JetVerdict,
        table: JetTable,
        zero_verdict: Optional[JetVerdict] = None,
    ) -> RealizingPair:
        reduced = kind == "reduced"
        inputs = IndexSet() if reduced else removed
        prolonged_removed = removed if reduced else IndexSet()
        state_names = prolong(self.sys, pattern, prolonged_removed).state_names
        witness = self.space.coordinates(state_names, verdict.accepted[0], IndexSet())
        zero_witness = None
        if zero_verdict is not None and zero_verdict.flat:
            zero_witness = self.space.coordinates(state_names, zero_verdict.accepted[0], removed)
        check_point = witness if reduced else (zero_witness or witness)
        verified = self._verify(pattern, prolonged_removed, omitted, inputs, verdict, check_point)
        return RealizingPair(
            removed=removed,
            omitted=omitted,
            pattern=pattern,
            kind=kind,
            channels=self._channel_names(omitted, inputs),
            r=[v for v in verdict.r if v is not None],
            at_operating_point=verdict.at_operating_point,
            witness=witness,
            zero_witness=zero_witness,
            factors=self._factors(table, pattern, omitted, inputs),
            verified=verified,
        )

    def is_flat(self) -> JetVerdict:
        """Verdict of the full output on the unprolonged system."""
        return self.table().verdict(ProlongationPattern.zeros(self.sys.p), range(1, self.m + 1))

    # -- operations --------------------------------------------------------

    def is_redundant(self, i: int) -> bool:
        """
        True when y stays flat after removing input i, for some pattern of the
        surviving inputs within l_max.
        """
        if self.sys.p < 2:
            return False
        removed = IndexSet.of(i)
        table = self.table(removed)
        channels = list(range(1, self.m + 1))
        for pattern in enumerate_patterns(self.sys.p, self.cfg.l_max, removed):
            if table.verdict(pattern, channels).flat:
                logger.debug("input_redundant", input=self.sys.inputs[i - 1], pattern=pattern.orders)
                return True
        return False

    def check_dexterity(self, removed: IndexSet) -> Optional[RealizingPair]:
        """
        First reduced realizing pair (l, O) for A: y_{O-bar} flat on
        Sigma_{A-bar}^(l), patterns restricted to A-bar, smallest |l| first.
        """
        table = self.table(removed)
        for pattern in enumerate_patterns(self.sys.p, self.cfg.l_max, removed):
            for omitted, r in self.candidates(table, pattern, removed, augmented=False):
                verdict = table.verdict(pattern, self._kept(omitted), r=r)
                if verdict.flat:
                    return self._pair("reduced", removed, omitted, pattern, verdict, table)
        return None

    def check_flat_input_complement(self, removed: IndexSet) -> Optional[RealizingPair]:
        """
        First augmented pair (l, O) with (y_{O-bar}, u_A) flat on Sigma^(l),
        preferring zero-compatible pairs; None when no augmented pair exists.
        """
        table = self.table()
        fallback: Optional[RealizingPair] = None
        for pattern in enumerate_patterns(self.sys.p, self.cfg.l_max):
            for omitted, r in self.candidates(table, pattern, removed, augmented=True):
                kept = self._kept(omitted)
                verdict = table.verdict(pattern, kept, inputs=removed, r=r)
                if not verdict.flat:
                    continue
                on_zero = table.verdict(pattern, kept, inputs=removed, zero=removed, r=r)
                if on_zero.flat:
                    return self._pair(
                        "augmented-zero-compatible", removed, omitted, pattern, verdict, table, on_zero
                    )
                if fallback is None:
                    fallback = self._pair("augmented", removed, omitted, pattern, verdict, table)
        return fallback

    def construct_augmented_pair(
        self, removed: IndexSet, reduced: RealizingPair
    ) -> tuple[ProlongationPattern, Optional[RealizingPair]]:
        """
        Augmented pattern built from a reduced pair: the removed inputs get
        chains just long enough that they appear no earlier than the reduced
        relative degrees, l = merge(l~_{A-bar}, l_A).

        Returns the constructed pattern and the pair when it is flat.
        """
        table = self.table()
        kept = self._kept(reduced.omitted)
        removed_part = []
        for j in removed:
            padding = [
                rho - table.first[i - 1][j]
                for i, rho in zip(kept, reduced.r)
                if j in table.first[i - 1]
            ]
            removed_part.append(max([0, *padding]))
        kept_part = [reduced.pattern.order(j) for j in removed.complement(self.sys.p)]
        pattern = merge_patterns(removed, kept_part, removed_part)

        verdict = table.verdict(pattern, kept, inputs=removed)
        if not verdict.flat:
            logger.warning(
                "constructed_pair_not_flat",
                removed=removed.indices,
                pattern=pattern.orders,
                reason=verdict.reason,
            )
            return pattern, None
        on_zero = table.verdict(pattern, kept, inputs=removed, zero=removed)
        kind: PairKind = "augmented-zero-compatible" if on_zero.flat else "augmented"
        pair = self._pair(kind, removed, reduced.omitted, pattern, verdict, table, on_zero)
        return pattern, pair

    def restriction_check(
        self, removed: IndexSet, augmented: RealizingPair, reduced: RealizingPair
    ) -> Optional[bool]:
        """
        On the zero surface, the augmented decoupling matrix without the u_A
        rows and columns equals the reduced one at every sample point.

        None when the pairs are not related (different O, patterns differing
        on A-bar, or different relative degrees on the kept channels).
        """
        if augmented.omitted != reduced.omitted:
            return None
        if any(augmented.pattern.order(j) != reduced.pattern.order(j) for j in removed.complement(self.sys.p)):
            return None
        kept = self._kept(reduced.omitted)
        full, part = self.table(), self.table(removed)
        if full.relative_degrees(augmented.pattern, kept) != part.relative_degrees(reduced.pattern, kept):
            return None
        on_zero = full.decoupling(augmented.pattern, kept, inputs=removed, zero=removed)
        restricted = part.decoupling(reduced.pattern, kept)
        if on_zero is None or restricted is None:
            return False
        columns = [full.surviving.index(j) for j in part.surviving]
        block = on_zero[:, : len(kept), :][:, :, columns]
        finite = np.isfinite(block).all(axis=(1, 2)) & np.isfinite(restricted).all(axis=(1, 2))
        return bool(np.allclose(block[finite], restricted[finite], rtol=1e-8, atol=1e-10))

    def admissible_families(self, removed: IndexSet) -> AdmissibleFamilies:
        """L^A and Omega^A within budget (L^empty when A is empty)."""
        table = self.table()
        family = AdmissibleFamilies(removed=removed)
        for pattern in enumerate_patterns(self.sys.p, self.cfg.l_max):
            for omitted, r in self.candidates(table, pattern, removed, augmented=True):
                if table.verdict(pattern, self._kept(omitted), inputs=removed, r=r).flat:
                    family.patterns.append(pattern)
                    family.omitted.append(omitted)
        return family

    def classify(self, progress: Optional[ProgressTracker] = None) -> ClassificationReport:
        """
        Full taxonomy within budget.

        Raises:
            NotCommonProlongationError: If y is not flat for the system itself
        """
        base = self.is_flat()
        if not base.flat:
            raise NotCommonProlongationError(
                f"Output '{self.output_name}' is not flat for {self.sys.name}", reason=base.reason
            )
        p = self.sys.p
        subsets = [A for A in enumerate_subsets(p, min(self.cfg.a_max, p - 1), min_size=1)]
        with phase(progress, f"Classifying {self.sys.name}", total=len(subsets) + p) as bar:
            redundant: list[int] = []
            for i in range(1, p + 1):
                if self.is_redundant(i):
                    redundant.append(i)
                bar.advance(self.sys.inputs[i - 1])
            report = self._report(redundant)
            for removed in subsets:
                self._add_row(report, removed)
                bar.advance(removed.label())

        for i in range(1, p + 1):
            losses = [len(s) for s in report.dexterity_sets() if i in s]
            if losses:
                report.min_loss[i] = min(losses)
            label: InputLabel = (
                "redundant" if i in redundant else "dexterity" if losses else "essential"
            )
            report.labels[self.sys.inputs[i - 1]] = label

        if self.cfg.collect_families:
            report.families = [self.admissible_families(A) for A in [IndexSet(), *subsets]]
        logger.info(
            "classification_complete",
            system=self.sys.name,
            D=[s.indices for s in report.dexterity_sets()],
            labels=report.labels,
            disagreements=len(report.disagreements()),
        )
        return report

    def _report(self, redundant: list[int]) -> ClassificationReport:
        return ClassificationReport(
            system=self.sys.name,
            output=self.output_name,
            channels=list(self.y.names),
            inputs=list(self.sys.inputs),
            config=self.cfg,
            redundant=redundant,
            seed=self.params.sampling.seed,
        )

    def _add_row(self, report: ClassificationReport, removed: IndexSet) -> None:
        row = self._equivalence_row(removed)
        report.rows.append(row)
        if row.dexterity is not None:
            report.dexterity_family.append(row.dexterity)
        if row.in_complement_family and row.complement is not None:
            report.complement_family.append(row.complement)
        if row.agree == "budget-limited":
            report.warnings.append(f"{removed.label()}: complement pair needs l > {self.cfg.l_max}")
            logger.warning("subset_budget_limited", removed=removed.indices, l_max=self.cfg.l_max)
        elif row.agree is False:
            logger.error("equivalence_violated", removed=removed.indices)

    def _equivalence_row(self, removed: IndexSet) -> EquivalenceRow:
        reduced = self.check_dexterity(removed)
        augmented = self.check_flat_input_complement(removed)
        row = EquivalenceRow(removed=removed, dexterity=reduced, complement=augmented)
        if reduced is not None:
            pattern, constructed = self.construct_augmented_pair(removed, reduced)
            row.constructed = constructed
            if augmented is not None:
                row.restriction_ok = self.restriction_check(removed, augmented, reduced)
            budget_exceeded = max(pattern.orders, default=0) > self.cfg.l_max
        else:
            budget_exceeded = False

        agree: Agreement
        if row.in_dexterity_family == row.in_complement_family:
            agree = True
        elif row.in_dexterity_family and budget_exceeded:
            agree = "budget-limited"
        else:
            agree = False
        row.agree = agree
        logger.debug(
            "subset_classified",
            removed=removed.indices,
            in_D=row.in_dexterity_family,
            in_F0=row.in_complement_family,
            agree=agree,
        )
        return row


def is_redundant(
    sys: SystemDefinition, y: OutputMap, i: int, params: Optional[ToolkitParams] = None
) -> bool:
    return InputClassifier(sys, y, params).is_redundant(i)


def check_dexterity(
    sys: SystemDefinition,
    y: OutputMap,
    A: IndexSet,
    cfg: Optional[ClassificationConfig] = None,
    params: Optional[ToolkitParams] = None,
) -> Optional[RealizingPair]:
    return InputClassifier(sys, y, params, cfg=cfg).check_dexterity(A)


def check_flat_input_complement(
    sys: SystemDefinition,
    y: OutputMap,
    A: IndexSet,
    cfg: Optional[ClassificationConfig] = None,
    params: Optional[ToolkitParams] = None,
) -> Optional[RealizingPair]:
    return InputClassifier(sys, y, params, cfg=cfg).check_flat_input_complement(A)


def classify(
    sys: SystemDefinition,
    y: OutputMap,
    cfg: Optional[ClassificationConfig] = None,
    params: Optional[ToolkitParams] = None,
    output_name: str = "y",
    progress: Optional[ProgressTracker] = None,
) -> ClassificationReport:
    """Module-level entry point; see InputClassifier.classify."""
    return InputClassifier(sys, y, params, output_name=output_name, cfg=cfg).classify(progress)
