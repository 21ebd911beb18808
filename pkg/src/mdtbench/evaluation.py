"""Adjudication accounting and the benchmark metric suite.

Action classifications are adjudicator-entered (there is deliberately no
automatic semantic matching of generated text against gold actions). This
module turns them into exact-rational tallies and ratio metrics:

* correctness  = TP / (TP + FP-wrong), precision against proposed items
* completeness = TP / (TP + FN), recall against the gold action total
* DDI-R / CR / MR: revised-over-original count ratios, kept as literal pairs
  (a 0/0 ratio has no scalar value and is reported as the pair itself)
* GR: met-goal fraction of the revised plan over the original plan

An imprecise match earns half credit in the numerator but stands as one full
item in both denominators; FP-correct items carry zero weight everywhere.
All arithmetic uses ``fractions.Fraction`` so reports round-trip losslessly.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .cases import GoldStandard
from .errors import IncompleteClassification, NoPreferredSet, TotalMismatch

GOLD_LABELS = ("exact_match", "alternative_correct", "imprecise", "omission")
OTHER_LABELS = ("fp_correct", "fp_wrong")
LIKERT_DIMENSIONS = ("explainability", "reasonableness", "efficiency")

DISAGREEMENT_THRESHOLD = 2  # score range at which raters must discuss


class TargetKind(str, Enum):
    GOLD = "gold"
    OTHER = "other"


@dataclass(frozen=True)
class ActionClassification:
    """One adjudicated verdict: a gold action's match level, or an
    LLM-only ("other") action judged correct or wrong."""

    target: str
    target_kind: TargetKind
    label: str
    adjudicator: str = ""
    note: str | None = None

    def __post_init__(self):
        allowed = GOLD_LABELS if self.target_kind is TargetKind.GOLD else OTHER_LABELS
        if self.label not in allowed:
            raise ValueError(
                f"label {self.label!r} not valid for {self.target_kind.value} target {self.target!r}"
            )


@dataclass(frozen=True)
class ClassificationTally:
    exact_or_alt: int = 0
    imprecise: int = 0
    omissions: int = 0
    fp_wrong: int = 0
    fp_correct: int = 0

    def __post_init__(self):
        for name in ("exact_or_alt", "imprecise", "omissions", "fp_wrong", "fp_correct"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def tp_effective(self) -> Fraction:
        return Fraction(self.exact_or_alt) + Fraction(1, 2) * self.imprecise

    @property
    def gold_total(self) -> int:
        return self.exact_or_alt + self.imprecise + self.omissions


@dataclass(frozen=True)
class RatioPair:
    """A metric kept as a numerator/denominator pair, never a float.

    ``value`` exists only when the denominator is positive.
    """

    numerator: Fraction
    denominator: Fraction

    def __post_init__(self):
        if self.numerator < 0 or self.denominator < 0:
            raise ValueError("ratio parts must be nonnegative")

    @property
    def value(self) -> float | None:
        if self.denominator == 0:
            return None
        return float(self.numerator / self.denominator)

    def display(self) -> str:
        return f"{format_rational(self.numerator)}/{format_rational(self.denominator)}"


def format_rational(q: Fraction) -> str:
    """Render a rational the way the benchmark table does: 2, 2.5, 6.5."""
    if q.denominator == 1:
        return str(q.numerator)
    return str(float(q))


def parse_rational(text: str) -> Fraction:
    return Fraction(text)


def tally(classifications: Iterable[ActionClassification]) -> ClassificationTally:
    """Deterministic counts over one run's classifications."""
    counts = {"exact_or_alt": 0, "imprecise": 0, "omissions": 0, "fp_wrong": 0, "fp_correct": 0}
    for c in classifications:
        if c.label in ("exact_match", "alternative_correct"):
            counts["exact_or_alt"] += 1
        elif c.label == "imprecise":
            counts["imprecise"] += 1
        elif c.label == "omission":
            counts["omissions"] += 1
        elif c.label == "fp_wrong":
            counts["fp_wrong"] += 1
        else:
            counts["fp_correct"] += 1
    return ClassificationTally(**counts)


def check_complete(
    classifications: Iterable[ActionClassification], gold: GoldStandard
) -> None:
    """Raise IncompleteClassification unless every gold action (across all
    option sets) received exactly one classification."""
    classified = [c.target for c in classifications if c.target_kind is TargetKind.GOLD]
    missing = [a.action_id for a in gold.all_actions() if a.action_id not in classified]
    if missing:
        raise IncompleteClassification(missing)
    dupes = sorted({t for t in classified if classified.count(t) > 1})
    if dupes:
        raise IncompleteClassification([f"{t} (classified more than once)" for t in dupes])


def correctness(t: ClassificationTally) -> RatioPair:
    return RatioPair(
        numerator=t.tp_effective,
        denominator=Fraction(t.exact_or_alt + t.imprecise + t.fp_wrong),
    )


def completeness(t: ClassificationTally, gold_action_total: int) -> RatioPair:
    if gold_action_total != t.gold_total:
        raise TotalMismatch(
            f"gold action total {gold_action_total} != classified total {t.gold_total}"
        )
    return RatioPair(numerator=t.tp_effective, denominator=Fraction(gold_action_total))


@dataclass(frozen=True)
class ConflictCounts:
    ddi: int
    contraindication: int
    medication: int


def ratio_metrics(
    original: ConflictCounts, revised: ConflictCounts
) -> tuple[RatioPair, RatioPair, RatioPair]:
    """(DDI-R, CR, MR), each revised-count over original-count."""
    return (
        RatioPair(Fraction(revised.ddi), Fraction(original.ddi)),
        RatioPair(Fraction(revised.contraindication), Fraction(original.contraindication)),
        RatioPair(Fraction(revised.medication), Fraction(original.medication)),
    )


def met_goal_ratio(
    revised: tuple[int, int], original: tuple[int, int]
) -> Fraction | None:
    """GR = (revised met/total) / (original met/total); absent when the
    original plan met no goals."""
    rev_met, rev_total = revised
    orig_met, orig_total = original
    if rev_total < 1 or orig_total < 1:
        raise ValueError("goal totals must be >= 1")
    if rev_met > rev_total or orig_met > orig_total:
        raise ValueError("met goals cannot exceed the total")
    if orig_met == 0:
        return None
    return Fraction(rev_met, rev_total) / Fraction(orig_met, orig_total)


def preferred_included(
    classifications: Iterable[ActionClassification], gold: GoldStandard
) -> bool:
    """True iff every action of the preferred option set got full credit."""
    preferred = [s for s in gold.option_sets if s.preferred]
    if not preferred:
        raise NoPreferredSet(gold.case_id)
    labels = {
        c.target: c.label for c in classifications if c.target_kind is TargetKind.GOLD
    }
    return all(
        labels.get(a.action_id) in ("exact_match", "alternative_correct")
        for a in preferred[0].actions
    )


# ------------------------------------------------------------------- Likert


@dataclass(frozen=True)
class LikertRecord:
    rater: str
    dimension: str
    score: int

    def __post_init__(self):
        if self.dimension not in LIKERT_DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")
        if not 1 <= self.score <= 5:
            raise ValueError(f"score {self.score} outside 1..5")


@dataclass(frozen=True)
class LikertSummary:
    mean: float
    std: float
    n: int
    needs_consensus: bool
    consensus_score: float | None = None

    @property
    def effective_score(self) -> float:
        return self.consensus_score if self.consensus_score is not None else self.mean


def mean_std(scores: Sequence[int]) -> tuple[float, float]:
    """Unrounded mean and sample standard deviation (0.0 for a single score)."""
    mean = statistics.fmean(scores)
    std = statistics.stdev(scores) if len(scores) > 1 else 0.0
    return mean, std


def aggregate_likert(
    records: Sequence[LikertRecord],
    consensus_score: float | None = None,
    disagreement_threshold: int = DISAGREEMENT_THRESHOLD,
) -> LikertSummary:
    """Mean +- sample std at 2 decimals; flags rater disagreement.

    When the score range reaches the disagreement threshold the summary asks
    for a consensus discussion; an entered consensus_score then supersedes the
    mean in reports.
    """
    if not records:
        raise ValueError("at least one rating required")
    dims = {r.dimension for r in records}
    if len(dims) != 1:
        raise ValueError(f"records span several dimensions: {sorted(dims)}")
    scores = [r.score for r in records]
    mean, std = mean_std(scores)
    return LikertSummary(
        mean=round(mean, 2),
        std=round(std, 2),
        n=len(scores),
        needs_consensus=(max(scores) - min(scores)) >= disagreement_threshold,
        consensus_score=consensus_score,
    )


# -------------------------------------------------------------- radar export

RADAR_SCHEMA_VERSION = 1


def radar_export(
    summaries: dict[tuple[str, str, str], LikertSummary],
    cases: Sequence[str] | None = None,
    models: Sequence[str] | None = None,
) -> dict:
    """Radar-chart document: one series per model, axes = (case, dimension).

    ``summaries`` is keyed by (case_id, model_id, dimension). Missing cells
    become explicit nulls so the chart renders gaps rather than zeros.
    """
    case_ids = list(cases) if cases is not None else sorted({k[0] for k in summaries})
    model_ids = list(models) if models is not None else sorted({k[1] for k in summaries})
    axes = [
        {"case": case_id, "dimension": dim}
        for case_id in case_ids
        for dim in LIKERT_DIMENSIONS
    ]
    series = []
    for model_id in model_ids:
        values: list[float | None] = []
        for axis in axes:
            summary = summaries.get((axis["case"], model_id, axis["dimension"]))
            values.append(None if summary is None else round(summary.effective_score, 2))
        series.append({"model": model_id, "values": values})
    return {
        "schema_version": RADAR_SCHEMA_VERSION,
        "kind": "radar",
        "scale": {"min": 1, "max": 5},
        "axes": axes,
        "series": series,
    }
