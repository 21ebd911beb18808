"""Patient cases, prescriptions, conflicts, gold standards, and per-case lexicons.

All values are immutable after load (frozen dataclasses), so they are safe to
share across concurrent runs. Loading validates both document structure
(:class:`MalformedDocument` with a field locus) and domain invariants
(:class:`InvariantViolation` naming the rule).

Conflict counting is lexicon-driven and deterministic: a per-case curation of
known drug-drug interaction pairs and (drug, condition) contraindication pairs
is scanned against the active medications of a plan. Stopped medications are
clinically inert and excluded; bridge medications count while active.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from .errors import InvariantViolation, MalformedDocument, NotFound

SCHEMA_VERSION = 1

_WS = re.compile(r"\s+")


def normalize_text(value: str) -> str:
    """Lowercase, trim, and collapse internal whitespace."""
    return _WS.sub(" ", value.strip().lower())


# ------------------------------------------------------------------- domain


@dataclass(frozen=True)
class Condition:
    condition_id: str
    name: str
    canonical: str

    def __post_init__(self):
        if self.canonical != normalize_text(self.canonical):
            raise InvariantViolation(
                "condition-canonical-normalized",
                f"canonical {self.canonical!r} is not lowercase/trimmed",
            )


@dataclass(frozen=True)
class ClinicalGoal:
    goal_id: str
    description: str
    addressed_by: tuple[str, ...] = ()


class MedAction(str, Enum):
    START = "start"
    CONTINUE = "continue"
    STOP = "stop"
    REPLACE = "replace"
    ADJUST = "adjust"
    BRIDGE = "bridge"


@dataclass(frozen=True)
class Medication:
    canonical: str
    display_name: str
    action: MedAction
    dose: str | None = None
    frequency: str | None = None
    rationale: str | None = None
    timing: str | None = None

    def __post_init__(self):
        if not self.canonical:
            raise InvariantViolation("medication-canonical-nonempty")
        if self.action is MedAction.REPLACE and not (self.rationale or self.timing):
            raise InvariantViolation(
                "replace-needs-target",
                f"{self.canonical}: action=replace requires the replaced drug in rationale or timing",
            )


@dataclass(frozen=True)
class Prescription:
    medications: tuple[Medication, ...] = ()
    monitoring: tuple[str, ...] = ()

    def __post_init__(self):
        seen: set[str] = set()
        for med in self.medications:
            if med.canonical in seen:
                raise InvariantViolation(
                    "no-duplicate-medication", f"duplicate medication {med.canonical!r}"
                )
            seen.add(med.canonical)

    def active(self) -> tuple[Medication, ...]:
        """Medications that are clinically in effect (everything but stops)."""
        return tuple(m for m in self.medications if m.action is not MedAction.STOP)

    def active_canonicals(self) -> frozenset[str]:
        return frozenset(m.canonical for m in self.active())


@dataclass(frozen=True)
class PatientCase:
    case_id: str
    demographics: str
    conditions: tuple[Condition, ...]
    chief_complaint: str
    history: str
    labs: tuple[tuple[str, str], ...]
    initial_plan: Prescription
    goals: tuple[ClinicalGoal, ...]
    provenance: str | None = None

    def __post_init__(self):
        if not self.conditions:
            raise InvariantViolation("conditions-nonempty", self.case_id)
        if not self.goals:
            raise InvariantViolation("goals-nonempty", self.case_id)
        goal_ids = [g.goal_id for g in self.goals]
        if len(goal_ids) != len(set(goal_ids)):
            raise InvariantViolation("goal-ids-unique", self.case_id)

    def condition_canonicals(self) -> frozenset[str]:
        return frozenset(c.canonical for c in self.conditions)


class ConflictKind(str, Enum):
    DDI = "ddi"
    CONTRAINDICATION = "contraindication"


@dataclass(frozen=True)
class Conflict:
    """A drug-drug interaction or a (drug, condition) contraindication.

    Identity is (kind, normalized member set): DDI members are stored sorted,
    contraindication members keep (drug, condition) order.
    """

    conflict_id: str
    kind: ConflictKind
    members: tuple[str, ...]
    severity: str | None = None
    description: str = ""

    def __post_init__(self):
        if len(self.members) != 2:
            raise InvariantViolation("conflict-two-members", repr(self.members))
        if self.kind is ConflictKind.DDI:
            if self.members[0] == self.members[1]:
                raise InvariantViolation("ddi-members-distinct", repr(self.members))
            object.__setattr__(self, "members", tuple(sorted(self.members)))

    def identity(self) -> tuple[str, tuple[str, ...]]:
        return (self.kind.value, self.members)


class ConflictSet:
    """Deduplicated, order-preserving collection of conflicts."""

    def __init__(self, conflicts: Iterable[Conflict] = ()):
        unique: dict[tuple, Conflict] = {}
        for c in conflicts:
            unique.setdefault(c.identity(), c)
        self._conflicts: tuple[Conflict, ...] = tuple(unique.values())

    def __iter__(self) -> Iterator[Conflict]:
        return iter(self._conflicts)

    def __len__(self) -> int:
        return len(self._conflicts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConflictSet) and set(c.identity() for c in self) == set(
            c.identity() for c in other
        )

    def ids(self) -> tuple[str, ...]:
        return tuple(c.conflict_id for c in self._conflicts)

    def ddis(self) -> tuple[Conflict, ...]:
        return tuple(c for c in self._conflicts if c.kind is ConflictKind.DDI)

    def contraindications(self) -> tuple[Conflict, ...]:
        return tuple(c for c in self._conflicts if c.kind is ConflictKind.CONTRAINDICATION)

    def get(self, conflict_id: str) -> Conflict:
        for c in self._conflicts:
            if c.conflict_id == conflict_id:
                return c
        raise KeyError(conflict_id)


@dataclass(frozen=True)
class ConflictLexicon:
    """Per-case curation of known conflict pairs plus a drug synonym map."""

    case_id: str
    known_ddis: frozenset[tuple[str, str]] = frozenset()
    known_contraindications: frozenset[tuple[str, str]] = frozenset()
    synonyms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self,
            "known_ddis",
            frozenset(tuple(sorted(pair)) for pair in self.known_ddis),
        )
        for alias, canon in self.synonyms.items():
            if self.synonyms.get(canon, canon) != canon:
                raise InvariantViolation(
                    "synonyms-idempotent",
                    f"canonical {canon!r} (target of {alias!r}) maps onward to {self.synonyms[canon]!r}",
                )

    def vocabulary(self) -> frozenset[str]:
        """All canonical drug ids this lexicon knows about."""
        drugs: set[str] = set(self.synonyms.values())
        for a, b in self.known_ddis:
            drugs.update((a, b))
        for drug, _cond in self.known_contraindications:
            drugs.add(drug)
        return frozenset(drugs)

    def aliases_of(self, canonical: str) -> frozenset[str]:
        names = {alias for alias, canon in self.synonyms.items() if canon == canonical}
        names.add(canonical)
        return frozenset(names)


EMPTY_LEXICON = ConflictLexicon(case_id="")


@dataclass(frozen=True)
class GoldAction:
    action_id: str
    description: str
    acceptable_alternatives: tuple[str, ...] = ()
    goal_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class OptionSet:
    set_id: str
    preferred: bool
    actions: tuple[GoldAction, ...]
    explanation: str = ""

    def __post_init__(self):
        if not self.actions:
            raise InvariantViolation("option-set-actions-nonempty", self.set_id)


@dataclass(frozen=True)
class GoldStandard:
    case_id: str
    option_sets: tuple[OptionSet, ...]

    def __post_init__(self):
        if not self.option_sets:
            raise InvariantViolation("option-sets-nonempty", self.case_id)
        preferred = [s for s in self.option_sets if s.preferred]
        if len(preferred) != 1:
            raise InvariantViolation(
                "exactly-one-preferred",
                f"{self.case_id}: found {len(preferred)} preferred option sets",
            )
        ids = [a.action_id for s in self.option_sets for a in s.actions]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("gold-action-ids-unique", self.case_id)

    def preferred_set(self) -> OptionSet:
        return next(s for s in self.option_sets if s.preferred)

    def all_actions(self) -> tuple[GoldAction, ...]:
        return tuple(a for s in self.option_sets for a in s.actions)

    def action_total(self) -> int:
        return len(self.all_actions())


@dataclass(frozen=True)
class PlanDelta:
    added: frozenset[str]
    removed: frozenset[str]
    retained: frozenset[str]
    dose_changed: frozenset[str]
    original_count: int
    revised_count: int


# --------------------------------------------------------------- operations


def normalize_drug(name: str, lexicon: ConflictLexicon) -> tuple[str, bool]:
    """Map a free-text drug name to its canonical id.

    Total function: unknown names pass through lowercased/trimmed with
    recognized=False.
    """
    canonical = normalize_text(name)
    canonical = lexicon.synonyms.get(canonical, canonical)
    return canonical, canonical in lexicon.vocabulary()


def normalize_plan(plan: Prescription, lexicon: ConflictLexicon) -> Prescription:
    """Re-canonicalize every medication through the lexicon's synonym map."""
    meds = tuple(
        replace(m, canonical=normalize_drug(m.canonical, lexicon)[0]) for m in plan.medications
    )
    return Prescription(medications=meds, monitoring=plan.monitoring)


def count_conflicts(
    plan: Prescription,
    conditions: Iterable[Condition],
    lexicon: ConflictLexicon,
) -> tuple[int, int, ConflictSet]:
    """Count lexicon-known conflicts present in a plan's active medications.

    A DDI pair counts when both drugs are active; a contraindication counts
    when the drug is active and the condition is present. Unrecognized drugs
    only ever match by exact canonical equality.
    """
    active = plan.active_canonicals()
    present_conditions = frozenset(c.canonical for c in conditions)
    found: list[Conflict] = []
    for a, b in sorted(lexicon.known_ddis):
        if a in active and b in active:
            found.append(
                Conflict(
                    conflict_id=f"ddi:{a}+{b}",
                    kind=ConflictKind.DDI,
                    members=(a, b),
                    description=f"known interaction between {a} and {b}",
                )
            )
    for drug, cond in sorted(lexicon.known_contraindications):
        if drug in active and cond in present_conditions:
            found.append(
                Conflict(
                    conflict_id=f"contra:{drug}@{cond}",
                    kind=ConflictKind.CONTRAINDICATION,
                    members=(drug, cond),
                    description=f"{drug} is contraindicated with {cond}",
                )
            )
    conflicts = ConflictSet(found)
    return len(conflicts.ddis()), len(conflicts.contraindications()), conflicts


def diff_plans(original: Prescription, revised: Prescription) -> PlanDelta:
    """Set difference of active medications plus active-count bookkeeping."""
    orig = {m.canonical: m for m in original.active()}
    rev = {m.canonical: m for m in revised.active()}
    added = frozenset(rev) - frozenset(orig)
    removed = frozenset(orig) - frozenset(rev)
    retained = frozenset(orig) & frozenset(rev)
    dose_changed = frozenset(
        c for c in retained if (orig[c].dose, orig[c].frequency) != (rev[c].dose, rev[c].frequency)
    )
    return PlanDelta(
        added=added,
        removed=removed,
        retained=retained,
        dose_changed=dose_changed,
        original_count=len(orig),
        revised_count=len(rev),
    )


# ------------------------------------------------------------ document I/O


def _require(doc: dict, key: str, kind: type, locus: str):
    if key not in doc:
        raise MalformedDocument(f"missing field {key!r}", locus)
    value = doc[key]
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind) or (kind is not bool and isinstance(value, bool)):
        raise MalformedDocument(
            f"field {key!r} must be {kind.__name__}, got {type(value).__name__}",
            f"{locus}.{key}" if locus else key,
        )
    return value


def _check_schema_version(doc: dict, locus: str):
    version = _require(doc, "schema_version", int, locus)
    if version != SCHEMA_VERSION:
        raise MalformedDocument(f"unsupported schema_version {version}", locus)


def read_json_document(path: str | Path) -> dict:
    p = Path(path)
    if not p.exists():
        raise NotFound(str(p))
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}", f"{p}:{exc.lineno}") from exc
    if not isinstance(doc, dict):
        raise MalformedDocument("top-level value must be an object", str(p))
    return doc


def medication_from_doc(doc: dict, locus: str, lexicon: ConflictLexicon = EMPTY_LEXICON) -> Medication:
    name = _require(doc, "name", str, locus)
    action_raw = _require(doc, "action", str, locus)
    try:
        action = MedAction(action_raw)
    except ValueError:
        raise MalformedDocument(f"unknown action {action_raw!r}", f"{locus}.action") from None
    canonical, _ = normalize_drug(name, lexicon)
    return Medication(
        canonical=canonical,
        display_name=name.strip(),
        action=action,
        dose=doc.get("dose"),
        frequency=doc.get("frequency"),
        rationale=doc.get("rationale"),
        timing=doc.get("timing"),
    )


def prescription_from_doc(doc: dict, locus: str, lexicon: ConflictLexicon = EMPTY_LEXICON) -> Prescription:
    meds_raw = _require(doc, "medications", list, locus)
    meds = tuple(
        medication_from_doc(m, f"{locus}.medications[{i}]", lexicon)
        for i, m in enumerate(meds_raw)
    )
    monitoring = tuple(doc.get("monitoring", ()))
    return Prescription(medications=meds, monitoring=monitoring)


def case_from_doc(doc: dict, lexicon: ConflictLexicon = EMPTY_LEXICON) -> PatientCase:
    """Validate and build a PatientCase from a parsed case document.

    When a lexicon is supplied, medication names are canonicalized through its
    synonym map.
    """
    _check_schema_version(doc, "case")
    case_id = _require(doc, "case_id", str, "case")
    conditions = tuple(
        Condition(
            condition_id=_require(c, "condition_id", str, f"conditions[{i}]"),
            name=_require(c, "name", str, f"conditions[{i}]"),
            canonical=_require(c, "canonical", str, f"conditions[{i}]"),
        )
        for i, c in enumerate(_require(doc, "conditions", list, "case"))
    )
    goals = tuple(
        ClinicalGoal(
            goal_id=_require(g, "goal_id", str, f"goals[{i}]"),
            description=_require(g, "description", str, f"goals[{i}]"),
            addressed_by=tuple(g.get("addressed_by", ())),
        )
        for i, g in enumerate(_require(doc, "goals", list, "case"))
    )
    labs = tuple(
        (_require(l, "name", str, f"labs[{i}]"), _require(l, "value", str, f"labs[{i}]"))
        for i, l in enumerate(doc.get("labs", []))
    )
    return PatientCase(
        case_id=case_id,
        demographics=_require(doc, "demographics", str, "case"),
        conditions=conditions,
        chief_complaint=_require(doc, "chief_complaint", str, "case"),
        history=_require(doc, "history", str, "case"),
        labs=labs,
        initial_plan=prescription_from_doc(
            _require(doc, "initial_plan", dict, "case"), "initial_plan", lexicon
        ),
        goals=goals,
        provenance=doc.get("provenance"),
    )


def load_case(path: str | Path, lexicon: ConflictLexicon = EMPTY_LEXICON) -> PatientCase:
    return case_from_doc(read_json_document(path), lexicon)


def gold_from_doc(doc: dict) -> GoldStandard:
    _check_schema_version(doc, "gold")
    sets = tuple(
        OptionSet(
            set_id=_require(s, "set_id", str, f"option_sets[{i}]"),
            preferred=bool(s.get("preferred", False)),
            explanation=s.get("explanation", ""),
            actions=tuple(
                GoldAction(
                    action_id=_require(a, "action_id", str, f"option_sets[{i}].actions[{j}]"),
                    description=_require(a, "description", str, f"option_sets[{i}].actions[{j}]"),
                    acceptable_alternatives=tuple(a.get("acceptable_alternatives", ())),
                    goal_ids=tuple(a.get("goal_ids", ())),
                )
                for j, a in enumerate(_require(s, "actions", list, f"option_sets[{i}]"))
            ),
        )
        for i, s in enumerate(_require(doc, "option_sets", list, "gold"))
    )
    return GoldStandard(case_id=_require(doc, "case_id", str, "gold"), option_sets=sets)


def load_gold(path: str | Path) -> GoldStandard:
    return gold_from_doc(read_json_document(path))


def lexicon_from_doc(doc: dict) -> ConflictLexicon:
    _check_schema_version(doc, "lexicon")
    ddis_raw = doc.get("known_ddis", [])
    contras_raw = doc.get("known_contraindications", [])
    for i, pair in enumerate(list(ddis_raw) + list(contras_raw)):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, str) for x in pair)):
            raise MalformedDocument("conflict pair must be [str, str]", f"lexicon pairs[{i}]")
    return ConflictLexicon(
        case_id=_require(doc, "case_id", str, "lexicon"),
        known_ddis=frozenset((a, b) for a, b in ddis_raw),
        known_contraindications=frozenset((a, b) for a, b in contras_raw),
        synonyms={normalize_text(k): v for k, v in doc.get("synonyms", {}).items()},
    )


def load_lexicon(path: str | Path) -> ConflictLexicon:
    return lexicon_from_doc(read_json_document(path))


def medication_to_doc(med: Medication) -> dict:
    doc: dict = {"name": med.display_name, "action": med.action.value}
    for key in ("dose", "frequency", "rationale", "timing"):
        value = getattr(med, key)
        if value is not None:
            doc[key] = value
    return doc


def prescription_to_doc(plan: Prescription) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "medications": [medication_to_doc(m) for m in plan.medications],
        "monitoring": list(plan.monitoring),
    }


def case_to_doc(case: PatientCase) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "case_id": case.case_id,
        "demographics": case.demographics,
        "conditions": [
            {"condition_id": c.condition_id, "name": c.name, "canonical": c.canonical}
            for c in case.conditions
        ],
        "chief_complaint": case.chief_complaint,
        "history": case.history,
        "labs": [{"name": n, "value": v} for n, v in case.labs],
        "initial_plan": {
            "medications": [medication_to_doc(m) for m in case.initial_plan.medications],
            "monitoring": list(case.initial_plan.monitoring),
        },
        "goals": [
            {"goal_id": g.goal_id, "description": g.description, "addressed_by": list(g.addressed_by)}
            for g in case.goals
        ],
    }
    if case.provenance is not None:
        doc["provenance"] = case.provenance
    return doc


def gold_to_doc(gold: GoldStandard) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "case_id": gold.case_id,
        "option_sets": [
            {
                "set_id": s.set_id,
                "preferred": s.preferred,
                "explanation": s.explanation,
                "actions": [
                    {
                        "action_id": a.action_id,
                        "description": a.description,
                        "acceptable_alternatives": list(a.acceptable_alternatives),
                        "goal_ids": list(a.goal_ids),
                    }
                    for a in s.actions
                ],
            }
            for s in gold.option_sets
        ],
    }


def lexicon_to_doc(lexicon: ConflictLexicon) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "case_id": lexicon.case_id,
        "known_ddis": sorted([a, b] for a, b in lexicon.known_ddis),
        "known_contraindications": sorted([d, c] for d, c in lexicon.known_contraindications),
        "synonyms": dict(sorted(lexicon.synonyms.items())),
    }
