"""The three consultation pipelines and their forum machinery.

``pure`` asks a lone GP for a revised plan in one exchange. ``single_agent``
makes the same GP work stepwise: identify goals and the medications serving
them, detect conflicts, then write the plan. ``multi_agent`` adds a
conflict-targeted team phase: the GP proposes the smallest set of specialties
per conflict, each conflict is resolved either directly (one specialist, or
the GP when it is within their own expertise) or through a discussion forum
bounded at ``max_rounds`` with a mediator fallback, and the GP integrates the
resolutions into the final plan.

Every exchange is tagged so a recorded transcript can answer a re-run
deterministically regardless of incidental ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .cases import (
    ClinicalGoal,
    Conflict,
    ConflictKind,
    ConflictLexicon,
    ConflictSet,
    EMPTY_LEXICON,
    MedAction,
    Medication,
    PatientCase,
    Prescription,
    normalize_drug,
    normalize_text,
)
from .errors import (
    BudgetExceeded,
    EmptyAssignment,
    GatewayError,
    InvariantViolation,
    ParseError,
    ParseFailure,
    PipelineError,
    ReplayMiss,
)
from .gateway import ChatRequest, Gateway, Message
from .roles import (
    AgentRole,
    PromptTemplate,
    RoleKind,
    SpecialistStatement,
    Stage,
    detect_consensus,
    load_templates,
    normalize_proposal,
    parse_stage_reply,
    render_prompt,
    template_digests,
)


class PipelineKind(str, Enum):
    PURE = "pure"
    SINGLE_AGENT = "single_agent"
    MULTI_AGENT = "multi_agent"

    @classmethod
    def from_flag(cls, flag: str) -> "PipelineKind":
        aliases = {"pure": cls.PURE, "single": cls.SINGLE_AGENT, "multi": cls.MULTI_AGENT}
        try:
            return aliases[flag]
        except KeyError:
            raise ValueError(f"unknown pipeline {flag!r} (expected pure|single|multi)") from None


@dataclass(frozen=True)
class ForumConfig:
    max_rounds: int = 5
    sequential_visibility: bool = True

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class WorkflowConfig:
    forum: ForumConfig = ForumConfig()
    specialty_cap: int = 3
    exchange_budget: int = 60

    def __post_init__(self):
        if self.specialty_cap < 1:
            raise ValueError("specialty_cap must be >= 1")
        if self.exchange_budget < 1:
            raise ValueError("exchange_budget must be >= 1")

    def snapshot(self) -> dict:
        return {
            "max_rounds": self.forum.max_rounds,
            "sequential_visibility": self.forum.sequential_visibility,
            "specialty_cap": self.specialty_cap,
            "exchange_budget": self.exchange_budget,
        }


DEFAULT_CONFIG = WorkflowConfig()


@dataclass(frozen=True)
class MdtEntry:
    """Routing for one conflict: a specialty list, or the GP keeping it."""

    conflict_id: str
    specialties: tuple[str, ...] = ()
    gp_handled: bool = False

    def __post_init__(self):
        if bool(self.specialties) == self.gp_handled:
            raise InvariantViolation(
                "entry-specialties-xor-gp",
                f"{self.conflict_id}: specialties={self.specialties!r}, gp_handled={self.gp_handled}",
            )


@dataclass(frozen=True)
class MdtAssignment:
    entries: tuple[MdtEntry, ...]
    roster: tuple[AgentRole, ...]

    @classmethod
    def build(cls, entries: tuple[MdtEntry, ...]) -> "MdtAssignment":
        """Create the deduplicated roster: one agent per distinct specialty."""
        seen: dict[str, AgentRole] = {}
        for entry in entries:
            for specialty in entry.specialties:
                if specialty not in seen:
                    seen[specialty] = AgentRole(
                        role_kind=RoleKind.SPECIALIST,
                        agent_id=f"specialist:{specialty}",
                        specialty=specialty,
                    )
        return cls(entries=entries, roster=tuple(seen.values()))

    def entry_for(self, conflict_id: str) -> MdtEntry:
        for entry in self.entries:
            if entry.conflict_id == conflict_id:
                return entry
        raise KeyError(conflict_id)

    def agent_for(self, specialty: str) -> AgentRole:
        for agent in self.roster:
            if agent.specialty == specialty:
                return agent
        raise KeyError(specialty)


@dataclass(frozen=True)
class Resolution:
    conflict_id: str
    recommendation: tuple[str, ...]
    rationale: str
    rounds_used: int
    mediator_invoked: bool
    contributing_agents: tuple[str, ...]
    gp_resolved: bool = False

    def __post_init__(self):
        if not self.recommendation:
            raise InvariantViolation("resolution-recommendation-nonempty", self.conflict_id)
        if self.rounds_used < 0:
            raise InvariantViolation("rounds-nonnegative", self.conflict_id)
        if self.mediator_invoked and self.rounds_used < 1:
            raise InvariantViolation("mediator-implies-rounds", self.conflict_id)


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    case_id: str
    pipeline: PipelineKind
    model_id: str
    revised_plan: Prescription
    detected_goals: tuple[ClinicalGoal, ...] = ()
    detected_conflicts: ConflictSet | None = None
    assignment: MdtAssignment | None = None
    resolutions: tuple[Resolution, ...] = ()
    warnings: tuple[str, ...] = ()
    prompt_digests: Mapping[str, str] = field(default_factory=dict)
    config: Mapping[str, object] = field(default_factory=dict)
    exchange_count: int = 0

    def __post_init__(self):
        if self.pipeline is PipelineKind.PURE:
            if self.detected_conflicts is not None or self.assignment is not None or self.resolutions:
                raise InvariantViolation("pure-has-no-machinery", self.run_id)
        if self.pipeline is PipelineKind.SINGLE_AGENT and self.assignment is not None:
            raise InvariantViolation("single-has-no-mdt", self.run_id)
        if self.pipeline is PipelineKind.MULTI_AGENT:
            detected = set(self.detected_conflicts.ids()) if self.detected_conflicts else set()
            resolved = {r.conflict_id for r in self.resolutions}
            if detected != resolved:
                raise InvariantViolation(
                    "resolution-coverage",
                    f"{self.run_id}: detected {sorted(detected)} vs resolved {sorted(resolved)}",
                )


# ------------------------------------------------------------- text contexts


def case_summary(case: PatientCase) -> str:
    lines = [f"Demographics: {case.demographics}"]
    lines.append(f"Chief complaint: {case.chief_complaint}")
    lines.append("Conditions: " + "; ".join(c.name for c in case.conditions))
    lines.append(f"History: {case.history}")
    if case.labs:
        lines.append("Labs/findings: " + "; ".join(f"{n}: {v}" for n, v in case.labs))
    lines.append("Current medications:")
    for med in case.initial_plan.medications:
        detail = ", ".join(x for x in (med.dose, med.frequency) if x)
        lines.append(f"  - {med.display_name}" + (f" ({detail})" if detail else ""))
    return "\n".join(lines)


def goals_text(goals: tuple[ClinicalGoal, ...]) -> str:
    if not goals:
        return "(none identified)"
    lines = []
    for g in goals:
        suffix = f" (served by: {', '.join(g.addressed_by)})" if g.addressed_by else ""
        lines.append(f"- {g.description}{suffix}")
    return "\n".join(lines)


def conflict_text(conflict: Conflict) -> str:
    if conflict.kind is ConflictKind.DDI:
        kind = "drug-drug interaction"
    else:
        kind = "contraindication"
    desc = f": {conflict.description}" if conflict.description else ""
    return f"[{conflict.conflict_id}] {kind} between {conflict.members[0]} and {conflict.members[1]}{desc}"


def conflicts_text(conflicts: ConflictSet) -> str:
    if len(conflicts) == 0:
        return "(none detected)"
    return "\n".join(f"- {conflict_text(c)}" for c in conflicts)


def plan_text(plan: Prescription) -> str:
    lines = []
    for med in plan.medications:
        detail = ", ".join(x for x in (med.dose, med.frequency) if x)
        lines.append(f"- {med.display_name} [{med.action.value}]" + (f" ({detail})" if detail else ""))
    for item in plan.monitoring:
        lines.append(f"- monitoring: {item}")
    return "\n".join(lines) if lines else "(empty plan)"


def statements_text(statements: list[SpecialistStatement]) -> str:
    if not statements:
        return "(no statements yet; you speak first)"
    lines = []
    for s in statements:
        proposal = "; ".join(s.proposal) if s.proposal else "(none)"
        lines.append(f"Round {s.round}, {s.agent_id} [{s.stance}]: {s.position} Proposal: {proposal}")
    return "\n".join(lines)


def resolutions_text(resolutions: tuple[Resolution, ...], conflicts: ConflictSet) -> str:
    if not resolutions:
        return (
            "No specialist consultations were held. Resolve any conflicts "
            "listed in the patient record yourself within this plan."
        )
    blocks = []
    for r in resolutions:
        conflict = conflicts.get(r.conflict_id)
        source = "mediator ruling" if r.mediator_invoked else (
            "GP judgment" if r.gp_resolved else "specialist consensus"
        )
        lines = [f"Conflict {conflict_text(conflict)}", f"Resolution ({source}):"]
        lines.extend(f"  - {item}" for item in r.recommendation)
        if r.rationale:
            lines.append(f"  Rationale: {r.rationale}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


# ------------------------------------------------------------- reply readers


def plan_from_reply(doc: dict, lexicon: ConflictLexicon = EMPTY_LEXICON) -> Prescription:
    """Build a Prescription from a validated plan reply block."""
    meds = []
    for item in doc["medications"]:
        rationale = item.get("rationale")
        if item.get("replaces"):
            note = f"replaces {item['replaces']}"
            rationale = f"{note}; {rationale}" if rationale else note
        canonical, _ = normalize_drug(item["name"], lexicon)
        try:
            meds.append(
                Medication(
                    canonical=canonical,
                    display_name=item["name"].strip(),
                    action=MedAction(item["action"]),
                    dose=item.get("dose"),
                    frequency=item.get("frequency"),
                    rationale=rationale,
                    timing=item.get("timing"),
                )
            )
        except InvariantViolation as exc:
            raise ParseError(f"plan medication invalid: {exc}") from None
    try:
        return Prescription(
            medications=tuple(meds),
            monitoring=tuple(doc.get("monitoring", ())),
        )
    except InvariantViolation as exc:
        raise ParseError(f"plan invalid: {exc}") from None


def goals_from_reply(doc: dict) -> tuple[ClinicalGoal, ...]:
    return tuple(
        ClinicalGoal(
            goal_id=f"detected-{i + 1}",
            description=item["description"],
            addressed_by=tuple(item.get("medications", ())),
        )
        for i, item in enumerate(doc["goals"])
    )


def conflicts_from_reply(doc: dict, case: PatientCase, lexicon: ConflictLexicon) -> ConflictSet:
    """Normalize each reported conflict through the lexicon; duplicates merge
    by identity. Contraindication member order is (drug, condition)."""
    found = []
    for item in doc["conflicts"]:
        kind = ConflictKind(item["kind"])
        members = [normalize_drug(m, lexicon)[0] for m in item["members"]]
        if kind is ConflictKind.DDI:
            if members[0] == members[1]:
                raise ParseError(f"ddi members identical after normalization: {members!r}")
            a, b = sorted(members)
            conflict_id = f"ddi:{a}+{b}"
            members = [a, b]
        else:
            # Condition names normalize through plain text rules, not the drug map.
            drug = members[0]
            cond = normalize_text(item["members"][1])
            conflict_id = f"contra:{drug}@{cond}"
            members = [drug, cond]
        found.append(
            Conflict(
                conflict_id=conflict_id,
                kind=kind,
                members=tuple(members),
                description=item.get("description", ""),
            )
        )
    return ConflictSet(found)


# ---------------------------------------------------------------- the runner


_REPAIR_NOTE = (
    "Your previous reply's machine-readable block was missing or invalid: {error}. "
    "Reply again, ending with exactly one fenced JSON code block of the required shape."
)


class Consultation:
    """Executes one pipeline run against a gateway."""

    def __init__(
        self,
        case: PatientCase,
        gateway: Gateway,
        model_id: str,
        lexicon: ConflictLexicon = EMPTY_LEXICON,
        config: WorkflowConfig = DEFAULT_CONFIG,
        templates: Mapping[Stage, PromptTemplate] | None = None,
    ):
        self.case = case
        self.gateway = gateway
        self.model_id = model_id
        self.lexicon = lexicon
        self.config = config
        self.templates = dict(templates) if templates is not None else load_templates()
        self.exchanges = 0
        self.warnings: list[str] = []
        self._summary = case_summary(case)

    # -- one prompted exchange with the single-repair protocol

    def _exchange(
        self,
        stage: Stage,
        context: Mapping[str, str],
        request_tag: str,
        agent_id: str = "gp",
        round: int | None = None,
    ) -> dict:
        prompt = render_prompt(self.templates[stage], context)
        reply = self._send(prompt, request_tag, agent_id, round)
        try:
            return parse_stage_reply(stage, reply)
        except ParseError as first_error:
            repair_prompt = (
                prompt
                + f"\n\n[Previous reply]\n{reply}\n\n"
                + _REPAIR_NOTE.format(error=first_error)
            )
            reply = self._send(repair_prompt, f"{request_tag}/repair", agent_id, round)
            try:
                return parse_stage_reply(stage, reply)
            except ParseError as second_error:
                raise ParseFailure(str(second_error), stage=stage.value) from second_error

    def _send(self, prompt: str, request_tag: str, agent_id: str, round: int | None) -> str:
        if self.exchanges >= self.config.exchange_budget:
            raise BudgetExceeded(
                f"exchange budget {self.config.exchange_budget} exhausted", stage=request_tag
            )
        request = ChatRequest(
            model_id=self.model_id,
            messages=(Message("user", prompt),),
            request_tag=request_tag,
        )
        try:
            response = self.gateway.complete(request, agent_id=agent_id, round=round)
        except ReplayMiss:
            # Drift between the code and a recorded transcript is a typed
            # signal the caller maps to its own exit status; never mask it.
            raise
        except GatewayError as exc:
            raise PipelineError(str(exc), stage=request_tag) from exc
        self.exchanges += 1
        return response.content

    # -- pipeline stages

    def pure_plan(self) -> Prescription:
        doc = self._exchange(Stage.PURE_PLAN, {"case_summary": self._summary}, "pure/plan")
        return self._plan(doc)

    def identify_goals(self) -> tuple[ClinicalGoal, ...]:
        doc = self._exchange(Stage.GOAL_IDENTIFICATION, {"case_summary": self._summary}, "goals")
        return goals_from_reply(doc)

    def detect_conflicts(self, goals: tuple[ClinicalGoal, ...]) -> ConflictSet:
        doc = self._exchange(
            Stage.CONFLICT_DETECTION,
            {"case_summary": self._summary, "goals": goals_text(goals)},
            "conflicts",
        )
        return conflicts_from_reply(doc, self.case, self.lexicon)

    def form_mdt(self, conflicts: ConflictSet) -> MdtAssignment:
        if len(conflicts) == 0:
            raise PipelineError("form_mdt requires a non-empty conflict set", stage="mdt_formation")
        context = {"case_summary": self._summary, "conflicts": conflicts_text(conflicts)}
        doc = self._exchange(Stage.MDT_FORMATION, context, "mdt")
        entries = self._assignment_entries(doc, conflicts)
        if entries is None:
            doc = self._exchange(Stage.MDT_FORMATION, context, "mdt/retry")
            entries = self._assignment_entries(doc, conflicts)
        if entries is None:
            missing = self._uncovered_conflicts(doc, conflicts)
            raise EmptyAssignment(missing[0])
        return MdtAssignment.build(entries)

    def _assignment_entries(
        self, doc: dict, conflicts: ConflictSet
    ) -> tuple[MdtEntry, ...] | None:
        """Map the reply's assignments onto the detected conflicts; None when
        any conflict is uncovered or left without specialties."""
        by_id: dict[str, dict] = {}
        for item in doc["assignments"]:
            by_id.setdefault(item["conflict_id"].strip(), item)
        entries = []
        for conflict in conflicts:
            item = by_id.get(conflict.conflict_id)
            if item is None:
                return None
            if item.get("within_gp_expertise") is True:
                entries.append(MdtEntry(conflict_id=conflict.conflict_id, gp_handled=True))
                continue
            specialties = []
            for name in item["specialties"]:
                canon = normalize_text(name)
                if canon and canon not in specialties:
                    specialties.append(canon)
            if not specialties:
                return None
            if len(specialties) > self.config.specialty_cap:
                self.warnings.append(
                    f"{conflict.conflict_id}: specialty list truncated to cap "
                    f"{self.config.specialty_cap} (proposed {len(specialties)})"
                )
                specialties = specialties[: self.config.specialty_cap]
            entries.append(
                MdtEntry(conflict_id=conflict.conflict_id, specialties=tuple(specialties))
            )
        return tuple(entries)

    @staticmethod
    def _uncovered_conflicts(doc: dict, conflicts: ConflictSet) -> list[str]:
        covered = set()
        for item in doc["assignments"]:
            if item.get("within_gp_expertise") is True or any(
                normalize_text(s) for s in item["specialties"]
            ):
                covered.add(item["conflict_id"].strip())
        bad = [cid for cid in conflicts.ids() if cid not in covered]
        return bad or list(conflicts.ids())

    def resolve_conflict(
        self, entry: MdtEntry, conflicts: ConflictSet, assignment: MdtAssignment
    ) -> Resolution:
        conflict = conflicts.get(entry.conflict_id)
        if entry.gp_handled:
            return self._direct_resolution(
                conflict, specialty="general practice (your own specialty)",
                agent_id="gp", gp_resolved=True,
            )
        if len(entry.specialties) == 1:
            agent = assignment.agent_for(entry.specialties[0])
            return self._direct_resolution(
                conflict, specialty=agent.specialty, agent_id=agent.agent_id,
            )
        return self._forum(conflict, entry, assignment)

    def _direct_resolution(
        self, conflict: Conflict, specialty: str, agent_id: str, gp_resolved: bool = False
    ) -> Resolution:
        tag_agent = "gp" if gp_resolved else specialty
        doc = self._exchange(
            Stage.DIRECT_RESOLUTION,
            {
                "specialty": specialty,
                "case_summary": self._summary,
                "conflict": conflict_text(conflict),
            },
            f"resolve/{conflict.conflict_id}/direct/{tag_agent}",
            agent_id=agent_id,
        )
        return Resolution(
            conflict_id=conflict.conflict_id,
            recommendation=tuple(doc["recommendation"]),
            rationale=doc.get("rationale", ""),
            rounds_used=0,
            mediator_invoked=False,
            contributing_agents=(agent_id,),
            gp_resolved=gp_resolved,
        )

    def _forum(
        self, conflict: Conflict, entry: MdtEntry, assignment: MdtAssignment
    ) -> Resolution:
        agents = [assignment.agent_for(s) for s in entry.specialties]
        history: list[SpecialistStatement] = []
        last_round: list[SpecialistStatement] = []
        for round_number in range(1, self.config.forum.max_rounds + 1):
            round_statements: list[SpecialistStatement] = []
            for agent in agents:
                if self.config.forum.sequential_visibility:
                    visible = history + round_statements
                else:
                    visible = list(history)
                doc = self._exchange(
                    Stage.SPECIALIST_STATEMENT,
                    {
                        "specialty": agent.specialty,
                        "case_summary": self._summary,
                        "conflict": conflict_text(conflict),
                        "history": statements_text(visible),
                        "round_number": str(round_number),
                    },
                    f"resolve/{conflict.conflict_id}/round{round_number}/{agent.specialty}",
                    agent_id=agent.agent_id,
                    round=round_number,
                )
                try:
                    statement = SpecialistStatement(
                        agent_id=agent.agent_id,
                        round=round_number,
                        position=doc["position"],
                        proposal=normalize_proposal(doc["proposal"], self.lexicon),
                        stance=doc["stance"],
                    )
                except ValueError as exc:
                    raise ParseFailure(str(exc), stage=Stage.SPECIALIST_STATEMENT.value) from exc
                round_statements.append(statement)
            outcome = detect_consensus(round_statements)
            if outcome.reached:
                return Resolution(
                    conflict_id=conflict.conflict_id,
                    recommendation=outcome.proposal,
                    rationale=f"specialist consensus reached in round {round_number}",
                    rounds_used=round_number,
                    mediator_invoked=False,
                    contributing_agents=tuple(a.agent_id for a in agents),
                )
            history.extend(round_statements)
            last_round = round_statements
        doc = self._exchange(
            Stage.MEDIATOR_SUMMARY,
            {
                "case_summary": self._summary,
                "conflict": conflict_text(conflict),
                "final_positions": statements_text(last_round),
            },
            f"resolve/{conflict.conflict_id}/mediator",
            agent_id="mediator",
        )
        return Resolution(
            conflict_id=conflict.conflict_id,
            recommendation=tuple(doc["recommendation"]),
            rationale=doc.get("rationale", doc["summary"]),
            rounds_used=self.config.forum.max_rounds,
            mediator_invoked=True,
            contributing_agents=tuple(a.agent_id for a in agents) + ("mediator",),
        )

    def integrate(
        self, resolutions: tuple[Resolution, ...], conflicts: ConflictSet
    ) -> Prescription:
        doc = self._exchange(
            Stage.INTEGRATION,
            {
                "case_summary": self._summary,
                "original_plan": plan_text(self.case.initial_plan),
                "resolutions": resolutions_text(resolutions, conflicts),
            },
            "integrate",
        )
        plan = self._plan(doc)
        if resolutions:
            self._check_provenance(plan, resolutions)
            self._check_overlaps(resolutions)
        return plan

    def _plan(self, doc: dict) -> Prescription:
        try:
            return plan_from_reply(doc, self.lexicon)
        except ParseError as exc:
            raise ParseFailure(str(exc), stage="plan") from exc

    def _check_provenance(self, plan: Prescription, resolutions: tuple[Resolution, ...]):
        """Flag (never reject) revised medications that appear in neither the
        original plan nor any resolution's recommendation text."""
        original = self.case.initial_plan.active_canonicals() | frozenset(
            m.canonical for m in self.case.initial_plan.medications
        )
        source_text = " " + normalize_text(
            " ".join(line for r in resolutions for line in r.recommendation)
        ) + " "
        for med in plan.medications:
            if med.canonical in original:
                continue
            names = self.lexicon.aliases_of(med.canonical) | {med.canonical}
            if any(f" {name} " in source_text or name in source_text for name in names):
                continue
            self.warnings.append(
                f"provenance: {med.canonical!r} appears in no resolution and not in the original plan"
            )

    def _check_overlaps(self, resolutions: tuple[Resolution, ...]):
        vocab = self.lexicon.vocabulary() | self.case.initial_plan.active_canonicals()
        mentioned: dict[str, set[str]] = {}
        for r in resolutions:
            text = normalize_text(" ".join(r.recommendation))
            for drug in vocab:
                if drug in text:
                    mentioned.setdefault(drug, set()).add(r.conflict_id)
        for drug, sources in sorted(mentioned.items()):
            if len(sources) > 1:
                self.warnings.append(
                    f"overlap: resolutions {', '.join(sorted(sources))} all touch {drug!r}"
                )


def run_pipeline(
    case: PatientCase,
    kind: PipelineKind,
    gateway: Gateway,
    model_id: str,
    run_id: str | None = None,
    lexicon: ConflictLexicon = EMPTY_LEXICON,
    config: WorkflowConfig = DEFAULT_CONFIG,
    templates: Mapping[Stage, PromptTemplate] | None = None,
) -> RunRecord:
    """Execute one pipeline end to end and return its immutable record."""
    consultation = Consultation(
        case, gateway, model_id, lexicon=lexicon, config=config, templates=templates
    )
    if run_id is None:
        run_id = f"{case.case_id}-{kind.value}-{normalize_text(model_id).replace(' ', '-')}"

    detected_goals: tuple[ClinicalGoal, ...] = ()
    detected_conflicts: ConflictSet | None = None
    assignment: MdtAssignment | None = None
    resolutions: tuple[Resolution, ...] = ()

    if kind is PipelineKind.PURE:
        revised = consultation.pure_plan()
    else:
        detected_goals = consultation.identify_goals()
        detected_conflicts = consultation.detect_conflicts(detected_goals)
        if kind is PipelineKind.MULTI_AGENT:
            if len(detected_conflicts) > 0:
                assignment = consultation.form_mdt(detected_conflicts)
                resolutions = tuple(
                    consultation.resolve_conflict(entry, detected_conflicts, assignment)
                    for entry in assignment.entries
                )
            else:
                assignment = MdtAssignment(entries=(), roster=())
        revised = consultation.integrate(resolutions, detected_conflicts)

    return RunRecord(
        run_id=run_id,
        case_id=case.case_id,
        pipeline=kind,
        model_id=model_id,
        revised_plan=revised,
        detected_goals=detected_goals,
        detected_conflicts=detected_conflicts,
        assignment=assignment,
        resolutions=resolutions,
        warnings=tuple(consultation.warnings),
        prompt_digests=template_digests(consultation.templates),
        config={"model_id": model_id, "pipeline": kind.value, **config.snapshot()},
        exchange_count=consultation.exchanges,
    )


# ------------------------------------------------------------- serialization


def conflict_to_doc(conflict: Conflict) -> dict:
    doc = {
        "conflict_id": conflict.conflict_id,
        "kind": conflict.kind.value,
        "members": list(conflict.members),
        "description": conflict.description,
    }
    if conflict.severity is not None:
        doc["severity"] = conflict.severity
    return doc


def conflict_from_doc(doc: dict) -> Conflict:
    return Conflict(
        conflict_id=doc["conflict_id"],
        kind=ConflictKind(doc["kind"]),
        members=tuple(doc["members"]),
        description=doc.get("description", ""),
        severity=doc.get("severity"),
    )


def run_record_to_doc(record: RunRecord) -> dict:
    from .cases import SCHEMA_VERSION, prescription_to_doc

    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "run_id": record.run_id,
        "case_id": record.case_id,
        "pipeline": record.pipeline.value,
        "model_id": record.model_id,
        "detected_goals": [
            {
                "goal_id": g.goal_id,
                "description": g.description,
                "addressed_by": list(g.addressed_by),
            }
            for g in record.detected_goals
        ],
        "detected_conflicts": (
            None
            if record.detected_conflicts is None
            else [conflict_to_doc(c) for c in record.detected_conflicts]
        ),
        "assignment": (
            None
            if record.assignment is None
            else {
                "entries": [
                    {
                        "conflict_id": e.conflict_id,
                        "specialties": list(e.specialties),
                        "gp_handled": e.gp_handled,
                    }
                    for e in record.assignment.entries
                ],
                "roster": [
                    {"agent_id": a.agent_id, "specialty": a.specialty}
                    for a in record.assignment.roster
                ],
            }
        ),
        "resolutions": [
            {
                "conflict_id": r.conflict_id,
                "recommendation": list(r.recommendation),
                "rationale": r.rationale,
                "rounds_used": r.rounds_used,
                "mediator_invoked": r.mediator_invoked,
                "contributing_agents": list(r.contributing_agents),
                "gp_resolved": r.gp_resolved,
            }
            for r in record.resolutions
        ],
        "revised_plan": prescription_to_doc(record.revised_plan),
        "warnings": list(record.warnings),
        "prompt_digests": dict(record.prompt_digests),
        "config": dict(record.config),
        "exchange_count": record.exchange_count,
    }
    return doc


def run_record_from_doc(doc: dict) -> RunRecord:
    from .cases import prescription_from_doc

    assignment = None
    if doc.get("assignment") is not None:
        entries = tuple(
            MdtEntry(
                conflict_id=e["conflict_id"],
                specialties=tuple(e["specialties"]),
                gp_handled=e.get("gp_handled", False),
            )
            for e in doc["assignment"]["entries"]
        )
        roster = tuple(
            AgentRole(role_kind=RoleKind.SPECIALIST, agent_id=a["agent_id"], specialty=a["specialty"])
            for a in doc["assignment"]["roster"]
        )
        assignment = MdtAssignment(entries=entries, roster=roster)
    conflicts = None
    if doc.get("detected_conflicts") is not None:
        conflicts = ConflictSet(conflict_from_doc(c) for c in doc["detected_conflicts"])
    return RunRecord(
        run_id=doc["run_id"],
        case_id=doc["case_id"],
        pipeline=PipelineKind(doc["pipeline"]),
        model_id=doc["model_id"],
        revised_plan=prescription_from_doc(doc["revised_plan"], "revised_plan"),
        detected_goals=tuple(
            ClinicalGoal(
                goal_id=g["goal_id"],
                description=g["description"],
                addressed_by=tuple(g.get("addressed_by", ())),
            )
            for g in doc.get("detected_goals", [])
        ),
        detected_conflicts=conflicts,
        assignment=assignment,
        resolutions=tuple(
            Resolution(
                conflict_id=r["conflict_id"],
                recommendation=tuple(r["recommendation"]),
                rationale=r.get("rationale", ""),
                rounds_used=r["rounds_used"],
                mediator_invoked=r["mediator_invoked"],
                contributing_agents=tuple(r.get("contributing_agents", ())),
                gp_resolved=r.get("gp_resolved", False),
            )
            for r in doc.get("resolutions", [])
        ),
        warnings=tuple(doc.get("warnings", ())),
        prompt_digests=doc.get("prompt_digests", {}),
        config=doc.get("config", {}),
        exchange_count=doc.get("exchange_count", 0),
    )
