"""Agent roles, stage prompt templates, and reply-block parsing.

Each pipeline stage has one editable text template (shipped as a package
asset) and one reply schema. Rendered prompts always end with an
instruction to emit a single fenced JSON block matching that schema, so
downstream parsing never depends on prose structure. Parsing is tolerant:
the last fenced block wins and unknown fields are ignored.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from string import Template
from typing import Iterable, Mapping

import jsonschema

from .cases import ConflictLexicon, EMPTY_LEXICON, normalize_drug
from .errors import MixedRounds, NoBlockFound, SchemaMismatch, UnboundPlaceholder


class RoleKind(str, Enum):
    GP = "gp"
    SPECIALIST = "specialist"
    MEDIATOR = "mediator"


@dataclass(frozen=True)
class AgentRole:
    role_kind: RoleKind
    agent_id: str
    specialty: str | None = None

    def __post_init__(self):
        if self.role_kind is RoleKind.SPECIALIST and not self.specialty:
            raise ValueError("specialist roles need a specialty")
        if self.role_kind is not RoleKind.SPECIALIST and self.specialty:
            raise ValueError(f"{self.role_kind.value} roles cannot carry a specialty")


class Stage(str, Enum):
    PURE_PLAN = "pure_plan"
    GOAL_IDENTIFICATION = "goal_identification"
    CONFLICT_DETECTION = "conflict_detection"
    MDT_FORMATION = "mdt_formation"
    SPECIALIST_STATEMENT = "specialist_statement"
    MEDIATOR_SUMMARY = "mediator_summary"
    DIRECT_RESOLUTION = "direct_resolution"
    INTEGRATION = "integration"


# ------------------------------------------------------------ reply schemas

_MED_ITEM = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "action": {
            "type": "string",
            "enum": ["start", "continue", "stop", "replace", "adjust", "bridge"],
        },
        "dose": {"type": "string"},
        "frequency": {"type": "string"},
        "replaces": {"type": "string"},
        "rationale": {"type": "string"},
        "timing": {"type": "string"},
    },
    "required": ["name", "action"],
}

SCHEMAS: dict[str, dict] = {
    "plan_v1": {
        "$id": "plan_v1",
        "type": "object",
        "properties": {
            "medications": {"type": "array", "items": _MED_ITEM, "minItems": 1},
            "monitoring": {"type": "array", "items": {"type": "string"}},
            "notes": {"type": "string"},
        },
        "required": ["medications"],
    },
    "goals_v1": {
        "$id": "goals_v1",
        "type": "object",
        "properties": {
            "goals": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "description": {"type": "string"},
                        "medications": {"type": "array", "items": {"type": "string"}},
                    },
                    "required": ["description"],
                },
            }
        },
        "required": ["goals"],
    },
    "conflicts_v1": {
        "$id": "conflicts_v1",
        "type": "object",
        "properties": {
            "conflicts": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "kind": {"type": "string", "enum": ["ddi", "contraindication"]},
                        "members": {
                            "type": "array",
                            "items": {"type": "string"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                        "description": {"type": "string"},
                    },
                    "required": ["kind", "members"],
                },
            }
        },
        "required": ["conflicts"],
    },
    "mdt_v1": {
        "$id": "mdt_v1",
        "type": "object",
        "properties": {
            "assignments": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "conflict_id": {"type": "string"},
                        "specialties": {"type": "array", "items": {"type": "string"}},
                        "within_gp_expertise": {"type": "boolean"},
                    },
                    "required": ["conflict_id", "specialties"],
                },
            }
        },
        "required": ["assignments"],
    },
    "statement_v1": {
        "$id": "statement_v1",
        "type": "object",
        "properties": {
            "position": {"type": "string"},
            "proposal": {"type": "array", "items": {"type": "string"}},
            "stance": {"type": "string", "enum": ["agree", "revise"]},
        },
        "required": ["position", "proposal", "stance"],
    },
    "mediator_v1": {
        "$id": "mediator_v1",
        "type": "object",
        "properties": {
            "summary": {"type": "string"},
            "recommendation": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "rationale": {"type": "string"},
        },
        "required": ["summary", "recommendation"],
    },
    "resolution_v1": {
        "$id": "resolution_v1",
        "type": "object",
        "properties": {
            "recommendation": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "rationale": {"type": "string"},
        },
        "required": ["recommendation"],
    },
}

STAGE_SCHEMA: dict[Stage, str] = {
    Stage.PURE_PLAN: "plan_v1",
    Stage.GOAL_IDENTIFICATION: "goals_v1",
    Stage.CONFLICT_DETECTION: "conflicts_v1",
    Stage.MDT_FORMATION: "mdt_v1",
    Stage.SPECIALIST_STATEMENT: "statement_v1",
    Stage.MEDIATOR_SUMMARY: "mediator_v1",
    Stage.DIRECT_RESOLUTION: "resolution_v1",
    Stage.INTEGRATION: "plan_v1",
}

_EXAMPLE_BLOCKS: dict[str, dict] = {
    "plan_v1": {
        "medications": [
            {"name": "drug-a", "action": "continue"},
            {"name": "drug-b", "action": "replace", "replaces": "drug-c",
             "rationale": "why", "timing": "when"},
        ],
        "monitoring": ["what to check and when"],
    },
    "goals_v1": {
        "goals": [{"description": "goal text", "medications": ["drug-a"]}]
    },
    "conflicts_v1": {
        "conflicts": [
            {"kind": "ddi", "members": ["drug-a", "drug-b"], "description": "why"},
            {"kind": "contraindication", "members": ["drug-a", "condition"],
             "description": "why"},
        ]
    },
    "mdt_v1": {
        "assignments": [
            {"conflict_id": "the id given above", "specialties": ["cardiology"],
             "within_gp_expertise": False}
        ]
    },
    "statement_v1": {
        "position": "your assessment in one or two sentences",
        "proposal": ["action one", "action two"],
        "stance": "agree",
    },
    "mediator_v1": {
        "summary": "one sentence per specialist position",
        "recommendation": ["action one"],
        "rationale": "why this balances the positions",
    },
    "resolution_v1": {
        "recommendation": ["action one"],
        "rationale": "why",
    },
}


def reply_instruction(schema_id: str) -> str:
    example = json.dumps(_EXAMPLE_BLOCKS[schema_id], indent=2, ensure_ascii=False)
    return (
        "\n\nAfter your reasoning, end your reply with exactly one fenced JSON "
        "code block of this shape (values are illustrative):\n"
        f"```json\n{example}\n```"
    )


# ---------------------------------------------------------------- templates

TEMPLATE_PACKAGE = "mdtbench.templates"


@dataclass(frozen=True)
class PromptTemplate:
    stage: Stage
    body: str
    schema_id: str
    digest: str = field(default="", compare=False)

    def __post_init__(self):
        if self.schema_id not in SCHEMAS:
            raise ValueError(f"unknown schema_id {self.schema_id!r}")
        if not self.digest:
            object.__setattr__(
                self, "digest", hashlib.sha256(self.body.encode("utf-8")).hexdigest()
            )


def load_template(stage: Stage, assets_dir: str | Path | None = None) -> PromptTemplate:
    if assets_dir is not None:
        body = (Path(assets_dir) / f"{stage.value}.txt").read_text(encoding="utf-8")
    else:
        body = (resources.files(TEMPLATE_PACKAGE) / f"{stage.value}.txt").read_text(
            encoding="utf-8"
        )
    return PromptTemplate(stage=stage, body=body, schema_id=STAGE_SCHEMA[stage])


def load_templates(assets_dir: str | Path | None = None) -> dict[Stage, PromptTemplate]:
    return {stage: load_template(stage, assets_dir) for stage in Stage}


def template_digests(templates: Mapping[Stage, PromptTemplate]) -> dict[str, str]:
    return {stage.value: tpl.digest for stage, tpl in sorted(templates.items())}


def render_prompt(template: PromptTemplate, context: Mapping[str, str]) -> str:
    try:
        body = Template(template.body).substitute(context)
    except KeyError as exc:
        raise UnboundPlaceholder(exc.args[0], template.stage.value) from None
    return body + reply_instruction(template.schema_id)


# -------------------------------------------------------------- reply blocks

_FENCE = re.compile(r"```[a-zA-Z0-9_-]*[ \t]*\n(.*?)```", re.DOTALL)


def parse_block(reply: str, schema_id: str) -> dict:
    """Extract the last fenced JSON block and validate it against the stage
    schema. A bare-JSON reply (no fences) is accepted too; prose without any
    parsable block raises NoBlockFound."""
    if schema_id not in SCHEMAS:
        raise ValueError(f"unknown schema_id {schema_id!r}")
    candidates = [m.group(1) for m in _FENCE.finditer(reply)]
    doc = None
    for raw in reversed(candidates):
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, dict):
            doc = parsed
            break
    if doc is None:
        try:
            parsed = json.loads(reply.strip())
        except json.JSONDecodeError:
            raise NoBlockFound(f"no parsable JSON block in reply for {schema_id}") from None
        if not isinstance(parsed, dict):
            raise NoBlockFound(f"reply JSON is not an object for {schema_id}")
        doc = parsed

    validator = jsonschema.Draft202012Validator(SCHEMAS[schema_id])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        fields = tuple(
            "/".join(str(part) for part in err.absolute_path) or "(root)" for err in errors
        )
        raise SchemaMismatch(schema_id, fields)
    return doc


def parse_stage_reply(stage: Stage, reply: str) -> dict:
    return parse_block(reply, STAGE_SCHEMA[stage])


# ----------------------------------------------------------------- consensus


def normalize_proposal(
    items: Iterable[str], lexicon: ConflictLexicon = EMPTY_LEXICON
) -> tuple[str, ...]:
    """Drug-normalize each proposal line and sort, so proposal equality is
    insensitive to ordering, case, and recognized synonyms."""
    return tuple(sorted(normalize_drug(item, lexicon)[0] for item in items))


@dataclass(frozen=True)
class SpecialistStatement:
    agent_id: str
    round: int
    position: str
    proposal: tuple[str, ...]
    stance: str

    def __post_init__(self):
        if self.stance not in ("agree", "revise"):
            raise ValueError(f"unknown stance {self.stance!r}")
        if self.round < 1:
            raise ValueError("round numbers start at 1")
        if self.stance == "agree" and not self.proposal:
            raise ValueError("stance=agree requires a non-empty proposal")


@dataclass(frozen=True)
class ConsensusOutcome:
    reached: bool
    proposal: tuple[str, ...] | None = None


def detect_consensus(statements: list[SpecialistStatement]) -> ConsensusOutcome:
    """Consensus = every statement in the round agrees and all proposals
    normalize to the same action set. Order of statements is irrelevant."""
    if not statements:
        raise ValueError("cannot detect consensus over zero statements")
    rounds = {s.round for s in statements}
    if len(rounds) > 1:
        raise MixedRounds(f"statements span rounds {sorted(rounds)}")
    if any(s.stance != "agree" for s in statements):
        return ConsensusOutcome(reached=False)
    proposals = {tuple(sorted(s.proposal)) for s in statements}
    if len(proposals) != 1:
        return ConsensusOutcome(reached=False)
    return ConsensusOutcome(reached=True, proposal=next(iter(proposals)))
