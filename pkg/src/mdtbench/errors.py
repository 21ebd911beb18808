"""Exception taxonomy shared across the package.

Every error raised by mdtbench derives from :class:`MdtbenchError` so the CLI
can catch one base and print stage-tagged diagnostics.
"""

from __future__ import annotations


class MdtbenchError(Exception):
    """Base class for all mdtbench errors."""


# ---------------------------------------------------------------- case files

class NotFound(MdtbenchError):
    """A referenced file or resource does not exist."""


class MalformedDocument(MdtbenchError):
    """A structured document failed structural validation.

    ``locus`` points at the offending field, e.g. ``initial_plan.medications[2].action``.
    """

    def __init__(self, message: str, locus: str = ""):
        self.locus = locus
        super().__init__(f"{message} (at {locus})" if locus else message)


class InvariantViolation(MdtbenchError):
    """A domain invariant was violated; ``rule`` names it."""

    def __init__(self, rule: str, message: str = ""):
        self.rule = rule
        super().__init__(f"{rule}: {message}" if message else rule)


# ------------------------------------------------------------------- gateway

class GatewayError(MdtbenchError):
    """Base class for chat-completion backend failures."""


class GatewayTimeout(GatewayError):
    pass


class RateLimited(GatewayError):
    """Surfaced once the retry cap is exhausted."""

    def __init__(self, message: str, attempts: int = 0):
        self.attempts = attempts
        super().__init__(message)


class Unauthorized(GatewayError):
    pass


class MalformedUpstreamResponse(GatewayError):
    pass


class ScriptExhausted(GatewayError):
    """A scripted backend ran out of queued replies."""


class ReplayMiss(GatewayError):
    """No recorded response matches the request; signals pipeline drift."""

    def __init__(self, request_tag: str):
        self.request_tag = request_tag
        super().__init__(f"no recorded response for request_tag={request_tag!r}")


class DuplicateKey(MdtbenchError):
    """A replay transcript contains two entries with the same request digest."""


class StorageFailure(MdtbenchError):
    pass


# --------------------------------------------------------------- agent roles

class UnboundPlaceholder(MdtbenchError):
    def __init__(self, name: str, stage: str = ""):
        self.name = name
        self.stage = stage
        super().__init__(f"placeholder {name!r} unbound" + (f" in stage {stage}" if stage else ""))


class ParseError(MdtbenchError):
    """Base for machine-readable-block parsing failures."""


class NoBlockFound(ParseError):
    pass


class SchemaMismatch(ParseError):
    def __init__(self, schema_id: str, fields: list[str]):
        self.schema_id = schema_id
        self.fields = fields
        super().__init__(f"reply block does not conform to schema {schema_id!r}: {', '.join(fields)}")


class MixedRounds(MdtbenchError):
    pass


# ------------------------------------------------------------------ workflow

class PipelineError(MdtbenchError):
    """Workflow failure carrying the pipeline stage it occurred in."""

    def __init__(self, message: str, stage: str = ""):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class ParseFailure(PipelineError):
    """A reply could not be parsed even after the single repair re-prompt."""


class EmptyAssignment(PipelineError):
    def __init__(self, conflict_id: str):
        self.conflict_id = conflict_id
        super().__init__(f"no specialties proposed for conflict {conflict_id!r}", stage="mdt_formation")


class BudgetExceeded(PipelineError):
    pass


# ---------------------------------------------------------------- evaluation

class IncompleteClassification(MdtbenchError):
    """Not every gold action received a classification; lists the missing ids."""

    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"unclassified gold actions: {', '.join(missing)}")


class TotalMismatch(MdtbenchError):
    pass


class NoPreferredSet(MdtbenchError):
    pass
