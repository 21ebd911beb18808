"""Filesystem run repository, metric computation, and report generation.

A run directory is the unit of storage:

    <run>/run.json             config + run record + embedded inputs
    <run>/transcript.jsonl     full exchange log
    <run>/plan_original.json   the case's initial prescription
    <run>/plan_revised.json    the pipeline's output prescription
    <run>/classifications.json adjudicated action labels (optional)
    <run>/ratings.json         Likert ratings (optional)
    <run>/metrics.json         metric report (optional, complete runs only)

Directories are created via temp-and-rename, so an interrupted run never
leaves a directory with run.json but no transcript. Status is derived
solely from which files exist. Classification and rating stores are
append-only: edits supersede earlier records instead of erasing them.

All JSON is written in one canonical form (sorted keys, two-space indent,
trailing newline) so identical content is identical bytes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from .cases import (
    ConflictLexicon,
    GoldStandard,
    PatientCase,
    Prescription,
    SCHEMA_VERSION,
    case_from_doc,
    case_to_doc,
    count_conflicts,
    gold_from_doc,
    gold_to_doc,
    lexicon_from_doc,
    lexicon_to_doc,
    normalize_text,
    prescription_from_doc,
    prescription_to_doc,
)
from .errors import IncompleteClassification, StorageFailure
from .evaluation import (
    ActionClassification,
    LIKERT_DIMENSIONS,
    LikertRecord,
    LikertSummary,
    RatioPair,
    TargetKind,
    aggregate_likert,
    check_complete,
    completeness,
    correctness,
    ConflictCounts,
    format_rational,
    met_goal_ratio,
    preferred_included,
    radar_export,
    ratio_metrics,
    tally,
)
from .workflow import PipelineKind, RunRecord, run_record_from_doc, run_record_to_doc

RUN_FILE = "run.json"
TRANSCRIPT_FILE = "transcript.jsonl"
PLAN_ORIGINAL_FILE = "plan_original.json"
PLAN_REVISED_FILE = "plan_revised.json"
CLASSIFICATIONS_FILE = "classifications.json"
RATINGS_FILE = "ratings.json"
METRICS_FILE = "metrics.json"

COUNT_OVERRIDE_KEYS = (
    "ddi_original",
    "ddi_revised",
    "contraindication_original",
    "contraindication_revised",
    "medication_original",
    "medication_revised",
)


def canonical_json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_json(path: str | Path, doc) -> Path:
    """Atomic canonical-JSON write (temp file + rename)."""
    p = Path(path)
    tmp = p.with_suffix(p.suffix + ".part")
    tmp.write_text(canonical_json(doc), encoding="utf-8")
    tmp.rename(p)
    return p


def read_json(path: str | Path) -> dict:
    p = Path(path)
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise StorageFailure(f"missing file: {p}") from None
    except json.JSONDecodeError as exc:
        raise StorageFailure(f"corrupt JSON in {p}: {exc}") from exc


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# -------------------------------------------------------------- run writing


class RunWriter:
    """Stages a run directory in a sibling temp dir; finalize() renames it
    into place so readers never observe a half-written run."""

    def __init__(self, out_dir: str | Path):
        self.final_dir = Path(out_dir)
        if self.final_dir.exists():
            raise StorageFailure(f"run directory already exists: {self.final_dir}")
        self.staging_dir = self.final_dir.with_name(self.final_dir.name + ".staging")
        if self.staging_dir.exists():
            raise StorageFailure(f"stale staging directory in the way: {self.staging_dir}")
        self.staging_dir.mkdir(parents=True)

    @property
    def transcript_path(self) -> Path:
        return self.staging_dir / TRANSCRIPT_FILE

    def finalize(
        self,
        record: RunRecord,
        case: PatientCase,
        gold: GoldStandard,
        lexicon: ConflictLexicon,
    ) -> Path:
        if not self.transcript_path.exists():
            raise StorageFailure("transcript missing; refusing to finalize run directory")
        write_json(
            self.staging_dir / RUN_FILE,
            {
                "schema_version": SCHEMA_VERSION,
                "record": run_record_to_doc(record),
                "inputs": {
                    "case": case_to_doc(case),
                    "gold": gold_to_doc(gold),
                    "lexicon": lexicon_to_doc(lexicon),
                },
            },
        )
        write_json(self.staging_dir / PLAN_ORIGINAL_FILE, prescription_to_doc(case.initial_plan))
        write_json(self.staging_dir / PLAN_REVISED_FILE, prescription_to_doc(record.revised_plan))
        self.staging_dir.rename(self.final_dir)
        return self.final_dir

    def abort(self):
        if self.staging_dir.exists():
            for child in self.staging_dir.iterdir():
                child.unlink()
            self.staging_dir.rmdir()


# -------------------------------------------------------------- run reading


@dataclass(frozen=True)
class LoadedRun:
    run_dir: Path
    record: RunRecord
    case: PatientCase
    gold: GoldStandard
    lexicon: ConflictLexicon

    @property
    def revised_plan(self) -> Prescription:
        return self.record.revised_plan


def load_run(run_dir: str | Path) -> LoadedRun:
    run_dir = Path(run_dir)
    doc = read_json(run_dir / RUN_FILE)
    inputs = doc.get("inputs", {})
    lexicon = lexicon_from_doc(inputs["lexicon"])
    return LoadedRun(
        run_dir=run_dir,
        record=run_record_from_doc(doc["record"]),
        case=case_from_doc(inputs["case"], lexicon),
        gold=gold_from_doc(inputs["gold"]),
        lexicon=lexicon,
    )


STATUS_INVALID = "invalid"
STATUS_RECORDED = "recorded"
STATUS_CLASSIFIED = "classified"
STATUS_RATED = "rated"
STATUS_COMPLETE = "complete"


def run_status(run_dir: str | Path) -> str:
    """Status ladder from file presence alone: recorded (run + transcript),
    classified (+ metrics), rated (+ ratings), complete (both)."""
    run_dir = Path(run_dir)
    if not (run_dir / RUN_FILE).exists() or not (run_dir / TRANSCRIPT_FILE).exists():
        return STATUS_INVALID
    try:
        read_json(run_dir / RUN_FILE)
    except StorageFailure:
        return STATUS_INVALID
    has_metrics = (run_dir / METRICS_FILE).exists()
    has_ratings = (run_dir / RATINGS_FILE).exists()
    if has_metrics and has_ratings:
        return STATUS_COMPLETE
    if has_metrics:
        return STATUS_CLASSIFIED
    if has_ratings:
        return STATUS_RATED
    return STATUS_RECORDED


@dataclass(frozen=True)
class RunSummary:
    run_id: str
    case_id: str
    pipeline: str
    model_id: str
    status: str
    path: str


def list_runs(runs_dir: str | Path) -> list[RunSummary]:
    """Index every subdirectory; corrupt ones are listed as invalid, never
    raised."""
    runs_dir = Path(runs_dir)
    summaries = []
    if not runs_dir.exists():
        return summaries
    for child in sorted(runs_dir.iterdir()):
        if not child.is_dir() or child.name.endswith(".staging"):
            continue
        status = run_status(child)
        run_id, case_id, pipeline, model_id = child.name, "", "", ""
        if status != STATUS_INVALID:
            record = read_json(child / RUN_FILE).get("record", {})
            run_id = record.get("run_id", child.name)
            case_id = record.get("case_id", "")
            pipeline = record.get("pipeline", "")
            model_id = record.get("model_id", "")
        summaries.append(
            RunSummary(
                run_id=run_id,
                case_id=case_id,
                pipeline=pipeline,
                model_id=model_id,
                status=status,
                path=str(child),
            )
        )
    return summaries


def find_run(runs_dir: str | Path, run_id: str) -> Path:
    for summary in list_runs(runs_dir):
        if summary.run_id == run_id and summary.status != STATUS_INVALID:
            return Path(summary.path)
    raise StorageFailure(f"no run with run_id {run_id!r} under {runs_dir}")


# ------------------------------------------------- classification store


def _classification_to_doc(c: ActionClassification, submitted_at: str) -> dict:
    return {
        "target": c.target,
        "target_kind": c.target_kind.value,
        "label": c.label,
        "adjudicator": c.adjudicator,
        "note": c.note,
        "submitted_at": submitted_at,
        "superseded": False,
    }


def _classification_from_doc(doc: dict) -> ActionClassification:
    return ActionClassification(
        target=doc["target"],
        target_kind=TargetKind(doc["target_kind"]),
        label=doc["label"],
        adjudicator=doc.get("adjudicator", ""),
        note=doc.get("note"),
    )


def read_classification_store(run_dir: str | Path) -> dict:
    path = Path(run_dir) / CLASSIFICATIONS_FILE
    if not path.exists():
        return {"schema_version": SCHEMA_VERSION, "records": []}
    return read_json(path)


def active_classifications(store: dict) -> list[ActionClassification]:
    return [
        _classification_from_doc(r) for r in store.get("records", []) if not r.get("superseded")
    ]


def append_classifications(
    run_dir: str | Path,
    new: list[ActionClassification],
    now: str | None = None,
) -> dict:
    """Append records, superseding any active record for the same target.

    Resubmitting a record identical to the active one is a no-op, so an
    unchanged body never grows the store.
    """
    store = read_classification_store(run_dir)
    records = store.setdefault("records", [])
    stamp = now or _utc_now()
    for c in new:
        current = None
        for r in records:
            if r["target"] == c.target and not r.get("superseded"):
                current = r
        if current is not None:
            same = (
                current["label"] == c.label
                and current.get("adjudicator", "") == c.adjudicator
                and current.get("note") == c.note
            )
            if same:
                continue
            current["superseded"] = True
        records.append(_classification_to_doc(c, stamp))
    store["schema_version"] = SCHEMA_VERSION
    write_json(Path(run_dir) / CLASSIFICATIONS_FILE, store)
    return store


def set_count_overrides(
    run_dir: str | Path, overrides: dict, provenance: str, now: str | None = None
) -> dict:
    """Record adjudicator conflict/medication count overrides with provenance."""
    unknown = sorted(set(overrides) - set(COUNT_OVERRIDE_KEYS))
    if unknown:
        raise ValueError(f"unknown count override keys: {unknown}")
    if not provenance:
        raise ValueError("count overrides require a provenance note")
    store = read_classification_store(run_dir)
    store["counts"] = {
        "overrides": {k: int(v) for k, v in sorted(overrides.items())},
        "provenance": provenance,
        "submitted_at": now or _utc_now(),
    }
    store["schema_version"] = SCHEMA_VERSION
    write_json(Path(run_dir) / CLASSIFICATIONS_FILE, store)
    return store


def set_goal_counts(
    run_dir: str | Path,
    original: tuple[int, int],
    revised: tuple[int, int],
    now: str | None = None,
) -> dict:
    """Record adjudicator-entered met/total goal counts for both plans."""
    store = read_classification_store(run_dir)
    store["goal_counts"] = {
        "original": [int(original[0]), int(original[1])],
        "revised": [int(revised[0]), int(revised[1])],
        "submitted_at": now or _utc_now(),
    }
    store["schema_version"] = SCHEMA_VERSION
    write_json(Path(run_dir) / CLASSIFICATIONS_FILE, store)
    return store


# --------------------------------------------------------- ratings store


def read_ratings_store(run_dir: str | Path) -> dict:
    path = Path(run_dir) / RATINGS_FILE
    if not path.exists():
        return {"schema_version": SCHEMA_VERSION, "records": [], "consensus": {}}
    return read_json(path)


def append_ratings(
    run_dir: str | Path, new: list[LikertRecord], now: str | None = None
) -> dict:
    """Append ratings; a rater resubmitting a dimension supersedes their
    earlier score."""
    store = read_ratings_store(run_dir)
    records = store.setdefault("records", [])
    stamp = now or _utc_now()
    for rating in new:
        for r in records:
            if (
                r["rater"] == rating.rater
                and r["dimension"] == rating.dimension
                and not r.get("superseded")
            ):
                r["superseded"] = True
        records.append(
            {
                "rater": rating.rater,
                "dimension": rating.dimension,
                "score": rating.score,
                "submitted_at": stamp,
                "superseded": False,
            }
        )
    store["schema_version"] = SCHEMA_VERSION
    write_json(Path(run_dir) / RATINGS_FILE, store)
    return store


def set_consensus_score(
    run_dir: str | Path, dimension: str, score: float, now: str | None = None
) -> dict:
    if dimension not in LIKERT_DIMENSIONS:
        raise ValueError(f"unknown dimension {dimension!r}")
    if not 1 <= score <= 5:
        raise ValueError(f"consensus score {score} outside 1..5")
    store = read_ratings_store(run_dir)
    store.setdefault("consensus", {})[dimension] = score
    store["schema_version"] = SCHEMA_VERSION
    write_json(Path(run_dir) / RATINGS_FILE, store)
    return store


def likert_summaries(store: dict) -> dict[str, LikertSummary]:
    """Per-dimension summaries over active rating records."""
    summaries: dict[str, LikertSummary] = {}
    consensus = store.get("consensus", {})
    for dimension in LIKERT_DIMENSIONS:
        records = [
            LikertRecord(rater=r["rater"], dimension=r["dimension"], score=r["score"])
            for r in store.get("records", [])
            if r["dimension"] == dimension and not r.get("superseded")
        ]
        if records:
            summaries[dimension] = aggregate_likert(
                records, consensus_score=consensus.get(dimension)
            )
    return summaries


# ------------------------------------------------------------ metric suite


def _ratio_to_doc(pair: RatioPair) -> dict:
    return {
        "numerator": str(pair.numerator),
        "denominator": str(pair.denominator),
        "display": pair.display(),
        "value": pair.value,
    }


def ratio_from_doc(doc: dict) -> RatioPair:
    return RatioPair(Fraction(doc["numerator"]), Fraction(doc["denominator"]))


def mechanical_counts(loaded: LoadedRun) -> tuple[ConflictCounts, ConflictCounts]:
    """Lexicon-counter defaults for (original, revised) plan counts."""
    ddi_o, contra_o, _ = count_conflicts(loaded.case.initial_plan, loaded.case.conditions, loaded.lexicon)
    ddi_r, contra_r, _ = count_conflicts(loaded.revised_plan, loaded.case.conditions, loaded.lexicon)
    return (
        ConflictCounts(
            ddi=ddi_o,
            contraindication=contra_o,
            medication=len(loaded.case.initial_plan.active()),
        ),
        ConflictCounts(
            ddi=ddi_r,
            contraindication=contra_r,
            medication=len(loaded.revised_plan.active()),
        ),
    )


def _apply_overrides(
    original: ConflictCounts, revised: ConflictCounts, overrides: dict
) -> tuple[ConflictCounts, ConflictCounts]:
    def pick(key: str, fallback: int) -> int:
        return int(overrides.get(key, fallback))

    return (
        ConflictCounts(
            ddi=pick("ddi_original", original.ddi),
            contraindication=pick("contraindication_original", original.contraindication),
            medication=pick("medication_original", original.medication),
        ),
        ConflictCounts(
            ddi=pick("ddi_revised", revised.ddi),
            contraindication=pick("contraindication_revised", revised.contraindication),
            medication=pick("medication_revised", revised.medication),
        ),
    )


def compute_metrics(run_dir: str | Path, provisional: bool = False) -> dict:
    """Assemble the metric report document for one run.

    Complete mode requires every gold action classified exactly once.
    Provisional mode (used while adjudication is in progress) scores what is
    present, holding the completeness denominator at the full gold total.
    """
    run_dir = Path(run_dir)
    loaded = load_run(run_dir)
    store = read_classification_store(run_dir)
    classifications = active_classifications(store)

    if not provisional:
        check_complete(classifications, loaded.gold)
    t = tally(classifications)
    gold_total = loaded.gold.action_total()
    correctness_pair = correctness(t)
    if provisional:
        completeness_pair = RatioPair(t.tp_effective, Fraction(gold_total))
    else:
        completeness_pair = completeness(t, gold_total)

    original, revised = mechanical_counts(loaded)
    counts_section: dict = {
        "mechanical": {
            "original": {"ddi": original.ddi, "contraindication": original.contraindication,
                         "medication": original.medication},
            "revised": {"ddi": revised.ddi, "contraindication": revised.contraindication,
                        "medication": revised.medication},
        }
    }
    overrides = store.get("counts", {}).get("overrides", {})
    if overrides:
        counts_section["overrides"] = dict(sorted(overrides.items()))
        counts_section["provenance"] = store["counts"].get("provenance", "")
        original, revised = _apply_overrides(original, revised, overrides)
    counts_section["effective"] = {
        "original": {"ddi": original.ddi, "contraindication": original.contraindication,
                     "medication": original.medication},
        "revised": {"ddi": revised.ddi, "contraindication": revised.contraindication,
                    "medication": revised.medication},
    }
    ddi_pair, contra_pair, med_pair = ratio_metrics(original, revised)

    goal_counts = store.get("goal_counts")
    gr = None
    if goal_counts:
        gr = met_goal_ratio(
            revised=tuple(goal_counts["revised"]),
            original=tuple(goal_counts["original"]),
        )

    multi_set = len(loaded.gold.option_sets) > 1
    preferred = None
    if multi_set and (classifications or not provisional):
        preferred = preferred_included(classifications, loaded.gold)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "run_id": loaded.record.run_id,
        "case_id": loaded.record.case_id,
        "pipeline": loaded.record.pipeline.value,
        "model_id": loaded.record.model_id,
        "provisional": provisional,
        "tally": {
            "exact_or_alt": t.exact_or_alt,
            "imprecise": t.imprecise,
            "omissions": t.omissions,
            "fp_wrong": t.fp_wrong,
            "fp_correct": t.fp_correct,
            "tp_effective": str(t.tp_effective),
        },
        "correctness": _ratio_to_doc(correctness_pair),
        "completeness": _ratio_to_doc(completeness_pair),
        "ddi_ratio": _ratio_to_doc(ddi_pair),
        "contraindication_ratio": _ratio_to_doc(contra_pair),
        "medication_ratio": _ratio_to_doc(med_pair),
        "met_goal_ratio": None if gr is None else str(gr),
        "met_goal_display": None if gr is None else format_rational(gr),
        "goal_counts": (
            None
            if not goal_counts
            else {"original": list(goal_counts["original"]), "revised": list(goal_counts["revised"])}
        ),
        "preferred_included": preferred,
        "counts": counts_section,
    }
    return doc


def write_metrics(run_dir: str | Path) -> Path:
    """Compute and persist metrics.json (complete classifications required)."""
    doc = compute_metrics(run_dir, provisional=False)
    return write_json(Path(run_dir) / METRICS_FILE, doc)


# ------------------------------------------------------------------ reports

METRIC_ROWS = (
    ("correctness", "Correctness"),
    ("completeness", "Completeness"),
    ("ddi_ratio", "DDI-R"),
    ("contraindication_ratio", "CR"),
    ("medication_ratio", "MR"),
    ("met_goal_ratio", "GR"),
    ("preferred_included", "Preferred included"),
)

_PIPELINE_ORDER = {PipelineKind.PURE.value: 0, PipelineKind.SINGLE_AGENT.value: 1,
                   PipelineKind.MULTI_AGENT.value: 2}


def plan_signature(plan: Prescription) -> tuple:
    """Clinical-content signature used for "same as" collapse: normalized
    medication rows plus monitoring directives, never raw text."""
    meds = tuple(
        sorted(
            (m.canonical, m.action.value, normalize_text(m.dose or ""), normalize_text(m.frequency or ""))
            for m in plan.medications
        )
    )
    monitoring = tuple(sorted(normalize_text(item) for item in plan.monitoring))
    return (meds, monitoring)


def _metric_cell(metrics: dict, key: str) -> str:
    if key == "met_goal_ratio":
        return metrics.get("met_goal_display") or "-"
    if key == "preferred_included":
        value = metrics.get("preferred_included")
        return "-" if value is None else ("yes" if value else "no")
    return metrics[key]["display"]


def build_report(runs_dir: str | Path) -> dict:
    """Collect all metric-bearing runs into a (case, metric) x (pipeline,
    model) grid with "same as" collapse for identical revised plans."""
    rows: dict[str, dict[str, dict[str, str]]] = {}
    columns: list[str] = []
    cells_meta: dict[str, dict[str, str]] = {}

    runs = [
        s for s in list_runs(runs_dir)
        if s.status in (STATUS_CLASSIFIED, STATUS_COMPLETE)
    ]
    runs.sort(key=lambda s: (s.case_id, _PIPELINE_ORDER.get(s.pipeline, 9), s.model_id))

    signatures: dict[str, dict[tuple, str]] = {}
    for summary in runs:
        run_dir = Path(summary.path)
        metrics = read_json(run_dir / METRICS_FILE)
        loaded = load_run(run_dir)
        column = f"{summary.pipeline}/{summary.model_id}"
        if column not in columns:
            columns.append(column)
        case_rows = rows.setdefault(summary.case_id, {})
        case_sigs = signatures.setdefault(summary.case_id, {})
        signature = plan_signature(loaded.revised_plan)
        same_as = case_sigs.get(signature)
        if same_as is None:
            case_sigs[signature] = column
            for key, _label in METRIC_ROWS:
                case_rows.setdefault(key, {})[column] = _metric_cell(metrics, key)
        else:
            for key, _label in METRIC_ROWS:
                case_rows.setdefault(key, {})[column] = f"same as {same_as}"
        cells_meta.setdefault(summary.case_id, {})[column] = summary.run_id

    return {
        "schema_version": SCHEMA_VERSION,
        "columns": columns,
        "metric_rows": [{"key": key, "label": label} for key, label in METRIC_ROWS],
        "cases": rows,
        "run_ids": cells_meta,
    }


def render_report_table(report: dict) -> str:
    columns = report["columns"]
    lines = []
    header = ["case", "metric"] + columns
    widths = [max(len(header[0]), 5), max(len(header[1]), 18)] + [
        max(len(c), 16) for c in columns
    ]

    def fmt(cells: list[str]) -> str:
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines.append(fmt(header))
    lines.append(fmt(["-" * w for w in widths]))
    for case_id in sorted(report["cases"]):
        case_rows = report["cases"][case_id]
        for row in report["metric_rows"]:
            cells = [case_id, row["label"]]
            for column in columns:
                cells.append(case_rows.get(row["key"], {}).get(column, "-"))
            lines.append(fmt(cells))
    return "\n".join(lines) + "\n"


def render_report_csv(report: dict) -> str:
    import csv
    import io

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["case", "metric"] + list(report["columns"]))
    for case_id in sorted(report["cases"]):
        case_rows = report["cases"][case_id]
        for row in report["metric_rows"]:
            writer.writerow(
                [case_id, row["label"]]
                + [case_rows.get(row["key"], {}).get(c, "-") for c in report["columns"]]
            )
    return buffer.getvalue()


def build_radar(runs_dir: str | Path) -> dict:
    """Radar document over rated runs. For each (case, model) the multi-agent
    run's ratings are preferred; other pipelines fill in only when no
    multi-agent run is rated."""
    summaries: dict[tuple[str, str, str], LikertSummary] = {}
    chosen_pipeline: dict[tuple[str, str], int] = {}
    for summary in list_runs(runs_dir):
        if summary.status not in (STATUS_RATED, STATUS_COMPLETE):
            continue
        store = read_ratings_store(Path(summary.path))
        per_dimension = likert_summaries(store)
        if not per_dimension:
            continue
        rank = _PIPELINE_ORDER.get(summary.pipeline, -1)
        key = (summary.case_id, summary.model_id)
        if key in chosen_pipeline and chosen_pipeline[key] >= rank:
            continue
        chosen_pipeline[key] = rank
        for dimension, likert in per_dimension.items():
            summaries[(summary.case_id, summary.model_id, dimension)] = likert
    return radar_export(summaries)
