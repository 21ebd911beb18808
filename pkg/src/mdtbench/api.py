"""Local HTTP service for human adjudication.

Exposes runs, transcripts, cases, and gold standards read-only, and accepts
action classifications and Likert ratings. Classification submissions
recompute metrics immediately: complete submissions persist metrics.json,
partial ones return a provisional report without persisting anything.

Writes require an adjudicator name and are serialized per run; read-only
mode rejects them outright with 409.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .corpus import builtin_case_ids, load_builtin_case, load_builtin_gold
from .cases import case_to_doc, gold_to_doc
from .errors import IncompleteClassification, MdtbenchError, NotFound, StorageFailure
from .evaluation import ActionClassification, TargetKind
from .gateway import read_transcript, entry_to_doc
from .runstore import (
    CLASSIFICATIONS_FILE,
    METRICS_FILE,
    RATINGS_FILE,
    RUN_FILE,
    TRANSCRIPT_FILE,
    append_classifications,
    build_radar,
    compute_metrics,
    find_run,
    likert_summaries,
    list_runs,
    read_classification_store,
    read_json,
    read_ratings_store,
    append_ratings,
    run_status,
    set_consensus_score,
    set_count_overrides,
    set_goal_counts,
    write_json,
)
from .evaluation import LikertRecord


class ClassificationItem(BaseModel):
    target: str
    target_kind: str
    label: str
    note: str | None = None


class ClassificationSubmission(BaseModel):
    adjudicator: str = ""
    classifications: list[ClassificationItem] = Field(default_factory=list)
    count_overrides: dict[str, int] | None = None
    override_provenance: str | None = None
    goal_counts: dict[str, tuple[int, int]] | None = None


class RatingItem(BaseModel):
    dimension: str
    score: int


class RatingSubmission(BaseModel):
    rater: str = ""
    ratings: list[RatingItem] = Field(default_factory=list)
    consensus: dict[str, float] | None = None


def create_app(
    runs_dir: str | Path, read_only: bool = False, static_dir: str | Path | None = None
) -> FastAPI:
    runs_dir = Path(runs_dir)
    app = FastAPI(title="mdtbench adjudication api", version="1")
    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=Path(static_dir), html=True), name="ui")
    write_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(run_id: str) -> threading.Lock:
        with locks_guard:
            return write_locks.setdefault(run_id, threading.Lock())

    def resolve_run(run_id: str) -> Path:
        try:
            return find_run(runs_dir, run_id)
        except StorageFailure:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}") from None

    def guard_write(name: str, kind: str):
        if read_only:
            raise HTTPException(status_code=409, detail="service is in read-only mode")
        if not name.strip():
            raise HTTPException(status_code=422, detail=f"{kind} name is required for writes")

    @app.get("/runs")
    def get_runs():
        return {
            "runs": [
                {
                    "run_id": s.run_id,
                    "case_id": s.case_id,
                    "pipeline": s.pipeline,
                    "model_id": s.model_id,
                    "status": s.status,
                }
                for s in list_runs(runs_dir)
            ]
        }

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        run_dir = resolve_run(run_id)
        try:
            bundle = {
                "status": run_status(run_dir),
                "run": read_json(run_dir / RUN_FILE),
                "classifications": None,
                "ratings": None,
                "metrics": None,
            }
            if (run_dir / CLASSIFICATIONS_FILE).exists():
                bundle["classifications"] = read_json(run_dir / CLASSIFICATIONS_FILE)
            if (run_dir / RATINGS_FILE).exists():
                store = read_json(run_dir / RATINGS_FILE)
                bundle["ratings"] = store
                bundle["rating_summaries"] = {
                    dim: _summary_doc(s) for dim, s in likert_summaries(store).items()
                }
            if (run_dir / METRICS_FILE).exists():
                bundle["metrics"] = read_json(run_dir / METRICS_FILE)
            return bundle
        except StorageFailure as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc

    @app.get("/runs/{run_id}/transcript")
    def get_transcript(run_id: str):
        run_dir = resolve_run(run_id)
        try:
            header, entries = read_transcript(run_dir / TRANSCRIPT_FILE)
        except StorageFailure as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return {"header": header, "entries": [entry_to_doc(e) for e in entries]}

    @app.get("/cases/{case_id}")
    def get_case(case_id: str):
        if case_id not in builtin_case_ids():
            raise HTTPException(status_code=404, detail=f"unknown case {case_id!r}")
        return case_to_doc(load_builtin_case(case_id))

    @app.get("/cases/{case_id}/gold")
    def get_gold(case_id: str):
        if case_id not in builtin_case_ids():
            raise HTTPException(status_code=404, detail=f"unknown case {case_id!r}")
        return gold_to_doc(load_builtin_gold(case_id))

    @app.post("/runs/{run_id}/classifications")
    def post_classifications(run_id: str, submission: ClassificationSubmission):
        guard_write(submission.adjudicator, "adjudicator")
        run_dir = resolve_run(run_id)
        try:
            records = [
                ActionClassification(
                    target=item.target,
                    target_kind=TargetKind(item.target_kind),
                    label=item.label,
                    adjudicator=submission.adjudicator,
                    note=item.note,
                )
                for item in submission.classifications
            ]
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

        with lock_for(run_id):
            try:
                if records:
                    append_classifications(run_dir, records)
                if submission.count_overrides is not None:
                    set_count_overrides(
                        run_dir,
                        submission.count_overrides,
                        submission.override_provenance or "",
                    )
                if submission.goal_counts is not None:
                    missing = {"original", "revised"} - set(submission.goal_counts)
                    if missing:
                        raise ValueError(f"goal_counts missing {sorted(missing)}")
                    set_goal_counts(
                        run_dir,
                        tuple(submission.goal_counts["original"]),
                        tuple(submission.goal_counts["revised"]),
                    )
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None

            try:
                metrics = compute_metrics(run_dir, provisional=False)
                write_json(run_dir / METRICS_FILE, metrics)
                provisional = False
            except IncompleteClassification:
                metrics = compute_metrics(run_dir, provisional=True)
                provisional = True
            except MdtbenchError as exc:
                raise HTTPException(status_code=500, detail=str(exc)) from exc
        return {"provisional": provisional, "metrics": metrics}

    @app.post("/runs/{run_id}/ratings")
    def post_ratings(run_id: str, submission: RatingSubmission):
        guard_write(submission.rater, "rater")
        run_dir = resolve_run(run_id)
        try:
            records = [
                LikertRecord(rater=submission.rater, dimension=item.dimension, score=item.score)
                for item in submission.ratings
            ]
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None

        with lock_for(run_id):
            try:
                if records:
                    append_ratings(run_dir, records)
                for dimension, score in (submission.consensus or {}).items():
                    set_consensus_score(run_dir, dimension, score)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            store = read_ratings_store(run_dir)
        return {
            "summaries": {dim: _summary_doc(s) for dim, s in likert_summaries(store).items()}
        }

    @app.get("/report/radar")
    def get_radar():
        return build_radar(runs_dir)

    return app


def _summary_doc(summary) -> dict:
    return {
        "mean": summary.mean,
        "std": summary.std,
        "n": summary.n,
        "needs_consensus": summary.needs_consensus,
        "consensus_score": summary.consensus_score,
        "effective_score": summary.effective_score,
    }
