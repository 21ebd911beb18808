"""Command-line entry point: run pipelines, evaluate, report, list, serve."""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__
from .cases import load_case, load_gold, load_lexicon, EMPTY_LEXICON
from .corpus import builtin_case_ids, load_builtin
from .errors import MdtbenchError, ReplayMiss
from .evaluation import ActionClassification, TargetKind
from .gateway import Gateway, LiveBackend, RecordingSession, ReplayBackend
from .runstore import (
    CLASSIFICATIONS_FILE,
    RunWriter,
    build_radar,
    build_report,
    canonical_json,
    list_runs,
    read_json,
    render_report_csv,
    render_report_table,
    write_json,
    write_metrics,
)
from .workflow import PipelineKind, run_pipeline


@click.group()
@click.version_option(version=__version__, prog_name="mdtbench")
def main():
    """Benchmark LLM medication-plan revision on multimorbidity cases."""


def _load_inputs(case_ref: str, gold_path: str | None, lexicon_path: str | None):
    """A case is either a builtin id (case1..case4) or a path to case.json;
    gold and lexicon default to the builtin companions or to EMPTY_LEXICON."""
    if case_ref in builtin_case_ids():
        case, gold, lexicon = load_builtin(case_ref)
        if lexicon_path:
            lexicon = load_lexicon(lexicon_path)
        if gold_path:
            gold = load_gold(gold_path)
        return case, gold, lexicon
    if gold_path is None:
        raise click.UsageError("--gold is required when --case is a file path")
    lexicon = load_lexicon(lexicon_path) if lexicon_path else EMPTY_LEXICON
    return load_case(case_ref, lexicon), load_gold(gold_path), lexicon


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "-" for ch in text.strip().lower())


def _execute_run(case, gold, lexicon, pipeline: PipelineKind, model: str,
                 make_backend, out_dir: Path) -> Path:
    writer = RunWriter(out_dir)
    run_id = f"{case.case_id}-{pipeline.value}-{_slug(model)}"
    session = RecordingSession(run_id, writer.transcript_path)
    gateway = Gateway(make_backend(), session)
    try:
        record = run_pipeline(
            case, pipeline, gateway, model_id=model, run_id=run_id, lexicon=lexicon
        )
    except BaseException:
        session.abandon()
        writer.abort()
        raise
    session.close()
    return writer.finalize(record, case, gold, lexicon)


@main.command("run")
@click.option("--case", "case_ref", required=False, help="Builtin case id or path to case.json.")
@click.option("--gold", "gold_path", default=None, help="Path to gold.json (defaults to builtin).")
@click.option("--lexicon", "lexicon_path", default=None, help="Path to lexicon.json (defaults to builtin).")
@click.option("--pipeline", "pipeline_flag", type=click.Choice(["pure", "single", "multi"]), required=True)
@click.option("--model", default="unspecified-model", show_default=True, help="Model identifier sent upstream.")
@click.option("--endpoint", default=None, help="Chat-completions base URL (live mode).")
@click.option("--replay", "replay_path", default=None, help="Recorded transcript to replay (deterministic mode).")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Run directory to create (parent dir with --all-cases).")
@click.option("--all-cases", is_flag=True, help="Run every builtin case (live mode only).")
def cli_run(case_ref, gold_path, lexicon_path, pipeline_flag, model, endpoint, replay_path, out_dir, all_cases):
    """Execute one pipeline and persist the run directory."""
    if (endpoint is None) == (replay_path is None):
        raise click.UsageError("exactly one of --endpoint or --replay is required")
    if all_cases and replay_path:
        raise click.UsageError("--all-cases cannot replay a single transcript")
    if not all_cases and not case_ref:
        raise click.UsageError("--case is required (or pass --all-cases)")

    pipeline = PipelineKind.from_flag(pipeline_flag)
    if endpoint:
        make_backend = lambda: LiveBackend(endpoint)  # noqa: E731
    else:
        make_backend = lambda: ReplayBackend(replay_path)  # noqa: E731

    targets = []
    if all_cases:
        parent = Path(out_dir)
        for case_id in builtin_case_ids():
            case, gold, lexicon = load_builtin(case_id)
            targets.append((case, gold, lexicon, parent / f"{case_id}-{pipeline.value}-{_slug(model)}"))
    else:
        case, gold, lexicon = _load_inputs(case_ref, gold_path, lexicon_path)
        targets.append((case, gold, lexicon, Path(out_dir)))

    for case, gold, lexicon, target_dir in targets:
        try:
            final = _execute_run(case, gold, lexicon, pipeline, model, make_backend, target_dir)
        except ReplayMiss as exc:
            click.echo(
                "replay drift: the pipeline issued a request the transcript has no "
                f"answer for (request_tag={exc.request_tag!r}). The code path and the "
                "recording no longer agree.",
                err=True,
            )
            sys.exit(3)
        except MdtbenchError as exc:
            raise click.ClickException(str(exc)) from exc
        click.echo(f"run written: {final}")


@main.command("eval")
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--classifications", "classifications_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Classification document to install into the run before scoring.")
def cli_eval(run_dir, classifications_path):
    """Compute metrics.json for a run from its classifications."""
    run_dir = Path(run_dir)
    try:
        if classifications_path:
            _install_classification_file(run_dir, Path(classifications_path))
        path = write_metrics(run_dir)
    except MdtbenchError as exc:
        raise click.ClickException(str(exc)) from exc
    metrics = read_json(path)
    click.echo(f"metrics written: {path}")
    click.echo(f"correctness  {metrics['correctness']['display']}")
    click.echo(f"completeness {metrics['completeness']['display']}")


def _install_classification_file(run_dir: Path, source: Path):
    """Validate an external classification document and install it, replacing
    any existing store wholesale (the file is the adjudicator's statement of
    record)."""
    doc = read_json(source)
    records = doc.get("records", [])
    for i, r in enumerate(records):
        try:
            ActionClassification(
                target=r["target"],
                target_kind=TargetKind(r["target_kind"]),
                label=r["label"],
                adjudicator=r.get("adjudicator", ""),
                note=r.get("note"),
            )
        except (KeyError, ValueError) as exc:
            raise click.ClickException(f"records[{i}] invalid: {exc}") from exc
        r.setdefault("superseded", False)
        r.setdefault("submitted_at", "")
    doc.setdefault("schema_version", 1)
    write_json(run_dir / CLASSIFICATIONS_FILE, doc)


@main.command("report")
@click.option("--runs-dir", "runs_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--format", "fmt", type=click.Choice(["table", "csv", "radar-json"]), default="table", show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(), help="Write to a file instead of stdout.")
def cli_report(runs_dir, fmt, out_path):
    """Render the benchmark report across all evaluated runs."""
    if fmt == "radar-json":
        rendered = canonical_json(build_radar(runs_dir))
    else:
        report = build_report(runs_dir)
        rendered = render_report_table(report) if fmt == "table" else render_report_csv(report)
    if out_path:
        Path(out_path).write_text(rendered, encoding="utf-8")
        click.echo(f"report written: {out_path}")
    else:
        click.echo(rendered, nl=False)


@main.command("list")
@click.option("--runs-dir", "runs_dir", required=True, type=click.Path(exists=True, file_okay=False))
def cli_list(runs_dir):
    """List runs with their adjudication status."""
    rows = list_runs(runs_dir)
    if not rows:
        click.echo("(no runs)")
        return
    for s in rows:
        click.echo(f"{s.run_id}  case={s.case_id or '-'}  pipeline={s.pipeline or '-'}  "
                   f"model={s.model_id or '-'}  status={s.status}")


@main.command("serve")
@click.option("--runs-dir", "runs_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--port", default=8400, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--read-only", is_flag=True)
@click.option(
    "--ui",
    "ui_dir",
    type=click.Path(exists=True, file_okay=False),
    help="Directory of built review-console assets to serve under /ui.",
)
def cli_serve(runs_dir, port, host, read_only, ui_dir):
    """Serve the adjudication API (and the review console, if built)."""
    import uvicorn

    from .api import create_app

    app = create_app(runs_dir, read_only=read_only, static_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
