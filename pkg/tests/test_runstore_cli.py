import json
import shutil
from fractions import Fraction

import pytest
from click.testing import CliRunner

from conftest import fenced, med, plan_doc
from mdtbench.cases import MedAction, Medication, Prescription
from mdtbench.cli import main as cli_main
from mdtbench.errors import IncompleteClassification, StorageFailure
from mdtbench.evaluation import ActionClassification, LikertRecord, TargetKind
from mdtbench.gateway import Gateway, RecordingSession, ScriptedBackend
from mdtbench.runstore import (
    CLASSIFICATIONS_FILE,
    METRICS_FILE,
    RATINGS_FILE,
    RUN_FILE,
    RunWriter,
    STATUS_CLASSIFIED,
    STATUS_COMPLETE,
    STATUS_INVALID,
    STATUS_RATED,
    STATUS_RECORDED,
    active_classifications,
    append_classifications,
    append_ratings,
    build_radar,
    build_report,
    canonical_json,
    compute_metrics,
    find_run,
    likert_summaries,
    list_runs,
    load_run,
    mechanical_counts,
    plan_signature,
    read_classification_store,
    read_json,
    read_ratings_store,
    render_report_csv,
    render_report_table,
    run_status,
    set_consensus_score,
    set_count_overrides,
    set_goal_counts,
    write_json,
    write_metrics,
)
from mdtbench.workflow import PipelineKind, run_pipeline

PLAN_REPLY = fenced(
    plan_doc(
        [med("aspirin", dose="100 mg"), med("omeprazole"), med("alendronate", action="start")],
    )
)


def make_run(tmp_path, case_bundle, name="r1", reply=PLAN_REPLY):
    case, gold, lexicon = case_bundle
    writer = RunWriter(tmp_path / name)
    session = RecordingSession(f"run-{name}", writer.transcript_path)
    gateway = Gateway(ScriptedBackend([reply]), session)
    record = run_pipeline(
        case, PipelineKind.PURE, gateway, model_id="m1", run_id=f"run-{name}", lexicon=lexicon
    )
    session.close()
    return writer.finalize(record, case, gold, lexicon)


def gold_cls(target, label, adjudicator="panel", note=None):
    return ActionClassification(
        target=target, target_kind=TargetKind.GOLD, label=label, adjudicator=adjudicator, note=note
    )


CASE1_LABELS = {
    "P1": "omission",
    "P2": "omission",
    "P3": "omission",
    "O1a": "exact_match",
    "O1b": "exact_match",
    "O2a": "omission",
    "O2b": "omission",
}


def classify_case1(run_dir):
    append_classifications(run_dir, [gold_cls(t, l) for t, l in CASE1_LABELS.items()])


# ------------------------------------------------------------------ storage


def test_canonical_json_is_stable_and_readable():
    text = canonical_json({"b": 1, "a": {"y": [1, 2], "x": "ué"}})
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert "ué" in text
    assert "  " in text


def test_write_json_leaves_no_partial_file(tmp_path):
    path = write_json(tmp_path / "doc.json", {"k": 1})
    assert path.read_text() == canonical_json({"k": 1})
    assert list(tmp_path.iterdir()) == [path]


def test_read_json_raises_storage_failure(tmp_path):
    with pytest.raises(StorageFailure):
        read_json(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(StorageFailure):
        read_json(bad)


def test_run_writer_stages_then_renames(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    assert run_dir.is_dir()
    assert not run_dir.with_name(run_dir.name + ".staging").exists()
    for name in (RUN_FILE, "transcript.jsonl", "plan_original.json", "plan_revised.json"):
        assert (run_dir / name).exists()
    with pytest.raises(StorageFailure):
        RunWriter(run_dir)


def test_run_writer_abort_cleans_up(tmp_path):
    writer = RunWriter(tmp_path / "x")
    staging = writer.staging_dir
    assert staging.exists()
    writer.abort()
    assert not staging.exists()
    assert not (tmp_path / "x").exists()


def test_run_writer_refuses_to_finalize_without_transcript(tmp_path, case1):
    case, gold, lexicon = case1
    writer = RunWriter(tmp_path / "x")
    from mdtbench.workflow import RunRecord

    record = RunRecord(
        run_id="x", case_id=case.case_id, pipeline=PipelineKind.PURE, model_id="m",
        revised_plan=case.initial_plan,
    )
    with pytest.raises(StorageFailure):
        writer.finalize(record, case, gold, lexicon)
    writer.abort()


def test_run_is_self_contained(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    loaded = load_run(run_dir)
    case, gold, lexicon = case1
    assert loaded.case == case
    assert loaded.gold == gold
    assert loaded.lexicon == lexicon
    assert loaded.revised_plan.active_canonicals() == {"aspirin", "omeprazole", "alendronate"}


def test_status_ladder_from_file_presence(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    assert run_status(run_dir) == STATUS_RECORDED

    append_ratings(run_dir, [LikertRecord("r1", "efficiency", 4)])
    assert run_status(run_dir) == STATUS_RATED

    classify_case1(run_dir)
    assert run_status(run_dir) == STATUS_RATED  # classifications alone do not advance
    write_metrics(run_dir)
    assert run_status(run_dir) == STATUS_COMPLETE

    (run_dir / RATINGS_FILE).unlink()
    assert run_status(run_dir) == STATUS_CLASSIFIED

    (run_dir / RUN_FILE).unlink()
    assert run_status(run_dir) == STATUS_INVALID


def test_list_runs_skips_staging_and_flags_corrupt(tmp_path, case1):
    make_run(tmp_path, case1, name="ok")
    (tmp_path / "half.staging").mkdir()
    corrupt = tmp_path / "corrupt"
    corrupt.mkdir()
    (corrupt / RUN_FILE).write_text("{broken")
    (corrupt / "transcript.jsonl").write_text("")
    summaries = {s.path.split("/")[-1]: s for s in list_runs(tmp_path)}
    assert set(summaries) == {"ok", "corrupt"}
    assert summaries["ok"].status == STATUS_RECORDED
    assert summaries["ok"].run_id == "run-ok"
    assert summaries["corrupt"].status == STATUS_INVALID


def test_find_run_by_run_id(tmp_path, case1):
    run_dir = make_run(tmp_path, case1, name="findme")
    assert find_run(tmp_path, "run-findme") == run_dir
    with pytest.raises(StorageFailure):
        find_run(tmp_path, "missing")


# ----------------------------------------------------------- classifications


def test_append_classifications_supersedes_and_skips_identical(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    append_classifications(run_dir, [gold_cls("P1", "omission")])
    store = read_classification_store(run_dir)
    assert len(store["records"]) == 1

    append_classifications(run_dir, [gold_cls("P1", "omission")])
    store = read_classification_store(run_dir)
    assert len(store["records"]) == 1  # identical resubmission is a no-op

    append_classifications(run_dir, [gold_cls("P1", "exact_match")])
    store = read_classification_store(run_dir)
    assert len(store["records"]) == 2
    assert store["records"][0]["superseded"] is True
    active = active_classifications(store)
    assert [c.label for c in active] == ["exact_match"]


def test_count_overrides_validate_keys_and_provenance(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    with pytest.raises(ValueError):
        set_count_overrides(run_dir, {"ddis_revised": 1}, "note")
    with pytest.raises(ValueError):
        set_count_overrides(run_dir, {"ddi_revised": 1}, "")
    set_count_overrides(run_dir, {"contraindication_revised": 1}, "panel judgment")
    store = read_classification_store(run_dir)
    assert store["counts"]["overrides"] == {"contraindication_revised": 1}


def test_compute_metrics_requires_complete_classifications(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    append_classifications(run_dir, [gold_cls("O1a", "exact_match")])
    with pytest.raises(IncompleteClassification):
        compute_metrics(run_dir)
    partial = compute_metrics(run_dir, provisional=True)
    assert partial["provisional"] is True
    assert partial["correctness"]["display"] == "1/1"
    assert partial["completeness"]["display"] == "1/7"


def test_compute_metrics_full_row_with_overrides_and_goals(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    classify_case1(run_dir)
    set_count_overrides(
        run_dir, {"contraindication_revised": 1}, "bone treatment mitigates the acid-suppression conflict"
    )
    set_goal_counts(run_dir, (2, 3), (2, 2))
    metrics = compute_metrics(run_dir)
    assert metrics["correctness"]["display"] == "2/2"
    assert metrics["completeness"]["display"] == "2/7"
    assert metrics["ddi_ratio"]["display"] == "0/0"
    assert metrics["ddi_ratio"]["value"] is None
    assert metrics["contraindication_ratio"]["display"] == "1/2"
    assert metrics["medication_ratio"]["display"] == "3/2"
    assert metrics["met_goal_ratio"] == "3/2"
    assert metrics["met_goal_display"] == "1.5"
    assert metrics["preferred_included"] is False
    assert metrics["counts"]["mechanical"]["revised"]["contraindication"] == 2
    assert metrics["counts"]["effective"]["revised"]["contraindication"] == 1
    assert metrics["counts"]["provenance"].startswith("bone treatment")
    assert metrics["tally"]["tp_effective"] == "2"


def test_mechanical_counts_reflect_active_medications(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    original, revised = mechanical_counts(load_run(run_dir))
    assert (original.ddi, original.contraindication, original.medication) == (0, 2, 2)
    assert (revised.ddi, revised.contraindication, revised.medication) == (0, 2, 3)


# ------------------------------------------------------------------ ratings


def test_ratings_supersede_per_rater_dimension(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    append_ratings(run_dir, [LikertRecord("r1", "efficiency", 2)])
    append_ratings(run_dir, [LikertRecord("r1", "efficiency", 4), LikertRecord("r2", "efficiency", 4)])
    store = read_ratings_store(run_dir)
    assert len(store["records"]) == 3
    summaries = likert_summaries(store)
    assert summaries["efficiency"].mean == 4.0
    assert summaries["efficiency"].n == 2


def test_consensus_score_validation_and_effect(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    append_ratings(
        run_dir, [LikertRecord("r1", "reasonableness", 2), LikertRecord("r2", "reasonableness", 4)]
    )
    with pytest.raises(ValueError):
        set_consensus_score(run_dir, "speed", 3)
    with pytest.raises(ValueError):
        set_consensus_score(run_dir, "reasonableness", 0)
    set_consensus_score(run_dir, "reasonableness", 3.5)
    summaries = likert_summaries(read_ratings_store(run_dir))
    assert summaries["reasonableness"].needs_consensus is True
    assert summaries["reasonableness"].effective_score == 3.5


# ------------------------------------------------------------------ reports


def test_plan_signature_ignores_order_case_and_text():
    a = Prescription(
        medications=(
            Medication(canonical="aspirin", display_name="Aspirin", action=MedAction.CONTINUE, dose="100 MG"),
            Medication(canonical="omeprazole", display_name="Omeprazole", action=MedAction.CONTINUE),
        ),
        monitoring=("Check INR weekly",),
    )
    b = Prescription(
        medications=(
            Medication(canonical="omeprazole", display_name="prilosec", action=MedAction.CONTINUE),
            Medication(canonical="aspirin", display_name="ASA", action=MedAction.CONTINUE, dose="100 mg"),
        ),
        monitoring=("check inr weekly",),
    )
    assert plan_signature(a) == plan_signature(b)
    c = Prescription(
        medications=(
            Medication(canonical="aspirin", display_name="Aspirin", action=MedAction.STOP),
        )
    )
    assert plan_signature(a) != plan_signature(c)


def test_fixture_report_collapses_identical_plans(fixture_runs_dir):
    report = build_report(fixture_runs_dir)
    assert report["columns"] == [
        "pure/demo-model",
        "single_agent/demo-model",
        "multi_agent/demo-model",
    ]
    case2 = report["cases"]["case2"]
    assert case2["correctness"]["multi_agent/demo-model"] == "same as pure/demo-model"
    assert case2["correctness"]["pure/demo-model"] == "4/4"
    case1 = report["cases"]["case1"]
    assert case1["preferred_included"]["multi_agent/demo-model"] == "yes"
    assert case1["met_goal_ratio"]["pure/demo-model"] == "1.5"

    table = render_report_table(report)
    assert "same as pure/demo-model" in table
    csv_text = render_report_csv(report)
    assert csv_text.splitlines()[0] == "case,metric,pure/demo-model,single_agent/demo-model,multi_agent/demo-model"


def test_fixture_radar_prefers_multi_agent_ratings(fixture_runs_dir):
    doc = build_radar(fixture_runs_dir)
    assert len(doc["axes"]) == 12
    (series,) = doc["series"]
    assert series["model"] == "demo-model"
    by_axis = dict(zip([(a["case"], a["dimension"]) for a in doc["axes"]], series["values"]))
    assert by_axis[("case1", "explainability")] == 3.33
    assert by_axis[("case2", "explainability")] == 5.0
    assert by_axis[("case4", "reasonableness")] == 3.5  # consensus supersedes the mean


# ---------------------------------------------------------------------- CLI


def invoke(*args):
    runner = CliRunner()
    return runner.invoke(cli_main, list(args))


def collected_output(result):
    try:
        return result.output + result.stderr
    except (ValueError, AttributeError):
        return result.output


def test_cli_run_replays_fixture_byte_identically(fixture_runs_dir, tmp_path):
    fixture = fixture_runs_dir / "case1-pure-demo-model"
    out = tmp_path / "replayed"
    result = invoke(
        "run",
        "--case", "case1",
        "--pipeline", "pure",
        "--model", "demo-model",
        "--replay", str(fixture / "transcript.jsonl"),
        "--out", str(out),
    )
    assert result.exit_code == 0, result.output
    assert (out / "plan_revised.json").read_bytes() == (fixture / "plan_revised.json").read_bytes()
    assert (out / RUN_FILE).read_bytes() == (fixture / RUN_FILE).read_bytes()


def test_cli_run_reports_drift_with_exit_code_3(fixture_runs_dir, tmp_path):
    fixture = fixture_runs_dir / "case1-pure-demo-model"
    result = invoke(
        "run",
        "--case", "case1",
        "--pipeline", "single",
        "--model", "demo-model",
        "--replay", str(fixture / "transcript.jsonl"),
        "--out", str(tmp_path / "drifted"),
    )
    assert result.exit_code == 3
    assert "replay drift" in collected_output(result)
    assert not (tmp_path / "drifted").exists()
    assert not (tmp_path / "drifted.staging").exists()


def test_cli_run_requires_exactly_one_backend(tmp_path):
    result = invoke("run", "--case", "case1", "--pipeline", "pure", "--out", str(tmp_path / "x"))
    assert result.exit_code == 2
    assert "exactly one of --endpoint or --replay" in collected_output(result)


def test_cli_eval_reproduces_fixture_metrics(fixture_runs_dir, tmp_path):
    fixture = fixture_runs_dir / "case1-pure-demo-model"
    run_dir = tmp_path / "case1-pure-demo-model"
    shutil.copytree(fixture, run_dir)
    store_doc = json.loads((run_dir / CLASSIFICATIONS_FILE).read_text())
    (run_dir / METRICS_FILE).unlink()
    (run_dir / CLASSIFICATIONS_FILE).unlink()
    source = tmp_path / "adjudication.json"
    source.write_text(json.dumps(store_doc))

    result = invoke("eval", "--run", str(run_dir), "--classifications", str(source))
    assert result.exit_code == 0, result.output
    assert "correctness  2/2" in result.output
    assert "completeness 2/7" in result.output
    assert (run_dir / METRICS_FILE).read_bytes() == (fixture / METRICS_FILE).read_bytes()


def test_cli_eval_fails_cleanly_when_unclassified(tmp_path, case1):
    run_dir = make_run(tmp_path, case1)
    result = invoke("eval", "--run", str(run_dir))
    assert result.exit_code == 1
    assert "unclassified gold actions" in collected_output(result)


def test_cli_report_writes_csv_file(fixture_runs_dir, tmp_path):
    out = tmp_path / "report.csv"
    result = invoke("report", "--runs-dir", str(fixture_runs_dir), "--format", "csv", "--out", str(out))
    assert result.exit_code == 0, result.output
    assert out.read_text().startswith("case,metric,")


def test_cli_report_radar_json(fixture_runs_dir):
    result = invoke("report", "--runs-dir", str(fixture_runs_dir), "--format", "radar-json")
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc["kind"] == "radar"


def test_cli_list_shows_status(fixture_runs_dir):
    result = invoke("list", "--runs-dir", str(fixture_runs_dir))
    assert result.exit_code == 0
    assert "case1-pure-demo-model" in result.output
    assert "status=classified" in result.output
    assert "status=complete" in result.output
