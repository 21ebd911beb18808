"""Freeze adjudication-service responses for the review console's tests.

The console is tested against recorded HTTP exchanges rather than a live
server; this script produces those recordings from the real FastAPI app over
the shipped runs corpus, so every number the UI displays traces back to the
same service the CLI talks to. The adjudication flow (partial submission,
full board, reload, ratings) is exercised on a scratch copy of the recorded
case1 pure run, and the metrics it persists are asserted byte-identical to
the shipped corpus before anything is written.
"""

from __future__ import annotations

import argparse
import json
import shutil
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from mdtbench.api import create_app
from mdtbench.runstore import CLASSIFICATIONS_FILE, METRICS_FILE, read_json

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURE_RUNS = REPO_ROOT / "fixtures" / "runs"
DEFAULT_DEST = REPO_ROOT / "frontend" / "tests" / "fixtures"

BOARD_RUN = "case1-pure-demo-model"
FIXED_STAMP = "2026-08-14T00:00:00+00:00"


def _scrub(doc):
    """Pin wall-clock submission stamps so re-exports are byte-stable."""
    if isinstance(doc, dict):
        return {
            k: (FIXED_STAMP if k == "submitted_at" else _scrub(v)) for k, v in doc.items()
        }
    if isinstance(doc, list):
        return [_scrub(v) for v in doc]
    return doc


def _dump(dest: Path, name: str, doc) -> None:
    path = dest / name
    path.write_text(json.dumps(_scrub(doc), indent=2, ensure_ascii=False) + "\n")


def _get(client: TestClient, path: str) -> dict:
    response = client.get(path)
    if response.status_code != 200:
        raise SystemExit(f"GET {path} -> {response.status_code}: {response.text}")
    return response.json()


def _post(client: TestClient, path: str, payload: dict) -> dict:
    response = client.post(path, json=payload)
    if response.status_code != 200:
        raise SystemExit(f"POST {path} -> {response.status_code}: {response.text}")
    return response.json()


def export(dest: Path, runs_dir: Path = FIXTURE_RUNS) -> None:
    dest.mkdir(parents=True, exist_ok=True)

    corpus = TestClient(create_app(runs_dir))
    _dump(dest, "runs.json", _get(corpus, "/runs"))
    _dump(dest, "case1.json", _get(corpus, "/cases/case1"))
    _dump(dest, "gold_case1.json", _get(corpus, "/cases/case1/gold"))
    _dump(dest, "radar.json", _get(corpus, "/report/radar"))
    _dump(dest, "bundle_complete.json", _get(corpus, f"/runs/case1-multi_agent-demo-model"))
    _dump(dest, "transcript_pure.json", _get(corpus, f"/runs/{BOARD_RUN}/transcript"))
    _dump(dest, "transcript_forum.json", _get(corpus, "/runs/case2-multi_agent-demo-model/transcript"))
    _dump(dest, "transcript_direct.json", _get(corpus, "/runs/case3-multi_agent-demo-model/transcript"))

    with tempfile.TemporaryDirectory() as scratch:
        runs = Path(scratch) / "runs"
        runs.mkdir()
        source = runs_dir / BOARD_RUN
        work = runs / BOARD_RUN
        shutil.copytree(source, work)
        shipped = read_json(work / CLASSIFICATIONS_FILE)
        (work / CLASSIFICATIONS_FILE).unlink()
        (work / METRICS_FILE).unlink()

        client = TestClient(create_app(runs))
        _dump(dest, "bundle_recorded.json", _get(client, f"/runs/{BOARD_RUN}"))

        records = [r for r in shipped["records"] if not r.get("superseded")]
        first = records[0]
        partial = _post(
            client,
            f"/runs/{BOARD_RUN}/classifications",
            {
                "adjudicator": first["adjudicator"],
                "classifications": [
                    {
                        "target": first["target"],
                        "target_kind": first["target_kind"],
                        "label": first["label"],
                        "note": first.get("note"),
                    }
                ],
            },
        )
        if partial["provisional"] is not True:
            raise SystemExit("partial submission unexpectedly completed the board")
        _dump(dest, "classify_partial.json", partial)

        complete = _post(
            client,
            f"/runs/{BOARD_RUN}/classifications",
            {
                "adjudicator": first["adjudicator"],
                "classifications": [
                    {
                        "target": r["target"],
                        "target_kind": r["target_kind"],
                        "label": r["label"],
                        "note": r.get("note"),
                    }
                    for r in records
                ],
                "count_overrides": shipped["counts"]["overrides"],
                "override_provenance": shipped["counts"]["provenance"],
                "goal_counts": {
                    "original": shipped["goal_counts"]["original"],
                    "revised": shipped["goal_counts"]["revised"],
                },
            },
        )
        if complete["provisional"] is not False:
            raise SystemExit("full board did not complete")
        persisted = (work / METRICS_FILE).read_bytes()
        if persisted != (source / METRICS_FILE).read_bytes():
            raise SystemExit("metrics persisted through the API drifted from the shipped corpus")
        _dump(dest, "classify_complete.json", complete)
        _dump(dest, "bundle_reloaded.json", _get(client, f"/runs/{BOARD_RUN}"))

        ratings_url = f"/runs/{BOARD_RUN}/ratings"
        _post(client, ratings_url, {"rater": "rater-a", "ratings": [{"dimension": "explainability", "score": 3}]})
        _post(client, ratings_url, {"rater": "rater-b", "ratings": [{"dimension": "explainability", "score": 3}]})
        third = _post(
            client, ratings_url, {"rater": "rater-c", "ratings": [{"dimension": "explainability", "score": 4}]}
        )
        _dump(dest, "ratings_three.json", third)

        _post(client, ratings_url, {"rater": "rater-a", "ratings": [{"dimension": "reasonableness", "score": 1}]})
        split = _post(
            client, ratings_url, {"rater": "rater-b", "ratings": [{"dimension": "reasonableness", "score": 4}]}
        )
        _dump(dest, "ratings_disagreement.json", split)

        settled = _post(client, ratings_url, {"rater": "rater-a", "consensus": {"reasonableness": 2.5}})
        _dump(dest, "ratings_consensus.json", settled)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dest", type=Path, default=DEFAULT_DEST)
    parser.add_argument("--runs-dir", type=Path, default=FIXTURE_RUNS)
    args = parser.parse_args()
    export(args.dest, args.runs_dir)
    print(f"fixtures written: {args.dest}")


if __name__ == "__main__":
    main()
