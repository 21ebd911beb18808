import json
from pathlib import Path

import pytest

from mdtbench.corpus import load_builtin
from mdtbench.gateway import Gateway, RecordingSession, ScriptedBackend

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURE_RUNS = REPO_ROOT / "fixtures" / "runs"


def fenced(doc, prose="Reasoning omitted.", label="json"):
    return f"{prose}\n\n```{label}\n{json.dumps(doc, indent=1)}\n```\n"


def plan_doc(meds, monitoring=()):
    return {"medications": meds, "monitoring": list(monitoring)}


def med(name, action="continue", **extra):
    doc = {"name": name, "action": action}
    doc.update(extra)
    return doc


def goals_doc(*descriptions):
    return {"goals": [{"description": d, "medications": []} for d in descriptions]}


def conflicts_doc(*conflicts):
    return {"conflicts": list(conflicts)}


def statement_doc(position, proposal, stance):
    return {"position": position, "proposal": list(proposal), "stance": stance}


def scripted_gateway(replies, run_id=None, transcript_path=None):
    """Gateway over a scripted backend; records only when a path is given."""
    backend = ScriptedBackend(list(replies))
    session = None
    if transcript_path is not None:
        session = RecordingSession(run_id or "test-run", transcript_path)
    return Gateway(backend, session), backend, session


@pytest.fixture
def case1():
    return load_builtin("case1")


@pytest.fixture
def case3():
    return load_builtin("case3")


@pytest.fixture
def fixture_runs_dir():
    if not FIXTURE_RUNS.is_dir():
        pytest.skip("fixture corpus not built; run scripts/build_fixtures.py")
    return FIXTURE_RUNS
