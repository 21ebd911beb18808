import json

import pytest

from conftest import (
    conflicts_doc,
    fenced,
    goals_doc,
    med,
    plan_doc,
    scripted_gateway,
    statement_doc,
)
from mdtbench.errors import (
    BudgetExceeded,
    EmptyAssignment,
    InvariantViolation,
    ParseFailure,
    PipelineError,
    ReplayMiss,
)
from mdtbench.gateway import Gateway, RecordingSession, ReplayBackend, ScriptedBackend
from mdtbench.roles import Stage
from mdtbench.workflow import (
    ForumConfig,
    MdtAssignment,
    MdtEntry,
    PipelineKind,
    Resolution,
    RunRecord,
    WorkflowConfig,
    run_pipeline,
    run_record_from_doc,
    run_record_to_doc,
)


def mdt_doc(*assignments):
    return {"assignments": list(assignments)}


def assign(conflict_id, specialties=(), gp=False):
    return {
        "conflict_id": conflict_id,
        "specialties": list(specialties),
        "within_gp_expertise": gp,
    }


def direct_doc(*recommendation, rationale="because"):
    return {"recommendation": list(recommendation), "rationale": rationale}


def mediator_doc(*recommendation):
    return {
        "summary": "positions summarized",
        "recommendation": list(recommendation),
        "rationale": "weighed the tradeoffs",
    }


CASE1_PLAN = fenced(plan_doc([med("aspirin", dose="100 mg"), med("omeprazole")]))
CASE1_GOALS = fenced(goals_doc("prevent stroke", "heal ulcer", "treat osteoporosis"))
CASE1_CONFLICTS = fenced(
    conflicts_doc(
        {
            "kind": "contraindication",
            "members": ["aspirin", "duodenal ulcer"],
            "description": "bleeding risk",
        }
    )
)
CASE1_TWO_CONFLICTS = fenced(
    conflicts_doc(
        {"kind": "contraindication", "members": ["aspirin", "duodenal ulcer"]},
        {"kind": "contraindication", "members": ["omeprazole", "osteoporosis"]},
    )
)


def test_pipeline_kind_from_flag():
    assert PipelineKind.from_flag("pure") is PipelineKind.PURE
    assert PipelineKind.from_flag("single") is PipelineKind.SINGLE_AGENT
    assert PipelineKind.from_flag("multi") is PipelineKind.MULTI_AGENT
    with pytest.raises(ValueError):
        PipelineKind.from_flag("mdt")


def test_pure_pipeline_is_one_exchange(case1):
    case, _gold, lexicon = case1
    gateway, backend, _ = scripted_gateway([CASE1_PLAN])
    record = run_pipeline(case, PipelineKind.PURE, gateway, model_id="m1", lexicon=lexicon)
    assert record.exchange_count == 1
    assert [r.request_tag for r in backend.requests_seen] == ["pure/plan"]
    assert record.detected_conflicts is None
    assert record.assignment is None
    assert record.resolutions == ()
    assert record.revised_plan.active_canonicals() == {"aspirin", "omeprazole"}
    assert record.run_id == "case1-pure-m1"


def test_single_agent_runs_three_staged_exchanges(case1):
    case, _gold, lexicon = case1
    gateway, backend, _ = scripted_gateway([CASE1_GOALS, CASE1_CONFLICTS, CASE1_PLAN])
    record = run_pipeline(case, PipelineKind.SINGLE_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert record.exchange_count == 3
    assert [r.request_tag for r in backend.requests_seen] == ["goals", "conflicts", "integrate"]
    assert len(record.detected_goals) == 3
    assert record.detected_goals[0].goal_id == "detected-1"
    assert record.detected_conflicts.ids() == ("contra:aspirin@duodenal ulcer",)
    assert record.assignment is None
    assert record.resolutions == ()


def test_conflict_reply_normalizes_synonyms_and_dedupes(case3):
    case, _gold, lexicon = case3
    reply = fenced(
        conflicts_doc(
            {"kind": "ddi", "members": ["Coumadin", "Bactrim"]},
            {"kind": "ddi", "members": ["warfarin", "TMP/SMX"]},
        )
    )
    plan = fenced(plan_doc([med("warfarin", dose="5 mg")]))
    gateway, _, _ = scripted_gateway([fenced(goals_doc("inr")), reply, plan])
    record = run_pipeline(case, PipelineKind.SINGLE_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert record.detected_conflicts.ids() == ("ddi:trimethoprim-sulfamethoxazole+warfarin",)


def forum_statement(position, proposal, stance):
    return fenced(statement_doc(position, proposal, stance))


def test_multi_agent_forum_reaches_consensus(case1):
    case, _gold, lexicon = case1
    proposal = ["replace aspirin with clopidogrel", "stop omeprazole after healing"]
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", ["gastroenterology", "neurology"]))),
        forum_statement("switch it", proposal, "agree"),
        forum_statement("agreed", list(reversed(proposal)), "agree"),
        fenced(plan_doc([med("clopidogrel", action="replace", replaces="aspirin")])),
    ]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    (resolution,) = record.resolutions
    assert resolution.rounds_used == 1
    assert resolution.mediator_invoked is False
    assert resolution.gp_resolved is False
    assert resolution.contributing_agents == (
        "specialist:gastroenterology",
        "specialist:neurology",
    )
    assert resolution.recommendation == tuple(sorted(p.lower() for p in proposal))
    assert "consensus reached in round 1" in resolution.rationale
    assert record.exchange_count == 6
    tags = [r.request_tag for r in backend.requests_seen]
    assert tags[3:5] == [
        "resolve/contra:aspirin@duodenal ulcer/round1/gastroenterology",
        "resolve/contra:aspirin@duodenal ulcer/round1/neurology",
    ]


def test_multi_agent_mediator_after_round_exhaustion(case1):
    case, _gold, lexicon = case1
    config = WorkflowConfig(forum=ForumConfig(max_rounds=2))
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", ["gastroenterology", "neurology"]))),
        forum_statement("swap", ["replace aspirin with clopidogrel"], "agree"),
        forum_statement("keep", ["continue aspirin with protection"], "revise"),
        forum_statement("swap", ["replace aspirin with clopidogrel"], "agree"),
        forum_statement("still keep", ["continue aspirin with protection"], "agree"),
        fenced(mediator_doc("replace aspirin with clopidogrel")),
        fenced(plan_doc([med("clopidogrel", action="start")])),
    ]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(
        case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon, config=config
    )
    (resolution,) = record.resolutions
    assert resolution.rounds_used == 2
    assert resolution.mediator_invoked is True
    assert resolution.contributing_agents[-1] == "mediator"
    assert backend.requests_seen[-2].request_tag == "resolve/contra:aspirin@duodenal ulcer/mediator"
    mediator_prompt = backend.requests_seen[-2].messages[0].content
    assert "Round 2" in mediator_prompt
    assert "Round 1" not in mediator_prompt


def test_multi_agent_single_specialist_resolves_directly(case3):
    case, _gold, lexicon = case3
    replies = [
        fenced(goals_doc("keep inr therapeutic")),
        fenced(conflicts_doc({"kind": "ddi", "members": ["warfarin", "tmp/smx"]})),
        fenced(mdt_doc(assign("ddi:trimethoprim-sulfamethoxazole+warfarin", ["clinical pharmacology"]))),
        fenced(direct_doc("switch to nitrofurantoin")),
        fenced(plan_doc([med("warfarin"), med("nitrofurantoin", action="replace", replaces="tmp/smx")])),
    ]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    (resolution,) = record.resolutions
    assert resolution.rounds_used == 0
    assert resolution.mediator_invoked is False
    assert resolution.contributing_agents == ("specialist:clinical pharmacology",)
    assert (
        backend.requests_seen[3].request_tag
        == "resolve/ddi:trimethoprim-sulfamethoxazole+warfarin/direct/clinical pharmacology"
    )


def test_multi_agent_gp_keeps_conflict_within_expertise(case1):
    case, _gold, lexicon = case1
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", gp=True))),
        fenced(direct_doc("keep aspirin, add gastric protection")),
        CASE1_PLAN,
    ]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    (resolution,) = record.resolutions
    assert resolution.gp_resolved is True
    assert resolution.rounds_used == 0
    assert resolution.contributing_agents == ("gp",)
    assert backend.requests_seen[3].request_tag == (
        "resolve/contra:aspirin@duodenal ulcer/direct/gp"
    )
    assert record.assignment.roster == ()


def test_multi_agent_without_conflicts_skips_team_phase(case1):
    case, _gold, lexicon = case1
    replies = [CASE1_GOALS, fenced(conflicts_doc()), CASE1_PLAN]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert record.exchange_count == 3
    assert record.assignment == MdtAssignment(entries=(), roster=())
    assert record.resolutions == ()
    assert [r.request_tag for r in backend.requests_seen] == ["goals", "conflicts", "integrate"]


def test_repair_reprompt_recovers_once(case1):
    case, _gold, lexicon = case1
    replies = ["no block here, sorry", CASE1_PLAN]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.PURE, gateway, model_id="m1", lexicon=lexicon)
    assert record.exchange_count == 2
    tags = [r.request_tag for r in backend.requests_seen]
    assert tags == ["pure/plan", "pure/plan/repair"]
    repair_prompt = backend.requests_seen[1].messages[0].content
    assert "no block here, sorry" in repair_prompt
    assert "missing or invalid" in repair_prompt


def test_second_parse_failure_is_fatal(case1):
    case, _gold, lexicon = case1
    gateway, _, _ = scripted_gateway(["prose only", "still prose"])
    with pytest.raises(ParseFailure) as err:
        run_pipeline(case, PipelineKind.PURE, gateway, model_id="m1", lexicon=lexicon)
    assert err.value.stage == "pure_plan"


def test_schema_mismatch_also_triggers_repair(case1):
    case, _gold, lexicon = case1
    bad = fenced({"medications": [{"name": "aspirin", "action": "hold"}], "monitoring": []})
    gateway, backend, _ = scripted_gateway([bad, CASE1_PLAN])
    record = run_pipeline(case, PipelineKind.PURE, gateway, model_id="m1", lexicon=lexicon)
    assert record.exchange_count == 2
    assert backend.requests_seen[1].request_tag == "pure/plan/repair"


def test_mdt_retry_covers_missing_assignment(case1):
    case, _gold, lexicon = case1
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc()),  # covers nothing
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", ["gastroenterology"]))),
        fenced(direct_doc("switch antiplatelet")),
        CASE1_PLAN,
    ]
    gateway, backend, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    tags = [r.request_tag for r in backend.requests_seen]
    assert "mdt/retry" in tags
    assert len(record.resolutions) == 1


def test_mdt_empty_after_retry_raises(case1):
    case, _gold, lexicon = case1
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", []))),
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", []))),
    ]
    gateway, _, _ = scripted_gateway(replies)
    with pytest.raises(EmptyAssignment) as err:
        run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert err.value.conflict_id == "contra:aspirin@duodenal ulcer"


def test_specialty_list_dedupes_and_truncates_to_cap(case1):
    case, _gold, lexicon = case1
    config = WorkflowConfig(specialty_cap=2)
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(
            mdt_doc(
                assign(
                    "contra:aspirin@duodenal ulcer",
                    ["Gastroenterology", "gastroenterology", "neurology", "cardiology"],
                )
            )
        ),
        forum_statement("a", ["replace aspirin with clopidogrel"], "agree"),
        forum_statement("b", ["replace aspirin with clopidogrel"], "agree"),
        fenced(plan_doc([med("clopidogrel", action="start")])),
    ]
    gateway, _, _ = scripted_gateway(replies)
    record = run_pipeline(
        case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon, config=config
    )
    entry = record.assignment.entries[0]
    assert entry.specialties == ("gastroenterology", "neurology")
    assert any("truncated" in w for w in record.warnings)


def test_sequential_visibility_shows_earlier_statements_same_round(case1):
    case, _gold, lexicon = case1
    proposal = ["replace aspirin with clopidogrel"]
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", ["gastroenterology", "neurology"]))),
        forum_statement("the gastro view", proposal, "agree"),
        forum_statement("concur", proposal, "agree"),
        CASE1_PLAN,
    ]
    gateway, backend, _ = scripted_gateway(replies)
    run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    first_prompt = backend.requests_seen[3].messages[0].content
    second_prompt = backend.requests_seen[4].messages[0].content
    assert "no statements yet" in first_prompt
    assert "specialist:gastroenterology" in second_prompt
    assert "the gastro view" in second_prompt


def test_simultaneous_visibility_hides_same_round_statements(case1):
    case, _gold, lexicon = case1
    config = WorkflowConfig(forum=ForumConfig(max_rounds=1, sequential_visibility=False))
    proposal = ["replace aspirin with clopidogrel"]
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", ["gastroenterology", "neurology"]))),
        forum_statement("the gastro view", proposal, "agree"),
        forum_statement("concur", proposal, "agree"),
        CASE1_PLAN,
    ]
    gateway, backend, _ = scripted_gateway(replies)
    run_pipeline(
        case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon, config=config
    )
    second_prompt = backend.requests_seen[4].messages[0].content
    assert "no statements yet" in second_prompt


def test_exchange_budget_is_enforced(case1):
    case, _gold, lexicon = case1
    config = WorkflowConfig(exchange_budget=2)
    gateway, _, _ = scripted_gateway([CASE1_GOALS, CASE1_CONFLICTS, CASE1_PLAN])
    with pytest.raises(BudgetExceeded):
        run_pipeline(
            case, PipelineKind.SINGLE_AGENT, gateway, model_id="m1", lexicon=lexicon, config=config
        )


def test_provenance_warning_for_unsourced_medication(case1):
    case, _gold, lexicon = case1
    replies = [
        CASE1_GOALS,
        CASE1_CONFLICTS,
        fenced(mdt_doc(assign("contra:aspirin@duodenal ulcer", ["gastroenterology"]))),
        fenced(direct_doc("replace aspirin with clopidogrel")),
        fenced(
            plan_doc(
                [
                    med("clopidogrel", action="replace", replaces="aspirin"),
                    med("alendronate", action="start"),
                ]
            )
        ),
    ]
    gateway, _, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert any(w.startswith("provenance: 'alendronate'") for w in record.warnings)
    assert not any("clopidogrel" in w and w.startswith("provenance") for w in record.warnings)


def test_no_provenance_check_without_resolutions(case1):
    case, _gold, lexicon = case1
    plan = fenced(plan_doc([med("alendronate", action="start")]))
    gateway, _, _ = scripted_gateway([CASE1_GOALS, CASE1_CONFLICTS, plan])
    record = run_pipeline(case, PipelineKind.SINGLE_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert record.warnings == ()


def test_overlap_warning_when_resolutions_share_a_drug(case1):
    case, _gold, lexicon = case1
    replies = [
        CASE1_GOALS,
        CASE1_TWO_CONFLICTS,
        fenced(
            mdt_doc(
                assign("contra:aspirin@duodenal ulcer", ["gastroenterology"]),
                assign("contra:omeprazole@osteoporosis", ["endocrinology"]),
            )
        ),
        fenced(direct_doc("stop omeprazole after healing")),
        fenced(direct_doc("stop omeprazole and start alendronate")),
        fenced(plan_doc([med("aspirin"), med("omeprazole", action="stop", timing="after healing")])),
    ]
    gateway, _, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    assert any(w.startswith("overlap:") and "omeprazole" in w for w in record.warnings)


def test_run_record_round_trips_through_documents(case3):
    case, _gold, lexicon = case3
    replies = [
        fenced(goals_doc("keep inr therapeutic")),
        fenced(conflicts_doc({"kind": "ddi", "members": ["warfarin", "bactrim"]})),
        fenced(mdt_doc(assign("ddi:trimethoprim-sulfamethoxazole+warfarin", ["clinical pharmacology"]))),
        fenced(direct_doc("switch to nitrofurantoin")),
        fenced(plan_doc([med("warfarin"), med("nitrofurantoin", action="start")], ["inr weekly"])),
    ]
    gateway, _, _ = scripted_gateway(replies)
    record = run_pipeline(case, PipelineKind.MULTI_AGENT, gateway, model_id="m1", lexicon=lexicon)
    doc = json.loads(json.dumps(run_record_to_doc(record)))
    assert run_record_from_doc(doc) == record


def test_replay_reproduces_run_and_misses_on_drift(case3, tmp_path):
    case, _gold, lexicon = case3
    replies = [
        fenced(goals_doc("keep inr therapeutic")),
        fenced(conflicts_doc({"kind": "ddi", "members": ["warfarin", "bactrim"]})),
        fenced(plan_doc([med("warfarin", dose="4 mg")])),
    ]
    path = tmp_path / "t.jsonl"
    gateway, _, session = scripted_gateway(replies, run_id="case3-x", transcript_path=path)
    recorded = run_pipeline(
        case, PipelineKind.SINGLE_AGENT, gateway, model_id="m1", run_id="case3-x", lexicon=lexicon
    )
    session.close()

    replayed = run_pipeline(
        case,
        PipelineKind.SINGLE_AGENT,
        Gateway(ReplayBackend(path)),
        model_id="m1",
        run_id="case3-x",
        lexicon=lexicon,
    )
    assert run_record_to_doc(replayed) == run_record_to_doc(recorded)

    with pytest.raises(ReplayMiss) as err:
        run_pipeline(
            case, PipelineKind.PURE, Gateway(ReplayBackend(path)), model_id="m1", lexicon=lexicon
        )
    assert err.value.request_tag == "pure/plan"


def test_run_record_invariants():
    from mdtbench.cases import Prescription

    plan = Prescription()
    with pytest.raises(InvariantViolation):
        RunRecord(
            run_id="r",
            case_id="c",
            pipeline=PipelineKind.PURE,
            model_id="m",
            revised_plan=plan,
            resolutions=(
                Resolution(
                    conflict_id="x",
                    recommendation=("do",),
                    rationale="",
                    rounds_used=0,
                    mediator_invoked=False,
                    contributing_agents=("gp",),
                ),
            ),
        )
    with pytest.raises(InvariantViolation):
        MdtEntry(conflict_id="x", specialties=("cardiology",), gp_handled=True)
    with pytest.raises(InvariantViolation):
        MdtEntry(conflict_id="x")
    with pytest.raises(InvariantViolation):
        Resolution(
            conflict_id="x",
            recommendation=("do",),
            rationale="",
            rounds_used=0,
            mediator_invoked=True,
            contributing_agents=("gp",),
        )


def test_form_mdt_requires_conflicts(case1):
    from mdtbench.cases import ConflictSet
    from mdtbench.workflow import Consultation

    case, _gold, lexicon = case1
    consultation = Consultation(case, scripted_gateway([])[0], "m1", lexicon=lexicon)
    with pytest.raises(PipelineError):
        consultation.form_mdt(ConflictSet())
