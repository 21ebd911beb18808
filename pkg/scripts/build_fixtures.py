#!/usr/bin/env python3
"""Regenerates the committed fixture corpus under fixtures/runs/.

Twelve deterministic runs (4 cases x 3 pipelines) driven by scripted agent
replies, then adjudicated: classifications, count overrides where the panel
departed from the mechanical counter, met-goal counts, and Likert ratings
for the multi-agent runs. Timestamps are pinned so regeneration is stable.

Usage: python3 scripts/build_fixtures.py [--dest DIR]
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from mdtbench.corpus import load_builtin
from mdtbench.evaluation import ActionClassification, LikertRecord, TargetKind
from mdtbench.gateway import Gateway, RecordingSession, ScriptedBackend
from mdtbench.runstore import (
    RunWriter,
    append_classifications,
    append_ratings,
    set_consensus_score,
    set_count_overrides,
    set_goal_counts,
    write_metrics,
)
from mdtbench.workflow import PipelineKind, run_pipeline

FIXED_TIME = "2026-08-14T00:00:00+00:00"
MODEL = "demo-model"
ADJUDICATOR = "panel"


def fenced(prose: str, doc: dict) -> str:
    return prose + "\n\n```json\n" + json.dumps(doc, indent=1) + "\n```\n"


def plan_reply(prose, medications, monitoring=()):
    return fenced(prose, {"medications": medications, "monitoring": list(monitoring)})


def goals_reply(prose, goals):
    return fenced(prose, {"goals": goals})


def conflicts_reply(prose, conflicts):
    return fenced(prose, {"conflicts": conflicts})


def mdt_reply(prose, assignments):
    return fenced(prose, {"assignments": assignments})


def statement_reply(position, proposal, stance):
    return fenced(position, {"position": position, "proposal": proposal, "stance": stance})


def direct_reply(prose, recommendation, rationale):
    return fenced(prose, {"recommendation": recommendation, "rationale": rationale})


def mediator_reply(summary, recommendation, rationale):
    return fenced(summary, {"summary": summary, "recommendation": recommendation, "rationale": rationale})


def gold_label(target, label, note=None):
    return ActionClassification(
        target=target, target_kind=TargetKind.GOLD, label=label,
        adjudicator=ADJUDICATOR, note=note,
    )


def other_label(target, label, note=None):
    return ActionClassification(
        target=target, target_kind=TargetKind.OTHER, label=label,
        adjudicator=ADJUDICATOR, note=note,
    )


# --------------------------------------------------------------- case 1

CASE1_GOALS = goals_reply(
    "Three goals stand out for this patient.",
    [
        {"description": "Secondary prevention of ischemic stroke", "medications": ["aspirin"]},
        {"description": "Heal the duodenal ulcer and protect the gastric mucosa", "medications": ["omeprazole"]},
        {"description": "Treat osteoporosis and reduce fracture risk", "medications": []},
    ],
)

CASE1_CONFLICTS = conflicts_reply(
    "Both current drugs clash with a comorbidity.",
    [
        {"kind": "contraindication", "members": ["aspirin", "duodenal ulcer"],
         "description": "Antiplatelet therapy on an active duodenal ulcer raises bleeding risk"},
        {"kind": "contraindication", "members": ["omeprazole", "osteoporosis"],
         "description": "Long-term acid suppression accelerates bone loss"},
    ],
)

CASE1_PURE_PLAN = plan_reply(
    "I would keep the current regimen and add bone protection.",
    [
        {"name": "Aspirin", "action": "continue", "dose": "100 mg", "frequency": "once daily"},
        {"name": "Omeprazole", "action": "continue", "dose": "20 mg", "frequency": "once daily"},
        {"name": "Alendronate", "action": "start", "dose": "70 mg", "frequency": "once weekly"},
    ],
    ["Repeat DXA scan in 2 years"],
)

CASE1_SINGLE_PLAN = plan_reply(
    "Swapping the antiplatelet addresses the ulcer conflict; bone protection is added.",
    [
        {"name": "Clopidogrel", "action": "replace", "replaces": "aspirin",
         "dose": "75 mg", "frequency": "once daily"},
        {"name": "Omeprazole", "action": "continue", "dose": "20 mg", "frequency": "once daily"},
        {"name": "Alendronate", "action": "start", "dose": "70 mg", "frequency": "once weekly"},
    ],
    ["Repeat endoscopy to confirm ulcer healing", "Repeat DXA scan in 2 years"],
)

CASE1_MDT = mdt_reply(
    "The ulcer-antiplatelet tension needs joint input; the bone question can go to one specialist.",
    [
        {"conflict_id": "contra:aspirin@duodenal ulcer",
         "specialties": ["gastroenterology", "neurology"], "within_gp_expertise": False},
        {"conflict_id": "contra:omeprazole@osteoporosis",
         "specialties": ["endocrinology"], "within_gp_expertise": False},
    ],
)

CASE1_FORUM = [
    statement_reply(
        "From the gastroenterology side, the ulcer must drive the choice: clopidogrel is gentler on the duodenum, and acid suppression should continue until healing is confirmed.",
        ["replace aspirin with clopidogrel 75 mg once daily",
         "continue omeprazole until ulcer healing is confirmed"],
        "revise",
    ),
    statement_reply(
        "Neurology agrees the antiplatelet must not stop outright after a TIA; clopidogrel maintains protection. I defer on the acid suppression question.",
        ["replace aspirin with clopidogrel 75 mg once daily"],
        "revise",
    ),
    statement_reply(
        "Converging: clopidogrel switch, and we can commit to stopping omeprazole once healing is confirmed, which also serves the bone problem.",
        ["replace aspirin with clopidogrel 75 mg once daily",
         "discontinue omeprazole after confirmed ulcer healing"],
        "agree",
    ),
    statement_reply(
        "That package protects the brain and the duodenum; I support it as stated.",
        ["replace aspirin with clopidogrel 75 mg once daily",
         "discontinue omeprazole after confirmed ulcer healing"],
        "agree",
    ),
]

CASE1_ENDO = direct_reply(
    "A T-score of -2.8 warrants treatment now, and removing the chronic acid suppression helps bone density.",
    ["start alendronate 70 mg once weekly",
     "discontinue omeprazole after confirmed ulcer healing"],
    "Bisphosphonate therapy is first line at this T-score; prolonged acid suppression works against it.",
)

CASE1_MULTI_PLAN = plan_reply(
    "Integrating the consultations into the final plan.",
    [
        {"name": "Clopidogrel", "action": "replace", "replaces": "aspirin",
         "dose": "75 mg", "frequency": "once daily"},
        {"name": "Omeprazole", "action": "stop", "timing": "after confirmed ulcer healing"},
        {"name": "Alendronate", "action": "start", "dose": "70 mg", "frequency": "once weekly"},
    ],
    ["Confirm ulcer healing endoscopically before stopping acid suppression",
     "Repeat DXA scan in 2 years"],
)

# --------------------------------------------------------------- case 2

CASE2_GOALS = goals_reply(
    "Four management goals.",
    [
        {"description": "Control ventricular rate and restore rhythm control for the new atrial fibrillation",
         "medications": ["diltiazem"]},
        {"description": "Provide stroke prevention appropriate for atrial fibrillation with renal impairment",
         "medications": []},
        {"description": "Maintain blood pressure control without worsening renal function",
         "medications": ["lisinopril", "diltiazem", "hydrochlorothiazide"]},
        {"description": "Continue lipid management", "medications": ["atorvastatin"]},
    ],
)

CASE2_CONFLICTS = conflicts_reply(
    "One major conflict: the antiplatelet is no longer the right stroke-prevention strategy.",
    [
        {"kind": "contraindication", "members": ["aspirin", "atrial fibrillation"],
         "description": "Aspirin alone is insufficient for stroke prevention at CHA2DS2-VASc 3"},
    ],
)

CASE2_SHARED_MEDS = [
    {"name": "Apixaban", "action": "replace", "replaces": "aspirin",
     "dose": "5 mg", "frequency": "twice daily"},
    {"name": "Lisinopril", "action": "continue", "dose": "20 mg", "frequency": "once daily"},
    {"name": "Diltiazem", "action": "continue", "dose": "180 mg", "frequency": "once daily"},
    {"name": "Hydrochlorothiazide", "action": "continue", "dose": "25 mg", "frequency": "once daily"},
    {"name": "Atorvastatin", "action": "continue", "dose": "40 mg", "frequency": "once nightly"},
]

CASE2_PURE_PLAN = plan_reply(
    "Anticoagulate instead of aspirin; the antihypertensive regimen already covers rate control.",
    CASE2_SHARED_MEDS,
    ["Renal function panel in 3 months"],
)

CASE2_SINGLE_PLAN = plan_reply(
    "Anticoagulation replaces aspirin, and a rhythm agent is added for the paroxysmal episodes.",
    CASE2_SHARED_MEDS
    + [{"name": "Propafenone", "action": "start", "dose": "150 mg", "frequency": "three times daily"}],
    ["Renal function and ECG follow-up in 3 months"],
)

CASE2_MDT = mdt_reply(
    "Anticoagulant selection in stage 3 kidney disease needs cardiology and nephrology together.",
    [
        {"conflict_id": "contra:aspirin@atrial fibrillation",
         "specialties": ["cardiology", "nephrology"], "within_gp_expertise": False},
    ],
)

CASE2_CARDIO = statement_reply(
    "Standard-dose apixaban is the best-evidenced option at this eGFR and bleeding profile.",
    ["replace aspirin with apixaban 5 mg twice daily"],
    "agree",
)
CASE2_NEPHRO_EARLY = statement_reply(
    "With eGFR trending down I prefer an agent we can titrate against INR; warfarin keeps options open.",
    ["replace aspirin with warfarin dosed to an inr of 2 to 3"],
    "revise",
)
CASE2_NEPHRO_LATE = statement_reply(
    "If a DOAC is chosen it should be the reduced dose given the renal trajectory.",
    ["replace aspirin with apixaban 2.5 mg twice daily"],
    "agree",
)

CASE2_MEDIATOR = mediator_reply(
    "Cardiology holds that standard-dose apixaban fits the trial evidence at eGFR 44; nephrology first argued for warfarin's titratability, then conceded a DOAC but at the reduced dose out of renal caution.",
    ["replace aspirin with apixaban 5 mg twice daily",
     "recheck renal function in 3 months and revisit the dose"],
    "Only one dose-reduction criterion is met, so the standard dose is indicated; a dated renal recheck addresses the nephrology concern.",
)

CASE2_MULTI_PLAN = plan_reply(
    "Adopting the mediated recommendation; the rest of the regimen stands.",
    CASE2_SHARED_MEDS,
    ["Renal function panel in 3 months"],
)

# --------------------------------------------------------------- case 3

CASE3_GOALS = goals_reply(
    "Three goals: anticoagulation, infection, safety.",
    [
        {"description": "Maintain therapeutic anticoagulation with INR between 2 and 3", "medications": ["warfarin"]},
        {"description": "Treat the urinary tract infection effectively", "medications": ["trimethoprim-sulfamethoxazole"]},
        {"description": "Avoid bleeding complications from anticoagulant potentiation", "medications": []},
    ],
)

CASE3_CONFLICTS = conflicts_reply(
    "The antibiotic choice potentiates warfarin.",
    [
        {"kind": "ddi", "members": ["warfarin", "TMP/SMX"],
         "description": "Sulfamethoxazole inhibits warfarin metabolism and displaces it from albumin; INR rises within days"},
    ],
)

CASE3_PURE_PLAN = plan_reply(
    "Keep both drugs but blunt the interaction with a dose reduction.",
    [
        {"name": "Warfarin", "action": "adjust", "dose": "4 mg", "frequency": "once daily",
         "rationale": "reduce the dose about 15 percent during the antibiotic course"},
        {"name": "Trimethoprim-sulfamethoxazole", "action": "continue",
         "dose": "160/800 mg", "frequency": "twice daily for 7 days"},
    ],
    ["Check INR within two weeks"],
)

CASE3_SINGLE_PLAN = plan_reply(
    "Switching the antibiotic avoids the interaction entirely.",
    [
        {"name": "Warfarin", "action": "continue", "dose": "5 mg", "frequency": "once daily"},
        {"name": "Nitrofurantoin", "action": "replace", "replaces": "trimethoprim-sulfamethoxazole",
         "dose": "100 mg", "frequency": "twice daily", "timing": "five-day course"},
    ],
    ["INR every 4 weeks"],
)

CASE3_MDT = mdt_reply(
    "One interaction, one discipline: clinical pharmacology can settle it.",
    [
        {"conflict_id": "ddi:trimethoprim-sulfamethoxazole+warfarin",
         "specialties": ["clinical pharmacology"], "within_gp_expertise": False},
    ],
)

CASE3_PHARM = direct_reply(
    "For an uncomplicated lower urinary tract infection there is a clean substitution available.",
    ["switch the antibiotic from trimethoprim-sulfamethoxazole to nitrofurantoin 100 mg twice daily for five days",
     "keep warfarin at the current maintenance dose"],
    "Nitrofurantoin does not perturb warfarin metabolism, so the INR regime stays stable without dose gymnastics.",
)

CASE3_MULTI_PLAN = plan_reply(
    "Adopting the substitution recommended in consultation.",
    [
        {"name": "Warfarin", "action": "continue", "dose": "5 mg", "frequency": "once daily"},
        {"name": "Nitrofurantoin", "action": "replace", "replaces": "trimethoprim-sulfamethoxazole",
         "dose": "100 mg", "frequency": "twice daily", "timing": "five-day course"},
    ],
    ["INR at the next routine visit, then every 4 weeks"],
)

# --------------------------------------------------------------- case 4

CASE4_GOALS = goals_reply(
    "The perioperative window defines four goals.",
    [
        {"description": "Prevent stent thrombosis throughout the perioperative period",
         "medications": ["aspirin", "clopidogrel"]},
        {"description": "Enable safe urgent thoracic surgery with acceptable bleeding risk", "medications": []},
        {"description": "Maintain baseline antiplatelet protection without interruption", "medications": ["aspirin"]},
        {"description": "Restore full dual antiplatelet therapy promptly after surgery", "medications": []},
    ],
)

CASE4_CONFLICTS_SINGLE = conflicts_reply(
    "The P2Y12 inhibitor cannot run into a thoracotomy.",
    [
        {"kind": "contraindication", "members": ["clopidogrel", "urgent thoracic surgery"],
         "description": "P2Y12 inhibition within five days of thoracotomy raises major bleeding risk"},
    ],
)

CASE4_CONFLICTS_MULTI = conflicts_reply(
    "Both antiplatelets interact with the planned surgery, to different degrees.",
    [
        {"kind": "contraindication", "members": ["clopidogrel", "urgent thoracic surgery"],
         "description": "P2Y12 inhibition within five days of thoracotomy raises major bleeding risk"},
        {"kind": "contraindication", "members": ["aspirin", "urgent thoracic surgery"],
         "description": "Aspirin adds surgical bleeding risk, though it is usually maintained"},
    ],
)

CASE4_PURE_PLAN = plan_reply(
    "Hold the P2Y12 inhibitor for surgery and keep aspirin.",
    [
        {"name": "Aspirin", "action": "continue", "dose": "100 mg", "frequency": "once daily"},
        {"name": "Clopidogrel", "action": "stop", "timing": "5 days before surgery"},
    ],
    ["Postoperative cardiology review"],
)

CASE4_BRIDGE_MEDS = [
    {"name": "Aspirin", "action": "continue", "dose": "100 mg", "frequency": "once daily"},
    {"name": "Clopidogrel", "action": "adjust",
     "timing": "suspend 5 days before surgery; restart within 24 hours after surgery",
     "dose": "300 mg loading dose on restart, then 75 mg once daily",
     "rationale": "staged suspension keeps the stent covered while clearing platelet inhibition for surgery"},
    {"name": "Tirofiban", "action": "bridge",
     "timing": "start 48 hours after the last clopidogrel dose; stop 4 to 6 hours before incision",
     "dose": "0.1 microgram/kg/min infusion"},
]

CASE4_SINGLE_PLAN = plan_reply(
    "A short-acting intravenous bridge covers the suspension window.",
    CASE4_BRIDGE_MEDS,
    ["Platelet count daily during bridging"],
)

CASE4_MDT = mdt_reply(
    "The bridging question needs cardiology and anesthesiology; the aspirin question I can settle myself.",
    [
        {"conflict_id": "contra:clopidogrel@urgent thoracic surgery",
         "specialties": ["cardiology", "anesthesiology"], "within_gp_expertise": False},
        {"conflict_id": "contra:aspirin@urgent thoracic surgery",
         "specialties": [], "within_gp_expertise": True},
    ],
)

CASE4_PROPOSAL = [
    "suspend clopidogrel 5 days before surgery",
    "bridge with intravenous tirofiban starting 48 hours after the last clopidogrel dose",
    "stop the tirofiban infusion 4 to 6 hours before incision",
    "restart clopidogrel within 24 hours after surgery with a 300 mg loading dose",
]

CASE4_FORUM = [
    statement_reply(
        "Three months after a drug-eluting stent the thrombosis risk is too high for bare interruption; a tirofiban bridge is the standard answer.",
        CASE4_PROPOSAL,
        "agree",
    ),
    statement_reply(
        "From the anesthesia side that schedule gives a clean operative field by incision time; I support it unchanged.",
        CASE4_PROPOSAL,
        "agree",
    ),
]

CASE4_GP_DIRECT = direct_reply(
    "Aspirin monotherapy through surgery is the accepted baseline for stented patients.",
    ["maintain aspirin 100 mg once daily without interruption through the perioperative period"],
    "Baseline antiplatelet protection outweighs its modest contribution to surgical bleeding.",
)

CASE4_MULTI_PLAN = plan_reply(
    "Integrating the bridging schedule and keeping aspirin uninterrupted.",
    CASE4_BRIDGE_MEDS,
    ["Platelet count daily during bridging", "Cardiology review before discharge"],
)


# ----------------------------------------------------------- adjudication

CLASSIFICATIONS = {
    ("case1", "pure"): [
        gold_label("P1", "omission"),
        gold_label("P2", "omission"),
        gold_label("P3", "omission", "Alendronate was started, but the panel credited the plan against option set 1 and scored other sets as omissions."),
        gold_label("O1a", "exact_match"),
        gold_label("O1b", "exact_match"),
        gold_label("O2a", "omission"),
        gold_label("O2b", "omission"),
        other_label("gen:alendronate-start", "fp_correct", "Clinically sound bone protection outside the credited option set."),
    ],
    ("case1", "single_agent"): [
        gold_label("P1", "exact_match"),
        gold_label("P2", "omission"),
        gold_label("P3", "exact_match"),
        gold_label("O1a", "omission"),
        gold_label("O1b", "omission"),
        gold_label("O2a", "omission"),
        gold_label("O2b", "omission"),
        other_label("gen:omeprazole-continue", "fp_wrong", "Kept long-term acid suppression despite osteoporosis; the credited set stops it after healing."),
    ],
    ("case1", "multi_agent"): [
        gold_label("P1", "exact_match"),
        gold_label("P2", "exact_match"),
        gold_label("P3", "exact_match"),
        gold_label("O1a", "omission"),
        gold_label("O1b", "omission"),
        gold_label("O2a", "omission"),
        gold_label("O2b", "omission"),
    ],
    ("case2", "pure"): [
        gold_label("A1", "exact_match"),
        gold_label("A2", "omission"),
        gold_label("A3", "omission"),
        gold_label("A4", "exact_match"),
        gold_label("A5", "exact_match"),
        gold_label("A6", "exact_match"),
    ],
    ("case2", "single_agent"): [
        gold_label("A1", "exact_match"),
        gold_label("A2", "exact_match"),
        gold_label("A3", "omission"),
        gold_label("A4", "exact_match"),
        gold_label("A5", "exact_match"),
        gold_label("A6", "exact_match"),
    ],
    ("case2", "multi_agent"): [
        gold_label("A1", "exact_match"),
        gold_label("A2", "omission"),
        gold_label("A3", "omission"),
        gold_label("A4", "exact_match"),
        gold_label("A5", "exact_match"),
        gold_label("A6", "exact_match"),
    ],
    ("case3", "pure"): [
        gold_label("V1", "exact_match"),
        gold_label("V2", "imprecise", "An INR check is promised but the timing is vaguer than day 3 to 5."),
        gold_label("V3", "omission"),
        gold_label("V4", "exact_match"),
        gold_label("V5", "omission"),
    ],
    ("case3", "single_agent"): [
        gold_label("V1", "alternative_correct", "Chose the listed interaction-avoiding antibiotic switch."),
        gold_label("V2", "omission"),
        gold_label("V3", "exact_match"),
        gold_label("V4", "alternative_correct"),
        gold_label("V5", "exact_match"),
    ],
    ("case3", "multi_agent"): [
        gold_label("V1", "alternative_correct", "Chose the listed interaction-avoiding antibiotic switch."),
        gold_label("V2", "omission"),
        gold_label("V3", "exact_match"),
        gold_label("V4", "alternative_correct"),
        gold_label("V5", "exact_match"),
    ],
    ("case4", "pure"): [
        gold_label("S1", "exact_match"),
        gold_label("S2", "omission"),
        gold_label("S3", "omission"),
        gold_label("S4", "omission"),
        gold_label("S5", "omission"),
        gold_label("S6", "exact_match"),
    ],
    ("case4", "single_agent"): [
        gold_label("S1", "exact_match"),
        gold_label("S2", "exact_match"),
        gold_label("S3", "exact_match"),
        gold_label("S4", "exact_match"),
        gold_label("S5", "exact_match"),
        gold_label("S6", "exact_match"),
    ],
    ("case4", "multi_agent"): [
        gold_label("S1", "exact_match"),
        gold_label("S2", "exact_match"),
        gold_label("S3", "exact_match"),
        gold_label("S4", "exact_match"),
        gold_label("S5", "exact_match"),
        gold_label("S6", "exact_match"),
    ],
}

COUNT_OVERRIDES = {
    ("case1", "pure"): (
        {"contraindication_revised": 1},
        "Panel kept the aspirin-ulcer contraindication but judged the acid-suppression conflict mitigated once bone treatment started.",
    ),
    ("case4", "single_agent"): (
        {"contraindication_revised": 0},
        "Panel judged the staged suspension schedule resolves the perioperative contraindication even though clopidogrel stays on the plan.",
    ),
    ("case4", "multi_agent"): (
        {"contraindication_revised": 0},
        "Panel judged the staged suspension schedule resolves the perioperative contraindication even though clopidogrel stays on the plan.",
    ),
}

GOAL_COUNTS = {
    ("case1", "pure"): ((2, 3), (2, 2)),
    ("case1", "single_agent"): ((2, 3), (3, 3)),
    ("case1", "multi_agent"): ((2, 3), (3, 3)),
    ("case2", "pure"): ((2, 4), (3, 4)),
    ("case2", "single_agent"): ((2, 4), (4, 4)),
    ("case2", "multi_agent"): ((2, 4), (3, 4)),
    ("case3", "pure"): ((2, 3), (2, 3)),
    ("case3", "single_agent"): ((2, 3), (3, 3)),
    ("case3", "multi_agent"): ((2, 3), (3, 3)),
    ("case4", "pure"): ((2, 4), (2, 4)),
    ("case4", "single_agent"): ((2, 4), (4, 4)),
    ("case4", "multi_agent"): ((2, 4), (4, 4)),
}

RATINGS = {
    ("case1", "multi_agent"): {
        "explainability": [("rater-a", 3), ("rater-b", 3), ("rater-c", 4)],
        "reasonableness": [("rater-a", 4), ("rater-b", 4), ("rater-c", 5)],
        "efficiency": [("rater-a", 4), ("rater-b", 4), ("rater-c", 4)],
    },
    ("case2", "multi_agent"): {
        "explainability": [("rater-a", 5), ("rater-b", 5), ("rater-c", 5), ("rater-d", 5)],
        "reasonableness": [("rater-a", 4), ("rater-b", 5), ("rater-c", 4), ("rater-d", 4)],
        "efficiency": [("rater-a", 3), ("rater-b", 4), ("rater-c", 3), ("rater-d", 3)],
    },
    ("case3", "multi_agent"): {
        "explainability": [("rater-a", 4), ("rater-b", 4), ("rater-c", 4)],
        "reasonableness": [("rater-a", 5), ("rater-b", 4), ("rater-c", 4)],
        "efficiency": [("rater-a", 5), ("rater-b", 5), ("rater-c", 4)],
    },
    ("case4", "multi_agent"): {
        "explainability": [("rater-a", 4), ("rater-b", 4), ("rater-c", 5)],
        "reasonableness": [("rater-a", 2), ("rater-b", 4)],
        "efficiency": [("rater-a", 4), ("rater-b", 5), ("rater-c", 4)],
    },
}

CONSENSUS_SCORES = {
    ("case4", "multi_agent"): {"reasonableness": 3.5},
}

SCRIPTS = {
    ("case1", "pure"): [CASE1_PURE_PLAN],
    ("case1", "single_agent"): [CASE1_GOALS, CASE1_CONFLICTS, CASE1_SINGLE_PLAN],
    ("case1", "multi_agent"): [CASE1_GOALS, CASE1_CONFLICTS, CASE1_MDT,
                               *CASE1_FORUM, CASE1_ENDO, CASE1_MULTI_PLAN],
    ("case2", "pure"): [CASE2_PURE_PLAN],
    ("case2", "single_agent"): [CASE2_GOALS, CASE2_CONFLICTS, CASE2_SINGLE_PLAN],
    ("case2", "multi_agent"): [CASE2_GOALS, CASE2_CONFLICTS, CASE2_MDT,
                               CASE2_CARDIO, CASE2_NEPHRO_EARLY,
                               CASE2_CARDIO, CASE2_NEPHRO_EARLY,
                               CASE2_CARDIO, CASE2_NEPHRO_EARLY,
                               CASE2_CARDIO, CASE2_NEPHRO_LATE,
                               CASE2_CARDIO, CASE2_NEPHRO_LATE,
                               CASE2_MEDIATOR, CASE2_MULTI_PLAN],
    ("case3", "pure"): [CASE3_PURE_PLAN],
    ("case3", "single_agent"): [CASE3_GOALS, CASE3_CONFLICTS, CASE3_SINGLE_PLAN],
    ("case3", "multi_agent"): [CASE3_GOALS, CASE3_CONFLICTS, CASE3_MDT,
                               CASE3_PHARM, CASE3_MULTI_PLAN],
    ("case4", "pure"): [CASE4_PURE_PLAN],
    ("case4", "single_agent"): [CASE4_GOALS, CASE4_CONFLICTS_SINGLE, CASE4_SINGLE_PLAN],
    ("case4", "multi_agent"): [CASE4_GOALS, CASE4_CONFLICTS_MULTI, CASE4_MDT,
                               *CASE4_FORUM, CASE4_GP_DIRECT, CASE4_MULTI_PLAN],
}


def build_run(dest: Path, case_id: str, pipeline: PipelineKind) -> Path:
    case, gold, lexicon = load_builtin(case_id)
    run_id = f"{case_id}-{pipeline.value}-{MODEL}"
    out_dir = dest / run_id
    writer = RunWriter(out_dir)
    session = RecordingSession(run_id, writer.transcript_path)
    backend = ScriptedBackend(list(SCRIPTS[(case_id, pipeline.value)]))
    gateway = Gateway(backend, session)
    record = run_pipeline(case, pipeline, gateway, model_id=MODEL, run_id=run_id, lexicon=lexicon)
    session.close()
    run_dir = writer.finalize(record, case, gold, lexicon)

    append_classifications(run_dir, CLASSIFICATIONS[(case_id, pipeline.value)], now=FIXED_TIME)
    overrides = COUNT_OVERRIDES.get((case_id, pipeline.value))
    if overrides:
        set_count_overrides(run_dir, overrides[0], overrides[1], now=FIXED_TIME)
    original, revised = GOAL_COUNTS[(case_id, pipeline.value)]
    set_goal_counts(run_dir, original, revised, now=FIXED_TIME)
    write_metrics(run_dir)

    ratings = RATINGS.get((case_id, pipeline.value))
    if ratings:
        for dimension, scores in ratings.items():
            append_ratings(
                run_dir,
                [LikertRecord(rater=r, dimension=dimension, score=s) for r, s in scores],
                now=FIXED_TIME,
            )
        for dimension, score in CONSENSUS_SCORES.get((case_id, pipeline.value), {}).items():
            set_consensus_score(run_dir, dimension, score, now=FIXED_TIME)
    return run_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--dest",
        default=str(Path(__file__).resolve().parents[1] / "fixtures" / "runs"),
        help="target directory for the fixture runs",
    )
    args = parser.parse_args(argv)
    dest = Path(args.dest)
    if dest.exists():
        shutil.rmtree(dest)
    dest.mkdir(parents=True)
    for case_id in ("case1", "case2", "case3", "case4"):
        for pipeline in (PipelineKind.PURE, PipelineKind.SINGLE_AGENT, PipelineKind.MULTI_AGENT):
            run_dir = build_run(dest, case_id, pipeline)
            print(f"built {run_dir.name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
