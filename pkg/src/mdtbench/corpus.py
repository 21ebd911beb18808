"""Access to the four benchmark cases shipped with the package.

Each case bundles a patient record, a clinician-curated gold standard of one
or more acceptable option sets, and a conflict lexicon (known interacting
drug pairs, known drug-condition contraindications, and a synonym map).
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .cases import (
    ConflictLexicon,
    GoldStandard,
    PatientCase,
    load_case,
    load_gold,
    load_lexicon,
)
from .errors import NotFound

DATA_PACKAGE = "mdtbench.data"

BUILTIN_CASE_IDS = ("case1", "case2", "case3", "case4")


def _data_path(kind: str, case_id: str) -> Path:
    root = resources.files(DATA_PACKAGE)
    candidate = root / kind / f"{case_id}.json"
    with resources.as_file(candidate) as concrete:
        if not concrete.exists():
            raise NotFound(f"no builtin {kind} document for {case_id!r}")
        return concrete


def builtin_case_ids() -> tuple[str, ...]:
    return BUILTIN_CASE_IDS


def load_builtin_lexicon(case_id: str) -> ConflictLexicon:
    return load_lexicon(_data_path("lexicons", case_id))


def load_builtin_case(case_id: str) -> PatientCase:
    return load_case(_data_path("cases", case_id), lexicon=load_builtin_lexicon(case_id))


def load_builtin_gold(case_id: str) -> GoldStandard:
    return load_gold(_data_path("gold", case_id))


def load_builtin(case_id: str) -> tuple[PatientCase, GoldStandard, ConflictLexicon]:
    lexicon = load_builtin_lexicon(case_id)
    case = load_case(_data_path("cases", case_id), lexicon=lexicon)
    gold = load_gold(_data_path("gold", case_id))
    return case, gold, lexicon
