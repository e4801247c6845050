"""Disease catalog, patient case records, and the synthetic case generator.

The catalog is a flat list of diseases, each carrying a weighted symptom
profile.  Weights express how strongly a symptom is associated with the
disease and must lie in (0, 1].  Case records pair a target disease with
two disjoint symptom sets: ``explicit`` symptoms the patient volunteers
up front and ``implicit`` symptoms they only confirm when asked.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

GENDER_TAGS = ("female", "male", "any")
AGE_TAGS = ("child", "young adult", "adult", "middle-aged", "elderly")

# Explicit-set sizes cycle through this pattern; the 3 is a floor, the
# actual size of every fifth case is drawn from {3, 4}.
_EXPLICIT_QUOTA = (1, 1, 2, 2, 3)


class DiseaseDBError(ValueError):
    """A catalog or case file violates its schema."""


def normalize_symptom(raw: str) -> str:
    """Canonical symptom token: lowercased, trimmed, inner whitespace collapsed.

    Idempotent; raises ValueError if nothing is left after normalization.
    """
    token = " ".join(str(raw).lower().split())
    if not token:
        raise ValueError("symptom token is empty after normalization")
    return token


@dataclass(frozen=True)
class Demographics:
    gender: str
    age: str


@dataclass(frozen=True)
class DiseaseRecord:
    id: str
    name: str
    overview: str
    treatment: str
    department: str
    symptom_profile: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("disease id must be non-empty")
        if not self.symptom_profile:
            raise ValueError(f"disease '{self.id}' has an empty symptom profile")
        seen: set[str] = set()
        for symptom, weight in self.symptom_profile:
            if symptom != " ".join(symptom.lower().split()) or not symptom:
                raise ValueError(
                    f"disease '{self.id}' symptom {symptom!r} is not normalized"
                )
            if symptom in seen:
                raise ValueError(
                    f"duplicate symptom '{symptom}' in profile of disease '{self.id}'"
                )
            seen.add(symptom)
            if not (isinstance(weight, (int, float)) and 0.0 < weight <= 1.0):
                raise ValueError(
                    f"weight out of range for disease '{self.id}' "
                    f"symptom '{symptom}': {weight!r} (must be in (0, 1])"
                )

    @cached_property
    def profile_symptoms(self) -> frozenset[str]:
        return frozenset(s for s, _ in self.symptom_profile)

    def weight(self, symptom: str) -> float:
        """Profile weight of ``symptom``, 0.0 when it is not in the profile."""
        for s, w in self.symptom_profile:
            if s == symptom:
                return w
        return 0.0


@dataclass(frozen=True)
class DiseaseDB:
    diseases: tuple[DiseaseRecord, ...]

    def __post_init__(self) -> None:
        if not self.diseases:
            raise ValueError("disease catalog is empty")
        seen: set[str] = set()
        for record in self.diseases:
            if record.id in seen:
                raise ValueError(f"duplicate disease id '{record.id}'")
            seen.add(record.id)

    @cached_property
    def by_id(self) -> dict[str, DiseaseRecord]:
        return {d.id: d for d in self.diseases}

    @cached_property
    def symptom_vocab(self) -> tuple[str, ...]:
        """Union of all profile symptoms, sorted."""
        vocab: set[str] = set()
        for d in self.diseases:
            vocab.update(d.profile_symptoms)
        return tuple(sorted(vocab))

    @cached_property
    def fingerprint(self) -> str:
        """Hash binding retriever models to this catalog's ids and vocab."""
        payload = json.dumps(
            {"diseases": [d.id for d in self.diseases], "vocab": list(self.symptom_vocab)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self.diseases)


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    target: str
    explicit: frozenset[str]
    implicit: frozenset[str]
    demographics: Demographics | None = None

    def __post_init__(self) -> None:
        if not self.explicit:
            raise ValueError(f"case '{self.case_id}' has no explicit symptoms")
        overlap = self.explicit & self.implicit
        if overlap:
            raise ValueError(
                f"case '{self.case_id}' lists {sorted(overlap)} as both "
                "explicit and implicit"
            )

    @property
    def all_symptoms(self) -> frozenset[str]:
        return self.explicit | self.implicit


def validate_case_against_db(case: CaseRecord, db: DiseaseDB) -> None:
    if case.target not in db.by_id:
        raise DiseaseDBError(f"case '{case.case_id}' targets unknown disease '{case.target}'")
    vocab = set(db.symptom_vocab)
    unknown = sorted((case.explicit | case.implicit) - vocab)
    if unknown:
        raise DiseaseDBError(
            f"case '{case.case_id}' uses symptoms outside the catalog vocabulary: {unknown}"
        )


# ---------------------------------------------------------------------------
# JSONL persistence
# ---------------------------------------------------------------------------

def _record_from_dict(obj: dict) -> DiseaseRecord:
    symptoms = obj["symptoms"]
    if not isinstance(symptoms, list):
        raise ValueError("'symptoms' must be a list of {s, w} objects")
    profile = []
    for entry in symptoms:
        profile.append((normalize_symptom(entry["s"]), float(entry["w"])))
    return DiseaseRecord(
        id=str(obj["id"]),
        name=str(obj["name"]),
        overview=str(obj.get("overview", "")),
        treatment=str(obj.get("treatment", "")),
        department=str(obj.get("department", "")),
        symptom_profile=tuple(profile),
    )


def load_disease_db(path: str | Path) -> DiseaseDB:
    """Load a catalog from JSONL; schema errors carry the offending line number."""
    records: list[DiseaseRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DiseaseDBError(f"{path}: line {lineno}: invalid JSON ({exc})") from exc
            try:
                records.append(_record_from_dict(obj))
            except (KeyError, TypeError, ValueError) as exc:
                detail = exc if not isinstance(exc, KeyError) else f"missing field {exc}"
                raise DiseaseDBError(f"{path}: line {lineno}: {detail}") from exc
    try:
        return DiseaseDB(tuple(records))
    except ValueError as exc:
        raise DiseaseDBError(f"{path}: {exc}") from exc


def save_disease_db(db: DiseaseDB, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in db.diseases:
            fh.write(json.dumps({
                "id": d.id,
                "name": d.name,
                "overview": d.overview,
                "treatment": d.treatment,
                "department": d.department,
                "symptoms": [{"s": s, "w": w} for s, w in d.symptom_profile],
            }) + "\n")


def case_to_dict(case: CaseRecord) -> dict:
    return {
        "case_id": case.case_id,
        "target": case.target,
        "explicit": sorted(case.explicit),
        "implicit": sorted(case.implicit),
        "demographics": (
            {"gender": case.demographics.gender, "age": case.demographics.age}
            if case.demographics else None
        ),
    }


def case_from_dict(obj: dict) -> CaseRecord:
    demo = obj.get("demographics")
    return CaseRecord(
        case_id=str(obj["case_id"]),
        target=str(obj["target"]),
        explicit=frozenset(normalize_symptom(s) for s in obj["explicit"]),
        implicit=frozenset(normalize_symptom(s) for s in obj["implicit"]),
        demographics=Demographics(str(demo["gender"]), str(demo["age"])) if demo else None,
    )


def load_cases(path: str | Path, db: DiseaseDB | None = None) -> list[CaseRecord]:
    cases: list[CaseRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                case = case_from_dict(json.loads(line))
            except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                raise DiseaseDBError(f"{path}: line {lineno}: {exc}") from exc
            if db is not None:
                validate_case_against_db(case, db)
            cases.append(case)
    return cases


def save_cases(cases: list[CaseRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps(case_to_dict(case)) + "\n")


# ---------------------------------------------------------------------------
# Synthesis
# ---------------------------------------------------------------------------

def _weighted_sample(rng: np.random.Generator,
                     weighted: list[tuple[str, float]], k: int) -> list[str]:
    """Draw k items without replacement, each draw proportional to weight."""
    pool = list(weighted)
    picked: list[str] = []
    for _ in range(min(k, len(pool))):
        total = sum(w for _, w in pool)
        r = float(rng.random()) * total
        acc = 0.0
        chosen = len(pool) - 1
        for idx, (_, w) in enumerate(pool):
            acc += w
            if r < acc:
                chosen = idx
                break
        picked.append(pool.pop(chosen)[0])
    return picked


def synthesize_cases(db: DiseaseDB, per_disease: int = 5, seed: int = 0) -> list[CaseRecord]:
    """Generate seeded synthetic cases for every disease in catalog order.

    Per five cases of a disease: two expose a single explicit symptom, two
    expose two, and one exposes at least three.  Explicit symptoms are drawn
    weight-proportionally without replacement; implicit symptoms fill in 2-4
    of the remaining profile symptoms (fewer only when the profile runs out).
    Diseases whose profile has fewer than two symptoms are skipped.
    """
    if per_disease < 1:
        raise ValueError(f"per_disease must be >= 1, got {per_disease}")
    rng = np.random.default_rng(seed)
    cases: list[CaseRecord] = []
    for disease in db.diseases:
        profile = list(disease.symptom_profile)
        if len(profile) < 2:
            logger.warning(
                "skipping disease '%s': profile has %d symptom(s), need at least 2",
                disease.id, len(profile),
            )
            continue
        demographics = Demographics(
            gender=GENDER_TAGS[int(rng.integers(len(GENDER_TAGS)))],
            age=AGE_TAGS[int(rng.integers(len(AGE_TAGS)))],
        )
        for j in range(per_disease):
            base = _EXPLICIT_QUOTA[j % len(_EXPLICIT_QUOTA)]
            size = base if base < 3 else int(rng.integers(3, 5))
            size = min(size, len(profile))
            explicit = _weighted_sample(rng, profile, size)
            taken = set(explicit)
            remaining = [(s, w) for s, w in profile if s not in taken]
            implicit_count = min(int(rng.integers(2, 5)), len(remaining))
            implicit = _weighted_sample(rng, remaining, implicit_count)
            cases.append(CaseRecord(
                case_id=f"{disease.id}-s{seed}-{j + 1:02d}",
                target=disease.id,
                explicit=frozenset(explicit),
                implicit=frozenset(implicit),
                demographics=demographics,
            ))
    return cases


def split_cases(cases: list[CaseRecord], eval_fraction: float,
                seed: int = 0) -> tuple[list[CaseRecord], list[CaseRecord]]:
    """Deterministic (train, eval) partition; eval gets round(fraction * N) cases."""
    if not cases:
        raise ValueError("no cases to split")
    if not 0.0 < eval_fraction < 1.0:
        raise ValueError(f"eval_fraction must be in (0, 1), got {eval_fraction}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(cases))
    n_eval = int(round(eval_fraction * len(cases)))
    eval_idx = {int(i) for i in order[:n_eval]}
    train = [c for i, c in enumerate(cases) if i not in eval_idx]
    held_out = [c for i, c in enumerate(cases) if i in eval_idx]
    return train, held_out
