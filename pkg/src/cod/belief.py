"""Confidence assessment over candidate diseases.

Two interchangeable backends produce a (reasoning, confidence distribution)
pair for the current evidence:

* ``BayesBelief`` scores candidates with a smoothed naive-Bayes product over
  present (and optionally absent) symptoms.  Deterministic, fast, and the
  default everywhere tests need exact numbers.
* ``LlmBelief`` (see ``cod.llm``) delegates to an external language-model
  endpoint and repairs whatever distribution comes back.

Distributions are always renormalized over the candidate set only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

from .knowledge import DiseaseDB, DiseaseRecord
from .retriever import CandidateSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SymptomEvidence:
    """What the patient has confirmed (present) and denied (absent)."""
    present: frozenset[str] = frozenset()
    absent: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        overlap = self.present & self.absent
        if overlap:
            raise ValueError(f"symptoms marked both present and absent: {sorted(overlap)}")

    def with_present(self, symptom: str) -> "SymptomEvidence":
        return SymptomEvidence(self.present | {symptom}, self.absent - {symptom})

    def with_absent(self, symptom: str) -> "SymptomEvidence":
        return SymptomEvidence(self.present - {symptom}, self.absent | {symptom})


@dataclass
class ConfidenceDistribution:
    """Probabilities over candidate disease ids; sums to 1."""
    entries: dict[str, float]

    def top(self) -> tuple[str, float]:
        """(disease, confidence) with the highest confidence; ties go to the
        lexicographically smallest id."""
        if not self.entries:
            raise ValueError("empty confidence distribution")
        disease = min(self.entries, key=lambda d: (-self.entries[d], d))
        return disease, self.entries[disease]

    def restricted(self, keep) -> "ConfidenceDistribution":
        """Condition on a subset of candidates (drop the rest, renormalize)."""
        kept = {d: c for d, c in self.entries.items() if d in set(keep)}
        total = sum(kept.values())
        if not kept or total <= 0.0:
            raise ValueError("restriction leaves no probability mass")
        return ConfidenceDistribution({d: c / total for d, c in kept.items()})


@dataclass(frozen=True)
class DiseaseMatch:
    disease: str
    matched: tuple[str, ...]          # present symptoms in the profile
    contradicting: tuple[str, ...]    # denied symptoms the profile expects


@dataclass(frozen=True)
class ReasoningTrace:
    text: str
    per_disease: tuple[DiseaseMatch, ...]


@dataclass(frozen=True)
class BayesConfig:
    smoothing_alpha: float = 0.01
    absent_penalty: bool = True

    def __post_init__(self) -> None:
        if self.smoothing_alpha <= 0.0:
            raise ValueError("smoothing_alpha must be positive")


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str = ""
    model: str = ""
    template_id: str = "confidence"
    timeout: float = 30.0
    max_retries: int = 2
    api_key: str | None = None
    template_dir: str | None = None


@dataclass(frozen=True)
class BeliefBackendConfig:
    kind: Literal["bayes", "llm"] = "bayes"
    bayes: BayesConfig = field(default_factory=BayesConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)


def make_backend(config: BeliefBackendConfig):
    if config.kind == "bayes":
        return BayesBelief(config.bayes)
    if config.kind == "llm":
        from .llm import LlmBelief
        return LlmBelief(config.llm)
    raise ValueError(f"unknown belief backend kind: {config.kind!r}")


def symptom_likelihood(disease: DiseaseRecord, symptom: str, alpha: float) -> float:
    """Smoothed probability that ``symptom`` is present given the disease.

    Profile weight w maps to (w * n + alpha) / (n + 2 * alpha) with n the
    profile size; off-profile symptoms take w = 0.  Always strictly inside
    (0, 1), so both present and absent factors stay well-defined.
    """
    n = len(disease.symptom_profile)
    w = disease.weight(symptom)
    return (w * n + alpha) / (n + 2.0 * alpha)


class BayesBelief:
    """Naive-Bayes confidence over the candidate set with a uniform prior."""

    kind = "bayes"

    def __init__(self, config: BayesConfig = BayesConfig()):
        self.config = config

    def assess(self, evidence: SymptomEvidence, candidates: CandidateSet,
               db: DiseaseDB) -> tuple[ReasoningTrace, ConfidenceDistribution]:
        ids = list(candidates.ids)
        if not ids:
            raise ValueError("cannot assess confidence over an empty candidate set")
        alpha = self.config.smoothing_alpha
        log_scores: dict[str, float] = {}
        for disease_id in ids:
            disease = db.by_id[disease_id]
            score = 0.0
            for s in evidence.present:
                score += math.log(symptom_likelihood(disease, s, alpha))
            if self.config.absent_penalty:
                for s in evidence.absent:
                    score += math.log1p(-symptom_likelihood(disease, s, alpha))
            log_scores[disease_id] = score
        peak = max(log_scores.values())
        raw = {d: math.exp(v - peak) for d, v in log_scores.items()}
        total = sum(raw.values())
        dist = ConfidenceDistribution({d: v / total for d, v in raw.items()})
        return _build_reasoning(evidence, ids, dist, db), dist


def _build_reasoning(evidence: SymptomEvidence, ids: list[str],
                     dist: ConfidenceDistribution, db: DiseaseDB) -> ReasoningTrace:
    matches = []
    for disease_id in ids:
        profile = db.by_id[disease_id].profile_symptoms
        matches.append(DiseaseMatch(
            disease=disease_id,
            matched=tuple(sorted(evidence.present & profile)),
            contradicting=tuple(sorted(evidence.absent & profile)),
        ))
    best_id, best_c = dist.top()
    best = db.by_id[best_id]
    best_match = next(m for m in matches if m.disease == best_id)
    parts = []
    if evidence.present:
        parts.append("Reported symptoms: " + ", ".join(sorted(evidence.present)) + ".")
    if evidence.absent:
        parts.append("Denied symptoms: " + ", ".join(sorted(evidence.absent)) + ".")
    parts.append(
        f"Best match is {best.name}: {len(best_match.matched)} of "
        f"{len(best.symptom_profile)} profile symptoms reported"
        + (f", {len(best_match.contradicting)} denied" if best_match.contradicting else "")
        + f" (confidence {best_c:.3f})."
    )
    return ReasoningTrace(text=" ".join(parts), per_disease=tuple(matches))


def assess_confidence(backend, evidence: SymptomEvidence, candidates: CandidateSet,
                      db: DiseaseDB) -> tuple[ReasoningTrace, ConfidenceDistribution]:
    """Dispatch to the configured backend."""
    return backend.assess(evidence, candidates, db)


def validate_distribution(raw: dict[str, float], candidates) -> ConfidenceDistribution:
    """Repair a raw distribution so it covers exactly the candidate set.

    Extraneous diseases are dropped (with a warning), missing candidates get
    probability 0, and the result is renormalized.  Negative or non-finite
    masses are errors; an all-zero distribution falls back to uniform.
    """
    candidate_ids = list(candidates)
    if not candidate_ids:
        raise ValueError("candidate set is empty")
    extraneous = sorted(set(raw) - set(candidate_ids))
    if extraneous:
        logger.warning("dropping diseases outside the candidate set: %s", extraneous)
    cleaned: dict[str, float] = {}
    for disease_id in candidate_ids:
        value = float(raw.get(disease_id, 0.0))
        if not math.isfinite(value):
            raise ValueError(f"non-finite confidence for '{disease_id}': {value!r}")
        if value < 0.0:
            raise ValueError(f"negative confidence for '{disease_id}': {value!r}")
        cleaned[disease_id] = value
    total = sum(cleaned.values())
    if total <= 0.0:
        logger.warning("distribution carries no mass; falling back to uniform")
        uniform = 1.0 / len(candidate_ids)
        return ConfidenceDistribution({d: uniform for d in candidate_ids})
    return ConfidenceDistribution({d: v / total for d, v in cleaned.items()})


def verify_against_target(dist: ConfidenceDistribution, target: str,
                          tau: float) -> Literal["valid", "erroneous"]:
    """Training-time check: erroneous when any non-target disease reaches tau.

    Note the boundary is inclusive here, unlike the decision rule.
    """
    for disease_id, confidence in dist.entries.items():
        if disease_id != target and confidence >= tau:
            return "erroneous"
    return "valid"
