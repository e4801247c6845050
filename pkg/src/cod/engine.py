"""Dialogue engine: one assessment round per patient message.

Each round abstracts the patient's input into canonical symptoms, recalls
candidate diseases, asks the belief backend for a confidence distribution,
and then either commits to a diagnosis (confidence strictly above the
threshold) or picks the question whose answer is expected to shrink the
distribution's entropy the most.  A round cap forces a best-guess diagnosis
so sessions always terminate.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Literal

from .belief import (ConfidenceDistribution, ReasoningTrace, SymptomEvidence,
                     assess_confidence, symptom_likelihood)
from .knowledge import DiseaseDB, normalize_symptom
from .retriever import CandidateSet, RetrieverModel, recall_top_k

EntropyMode = Literal["present-only", "expected"]

QUESTION_TEMPLATE = "Do you have {symptom}?"


class NoSymptomsError(ValueError):
    """Opening message contained no recognizable symptom."""


class ProtocolError(RuntimeError):
    """Message arrived out of turn (e.g. an answer with no open question)."""


class SessionFinished(RuntimeError):
    """The session already ended in a diagnosis."""


@dataclass(frozen=True)
class SessionConfig:
    tau: float = 0.5
    max_rounds: int = 5
    k: int = 5
    entropy_mode: EntropyMode = "present-only"
    rerecall_each_round: bool = True
    candidate_pool_limit: int = 16

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        if self.max_rounds < 0:
            raise ValueError(f"max_rounds must be >= 0, got {self.max_rounds}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.entropy_mode not in ("present-only", "expected"):
            raise ValueError(f"unknown entropy mode: {self.entropy_mode!r}")
        if self.candidate_pool_limit < 1:
            raise ValueError("candidate_pool_limit must be >= 1")


@dataclass(frozen=True)
class Inquire:
    symptom: str | None
    question_text: str = ""
    entropy_reduction: float | None = None


@dataclass(frozen=True)
class Diagnose:
    disease: str
    confidence: float
    forced: bool = False


Decision = Inquire | Diagnose


@dataclass
class DialogueState:
    evidence: SymptomEvidence = field(default_factory=SymptomEvidence)
    candidates: CandidateSet | None = None
    asked: tuple[str, ...] = ()
    pending: str | None = None      # question issued, answer not yet received
    round: int = 0
    finished: bool = False


@dataclass(frozen=True)
class CandidateSnippet:
    """What the dialogue knows about one recalled disease."""
    id: str
    name: str
    score: float
    overview: str
    symptoms: tuple[str, ...]


@dataclass(frozen=True)
class TraceRound:
    round: int
    abstracted_symptoms: tuple[str, ...]     # all confirmed-present, sorted
    candidates: tuple[CandidateSnippet, ...]
    reasoning: ReasoningTrace
    confidence: ConfidenceDistribution
    entropy: float
    decision: Decision
    warnings: tuple[str, ...] = ()


def entropy(dist: ConfidenceDistribution) -> float:
    """Shannon entropy in nats; zero-probability entries contribute nothing."""
    return float(-sum(c * math.log(c) for c in dist.entries.values() if c > 0.0))


def decide(dist: ConfidenceDistribution, tau: float) -> Decision:
    """Diagnose the argmax only when its confidence strictly exceeds tau.

    Confidence exactly at tau keeps the dialogue asking.  Argmax ties break
    toward the lexicographically smallest disease id.  The Inquire returned
    here is a placeholder; the caller fills in the selected symptom.
    """
    disease, confidence = dist.top()
    if confidence > tau:
        return Diagnose(disease=disease, confidence=confidence)
    return Inquire(symptom=None)


def abstract_symptoms(message, vocab) -> set[str]:
    """Canonical symptom tokens from a structured or free-text message.

    Structured messages ({"symptoms": [...]}) are normalized verbatim; free
    text is scanned greedily against the vocabulary, longest match first, so
    multi-word symptoms win over their prefixes.
    """
    if isinstance(message, dict):
        if "symptoms" not in message:
            raise ValueError("structured message must carry a 'symptoms' list")
        tokens: set[str] = set()
        for raw in message["symptoms"]:
            text = " ".join(str(raw).lower().split())
            if text:
                tokens.add(text)
        return tokens
    if not isinstance(message, str):
        raise ValueError(f"unsupported message type: {type(message).__name__}")

    words = re.findall(r"[a-z0-9]+", message.lower())
    by_first: dict[str, list[tuple[str, ...]]] = {}
    for token in vocab:
        parts = tuple(token.split())
        by_first.setdefault(parts[0], []).append(parts)
    for options in by_first.values():
        options.sort(key=len, reverse=True)

    found: set[str] = set()
    i = 0
    while i < len(words):
        advanced = False
        for parts in by_first.get(words[i], ()):  # longest first
            if tuple(words[i:i + len(parts)]) == parts:
                found.add(" ".join(parts))
                i += len(parts)
                advanced = True
                break
        if not advanced:
            i += 1
    return found


def candidate_symptom_pool(state: DialogueState, db: DiseaseDB,
                           limit: int, dist: ConfidenceDistribution | None = None) -> set[str]:
    """Unasked, unknown symptoms across all candidate profiles.

    Truncated to ``limit`` by descending max profile weight (ties by token),
    so the most telling symptoms survive.  An empty result means there is
    nothing informative left to ask.
    """
    if state.candidates is None:
        raise ValueError("no candidates recalled yet")
    known = set(state.evidence.present) | set(state.evidence.absent) | set(state.asked)
    if state.pending:
        known.add(state.pending)
    best_weight: dict[str, float] = {}
    for disease_id in state.candidates.ids:
        for symptom, weight in db.by_id[disease_id].symptom_profile:
            if symptom in known:
                continue
            if weight > best_weight.get(symptom, 0.0):
                best_weight[symptom] = weight
    ranked = sorted(best_weight, key=lambda s: (-best_weight[s], s))
    return set(ranked[:limit])


def _hypothetical_entropy(backend, evidence: SymptomEvidence, candidates: CandidateSet,
                          db: DiseaseDB) -> float:
    _, dist = assess_confidence(backend, evidence, candidates, db)
    return entropy(dist)


def _p_yes(dist: ConfidenceDistribution, symptom: str, db: DiseaseDB, alpha: float) -> float:
    """Chance the patient confirms ``symptom`` under the current belief."""
    return sum(c * symptom_likelihood(db.by_id[d], symptom, alpha)
               for d, c in dist.entries.items())


def select_inquiry(state: DialogueState, dist: ConfidenceDistribution, pool: set[str],
                   backend, db: DiseaseDB,
                   mode: EntropyMode = "present-only") -> tuple[str, float]:
    """Pick the pool symptom with the lowest post-answer entropy.

    ``present-only`` scores each symptom by the entropy after assuming a yes;
    ``expected`` mixes the yes and no outcomes by the model's own chance of a
    yes.  Returns (symptom, entropy reduction); the reduction may be negative.
    Ties break toward the lexicographically smallest token.
    """
    if not pool:
        raise ValueError("cannot select an inquiry from an empty pool")
    if state.candidates is None:
        raise ValueError("no candidates recalled yet")
    alpha = getattr(getattr(backend, "config", None), "smoothing_alpha", 0.01)
    best_symptom: str | None = None
    best_h = math.inf
    for symptom in sorted(pool):
        h_yes = _hypothetical_entropy(
            backend, state.evidence.with_present(symptom), state.candidates, db)
        if mode == "present-only":
            h = h_yes
        else:
            h_no = _hypothetical_entropy(
                backend, state.evidence.with_absent(symptom), state.candidates, db)
            p = _p_yes(dist, symptom, db, alpha)
            h = p * h_yes + (1.0 - p) * h_no
        if h < best_h:
            best_h = h
            best_symptom = symptom
    return best_symptom, entropy(dist) - best_h


def _parse_answer(message) -> bool:
    if isinstance(message, dict):
        message = message.get("answer", "")
    if isinstance(message, str):
        token = message.strip().lower()
        if token == "yes":
            return True
        if token == "no":
            return False
    raise ValueError(f"answer must be 'yes' or 'no', got {message!r}")


def step(state: DialogueState, patient_input, config: SessionConfig, db: DiseaseDB,
         model: RetrieverModel, backend,
         pool_fn: Callable | None = None) -> tuple[TraceRound, Decision, DialogueState]:
    """Run one dialogue round and return (trace round, decision, new state).

    The input state is never mutated; if anything raises (backend failure,
    malformed input) the caller's state remains usable.
    """
    if state.finished:
        raise SessionFinished("session already ended in a diagnosis")

    warnings: list[str] = []
    asked = state.asked
    pending = state.pending

    if state.round == 0:
        tokens = abstract_symptoms(patient_input, db.symptom_vocab)
        recognized = tokens & set(db.symptom_vocab)
        if not recognized:
            raise NoSymptomsError("no recognizable symptoms in the opening message")
        ignored = tokens - recognized
        if ignored:
            warnings.append("unrecognized symptoms ignored for retrieval: "
                            + ", ".join(sorted(ignored)))
        evidence = SymptomEvidence(present=frozenset(tokens))
    else:
        if pending is None:
            raise ProtocolError("no question is outstanding")
        says_yes = _parse_answer(patient_input)
        evidence = (state.evidence.with_present(pending) if says_yes
                    else state.evidence.with_absent(pending))
        asked = asked + (pending,)
        pending = None

    candidates = state.candidates
    if candidates is None or config.rerecall_each_round:
        if model.vocab_fingerprint != db.fingerprint:
            raise ValueError("retriever model is bound to a different disease catalog")
        query = evidence.present & set(db.symptom_vocab)
        candidates = recall_top_k(model, query, config.k)

    reasoning, dist = assess_confidence(backend, evidence, candidates, db)
    round_entropy = entropy(dist)

    new_state = DialogueState(
        evidence=evidence,
        candidates=candidates,
        asked=asked,
        pending=None,
        round=state.round + 1,
        finished=False,
    )

    decision = decide(dist, config.tau)
    if isinstance(decision, Inquire):
        forced_reason = None
        if len(asked) >= config.max_rounds:
            forced_reason = "round cap reached"
        else:
            pool_builder = pool_fn or candidate_symptom_pool
            pool = pool_builder(new_state, db, config.candidate_pool_limit, dist)
            if not pool:
                forced_reason = "no informative questions left"
        if forced_reason:
            top_disease, top_confidence = dist.top()
            decision = Diagnose(disease=top_disease, confidence=top_confidence,
                                forced=True)
            warnings.append(f"forced diagnosis: {forced_reason}")
        else:
            symptom, reduction = select_inquiry(
                new_state, dist, pool, backend, db, config.entropy_mode)
            decision = Inquire(
                symptom=symptom,
                question_text=QUESTION_TEMPLATE.format(symptom=symptom),
                entropy_reduction=reduction,
            )
            new_state.pending = symptom

    if isinstance(decision, Diagnose):
        new_state.finished = True

    snippets = tuple(
        CandidateSnippet(
            id=disease_id,
            name=db.by_id[disease_id].name,
            score=score,
            overview=db.by_id[disease_id].overview,
            symptoms=tuple(s for s, _ in db.by_id[disease_id].symptom_profile),
        )
        for disease_id, score in candidates.entries
    )
    trace_round = TraceRound(
        round=new_state.round,
        abstracted_symptoms=tuple(sorted(evidence.present)),
        candidates=snippets,
        reasoning=reasoning,
        confidence=dist,
        entropy=round_entropy,
        decision=decision,
        warnings=tuple(warnings),
    )
    return trace_round, decision, new_state


class Session:
    """Single-owner dialogue wrapper accumulating the full trace."""

    def __init__(self, db: DiseaseDB, model: RetrieverModel, config: SessionConfig,
                 backend, pool_fn: Callable | None = None):
        self.db = db
        self.model = model
        self.config = config
        self.backend = backend
        self.pool_fn = pool_fn
        self.state = DialogueState()
        self.trace: list[TraceRound] = []

    @property
    def finished(self) -> bool:
        return self.state.finished

    @property
    def last_decision(self) -> Decision | None:
        return self.trace[-1].decision if self.trace else None

    def _advance(self, patient_input) -> TraceRound:
        trace_round, _, new_state = step(
            self.state, patient_input, self.config, self.db, self.model,
            self.backend, self.pool_fn)
        self.state = new_state
        self.trace.append(trace_round)
        return trace_round

    def start(self, message) -> TraceRound:
        if self.state.round != 0:
            raise ProtocolError("session already started")
        return self._advance(message)

    def answer(self, message) -> TraceRound:
        if self.state.round == 0:
            raise ProtocolError("session has not started yet")
        return self._advance(message)


# ---------------------------------------------------------------------------
# Trace (de)serialization: one JSON object per round.
# ---------------------------------------------------------------------------

def decision_to_dict(decision: Decision) -> dict:
    if isinstance(decision, Diagnose):
        return {"kind": "diagnose", "disease": decision.disease,
                "confidence": decision.confidence, "forced": decision.forced}
    return {"kind": "inquire", "symptom": decision.symptom,
            "question": decision.question_text,
            "entropy_reduction": decision.entropy_reduction}


def decision_from_dict(obj: dict) -> Decision:
    if obj["kind"] == "diagnose":
        return Diagnose(disease=obj["disease"], confidence=float(obj["confidence"]),
                        forced=bool(obj.get("forced", False)))
    if obj["kind"] == "inquire":
        reduction = obj.get("entropy_reduction")
        return Inquire(symptom=obj.get("symptom"),
                       question_text=obj.get("question", ""),
                       entropy_reduction=None if reduction is None else float(reduction))
    raise ValueError(f"unknown decision kind: {obj.get('kind')!r}")


def trace_round_to_dict(trace_round: TraceRound) -> dict:
    return {
        "round": trace_round.round,
        "abstracted_symptoms": list(trace_round.abstracted_symptoms),
        "candidates": [
            {"id": c.id, "name": c.name, "score": c.score,
             "overview": c.overview, "symptoms": list(c.symptoms)}
            for c in trace_round.candidates
        ],
        "reasoning": {
            "text": trace_round.reasoning.text,
            "per_disease": [
                {"disease": m.disease, "matched": list(m.matched),
                 "contradicting": list(m.contradicting)}
                for m in trace_round.reasoning.per_disease
            ],
        },
        "confidence": dict(trace_round.confidence.entries),
        "entropy": trace_round.entropy,
        "decision": decision_to_dict(trace_round.decision),
        "warnings": list(trace_round.warnings),
    }


def trace_round_from_dict(obj: dict) -> TraceRound:
    from .belief import DiseaseMatch

    return TraceRound(
        round=int(obj["round"]),
        abstracted_symptoms=tuple(obj["abstracted_symptoms"]),
        candidates=tuple(
            CandidateSnippet(id=c["id"], name=c["name"], score=float(c["score"]),
                             overview=c.get("overview", ""),
                             symptoms=tuple(c.get("symptoms", ())))
            for c in obj["candidates"]
        ),
        reasoning=ReasoningTrace(
            text=obj["reasoning"]["text"],
            per_disease=tuple(
                DiseaseMatch(disease=m["disease"], matched=tuple(m["matched"]),
                             contradicting=tuple(m["contradicting"]))
                for m in obj["reasoning"]["per_disease"]
            ),
        ),
        confidence=ConfidenceDistribution(
            {d: float(c) for d, c in obj["confidence"].items()}),
        entropy=float(obj["entropy"]),
        decision=decision_from_dict(obj["decision"]),
        warnings=tuple(obj.get("warnings", ())),
    )


def write_trace_jsonl(rounds, path: str | Path, case_id: str | None = None) -> None:
    """Append rounds to a JSONL trace file; ``case_id`` tags each line."""
    with open(path, "a", encoding="utf-8") as fh:
        for trace_round in rounds:
            obj = trace_round_to_dict(trace_round)
            if case_id is not None:
                obj["case_id"] = case_id
            fh.write(json.dumps(obj) + "\n")
