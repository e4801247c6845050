"""Simulated-patient benchmark: run cases end to end and aggregate metrics.

The simulated patient answers strictly from the case record: yes when the
asked symptom is among the case's explicit or implicit symptoms, otherwise
no.  Accuracy and mean inquiry counts are averaged per seed and the spread
across seeds becomes the standard error.
"""

from __future__ import annotations

import logging
import math
import statistics
from dataclasses import dataclass, replace

from .belief import SymptomEvidence, assess_confidence
from .engine import (Diagnose, Session, SessionConfig, TraceRound, entropy)
from .knowledge import CaseRecord, DiseaseDB
from .retriever import RetrieverModel, recall_top_k

logger = logging.getLogger(__name__)

DEFAULT_SEEDS = (1, 2, 3, 4, 5)


@dataclass(frozen=True)
class SessionResult:
    case_id: str
    diagnosed: str
    correct: bool
    inquiries: int
    forced: bool
    per_round_entropy: tuple[float, ...]
    final_confidence: float
    rounds: tuple[TraceRound, ...] = ()


@dataclass(frozen=True)
class EvalReport:
    n_cases: int
    accuracy: float
    mean_inquiries: float
    diagnosis_rate: float                     # sessions that crossed tau unforced
    entropy_by_round: tuple[float, ...]       # mean over sessions active that round
    per_seed: tuple[tuple[int, float, float], ...]   # (seed, accuracy, mean inquiries)
    stderr_accuracy: float
    stderr_inquiries: float


@dataclass(frozen=True)
class CurvePoint:
    tau: float
    diagnosis_rate: float
    accuracy: float | None    # None when nothing crosses the threshold


def simulate_patient_answer(case: CaseRecord, symptom: str) -> str:
    """Yes exactly when the canonical symptom is in the case's symptom sets."""
    return "yes" if symptom in case.all_symptoms else "no"


def run_dialogue(case: CaseRecord, config: SessionConfig, db: DiseaseDB,
                 model: RetrieverModel, backend) -> SessionResult:
    """Open with the explicit symptoms, answer questions until a diagnosis."""
    session = Session(db, model, config, backend)
    trace_round = session.start({"symptoms": sorted(case.explicit)})
    while not session.finished:
        question = trace_round.decision.symptom
        trace_round = session.answer(simulate_patient_answer(case, question))
    decision = session.trace[-1].decision
    assert isinstance(decision, Diagnose)
    return SessionResult(
        case_id=case.case_id,
        diagnosed=decision.disease,
        correct=decision.disease == case.target,
        inquiries=len(session.state.asked),
        forced=decision.forced,
        per_round_entropy=tuple(r.entropy for r in session.trace),
        final_confidence=decision.confidence,
        rounds=tuple(session.trace),
    )


def _stderr(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    return statistics.stdev(values) / math.sqrt(len(values))


def _entropy_by_round(all_results: list[SessionResult], max_rounds: int) -> tuple[float, ...]:
    """Mean entropy per round over the sessions still active at that round."""
    means: list[float] = []
    for index in range(max_rounds):
        active = [r.per_round_entropy[index] for r in all_results
                  if len(r.per_round_entropy) > index]
        if not active:
            break
        means.append(sum(active) / len(active))
    return tuple(means)


def run_benchmark(cases: list[CaseRecord], config: SessionConfig, db: DiseaseDB,
                  model: RetrieverModel, backend,
                  seeds=DEFAULT_SEEDS) -> EvalReport:
    """Benchmark every case once per seed and aggregate.

    The engine with the bayes backend is deterministic, so per-seed rows
    then coincide and the standard errors collapse to zero; the seed loop
    matters for stochastic backends.
    """
    if not cases:
        raise ValueError("no cases to benchmark")
    if not seeds:
        raise ValueError("need at least one seed")
    per_seed: list[tuple[int, float, float]] = []
    pooled: list[SessionResult] = []
    for seed in seeds:
        results = [run_dialogue(case, config, db, model, backend) for case in cases]
        accuracy = sum(r.correct for r in results) / len(results)
        mean_inquiries = sum(r.inquiries for r in results) / len(results)
        per_seed.append((seed, accuracy, mean_inquiries))
        pooled.extend(results)
    accuracies = [a for _, a, _ in per_seed]
    inquiry_means = [n for _, _, n in per_seed]
    return EvalReport(
        n_cases=len(cases),
        accuracy=sum(accuracies) / len(accuracies),
        mean_inquiries=sum(inquiry_means) / len(inquiry_means),
        diagnosis_rate=sum(not r.forced for r in pooled) / len(pooled),
        entropy_by_round=_entropy_by_round(pooled, config.max_rounds),
        per_seed=tuple(per_seed),
        stderr_accuracy=_stderr(accuracies),
        stderr_inquiries=_stderr(inquiry_means),
    )


def sweep_tau(cases: list[CaseRecord], config: SessionConfig, db: DiseaseDB,
              model: RetrieverModel, backend, taus,
              seeds=DEFAULT_SEEDS) -> list[tuple[float, EvalReport]]:
    """run_benchmark once per threshold; taus must be sorted ascending."""
    taus = list(taus)
    if not taus:
        raise ValueError("no thresholds to sweep")
    if taus != sorted(taus):
        raise ValueError("thresholds must be sorted ascending")
    rows = []
    for tau in taus:
        cfg = replace(config, tau=tau)
        rows.append((tau, run_benchmark(cases, cfg, db, model, backend, seeds)))
    return rows


def threshold_curve(cases: list[CaseRecord], config: SessionConfig, db: DiseaseDB,
                    model: RetrieverModel, backend, taus) -> list[CurvePoint]:
    """Diagnosis rate and accuracy when all symptoms are known up front.

    Every case is assessed once with its full symptom set (no questions);
    each threshold then reads off the fraction of cases whose top confidence
    strictly exceeds it, and the accuracy among those.
    """
    if not cases:
        raise ValueError("no cases to evaluate")
    assessed: list[tuple[float, bool]] = []
    for case in cases:
        candidates = recall_top_k(model, case.all_symptoms, config.k, db=db)
        evidence = SymptomEvidence(present=case.all_symptoms)
        _, dist = assess_confidence(backend, evidence, candidates, db)
        top_disease, top_confidence = dist.top()
        assessed.append((top_confidence, top_disease == case.target))
    points = []
    for tau in taus:
        crossing = [(c, ok) for c, ok in assessed if c > tau]
        rate = len(crossing) / len(assessed)
        accuracy = (sum(ok for _, ok in crossing) / len(crossing)) if crossing else None
        points.append(CurvePoint(tau=float(tau), diagnosis_rate=rate, accuracy=accuracy))
    return points
