"""Turn case records into training dialogues with built-in verification.

Each case is replayed through the engine with a training-time question
pool: the case's not-yet-revealed implicit symptoms plus one generated
probe (the heaviest unknown symptom of the current leading candidate).
After every round the confidence distribution is verified against the
case target; a round where any other disease reaches the verification
threshold poisons the record.  The bayes backend cannot change its mind,
so such records are discarded outright; an LLM backend gets a bounded
number of rethink prompts (the round is re-run) first.  Only records that
end by diagnosing the target are kept.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from .belief import verify_against_target
from .engine import (Diagnose, DialogueState, SessionConfig, TraceRound, step,
                     trace_round_from_dict, trace_round_to_dict)
from .knowledge import CaseRecord, DiseaseDB
from .retriever import RetrieverModel
from .simeval import simulate_patient_answer

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Turn:
    role: str                      # "patient" | "agent"
    text: str
    round: TraceRound | None = None


@dataclass(frozen=True)
class CoDRecord:
    case_id: str
    turns: tuple[Turn, ...]
    verification: tuple[str, ...]   # per agent round: "valid" | "rethought(n)"
    final_diagnosis: str


@dataclass(frozen=True)
class Discarded:
    case_id: str
    reason: str
    rounds_completed: int = 0


class _RethinkOnce:
    """Backend proxy whose next real assessment uses the rethink prompt.

    The engine assesses the round's actual evidence before scoring any
    inquiry options, so arming the flag right before re-running a round
    applies the rethink prompt to the real assessment only.
    """

    def __init__(self, base):
        self.base = base
        self.arm_rethink = False

    @property
    def kind(self) -> str:
        return self.base.kind

    @property
    def config(self):
        return getattr(self.base, "config", None)

    def assess(self, evidence, candidates, db):
        if self.arm_rethink:
            self.arm_rethink = False
            return self.base.assess(evidence, candidates, db, rethink=True)
        return self.base.assess(evidence, candidates, db)


def _training_pool(case: CaseRecord):
    """Pool policy: remaining implicit symptoms plus one generated probe."""

    def pool_fn(state, db, limit, dist):
        known = set(state.evidence.present) | set(state.evidence.absent) | set(state.asked)
        pool = set(case.implicit) - known
        leader, _ = dist.top()
        for symptom, _ in sorted(db.by_id[leader].symptom_profile,
                                 key=lambda sw: (-sw[1], sw[0])):
            if symptom not in known:
                pool.add(symptom)
                break
        return pool

    return pool_fn


def _max_competitor(dist, target: str) -> float:
    return max((c for d, c in dist.entries.items() if d != target), default=0.0)


def build_cod_record(case: CaseRecord, config: SessionConfig, db: DiseaseDB,
                     model: RetrieverModel, backend, rethink_limit: int = 3,
                     verify_tau: float | None = None) -> CoDRecord | Discarded:
    """Replay one case into a verified training dialogue.

    ``verify_tau`` defaults to the session threshold; pass a different value
    to verify more or less strictly than the dialogue decides.
    """
    tau_v = config.tau if verify_tau is None else verify_tau
    proxy = _RethinkOnce(backend)
    pool_fn = _training_pool(case)

    state = DialogueState()
    rounds: list[TraceRound] = []
    verification: list[str] = []
    opening = "I have " + ", ".join(sorted(case.explicit)) + "."
    turns: list[Turn] = [Turn(role="patient", text=opening)]
    patient_input = {"symptoms": sorted(case.explicit)}

    while True:
        rethinks = 0
        while True:
            trace_round, decision, new_state = step(
                state, patient_input, config, db, model, proxy, pool_fn)
            if verify_against_target(trace_round.confidence, case.target,
                                     tau_v) == "valid":
                break
            if proxy.kind == "llm" and rethinks < rethink_limit:
                rethinks += 1
                proxy.arm_rethink = True    # re-run the round, reassessed
                continue
            competitor = _max_competitor(trace_round.confidence, case.target)
            suffix = f" after {rethinks} rethink(s)" if rethinks else ""
            return Discarded(
                case_id=case.case_id,
                reason=(f"round {trace_round.round}: non-target confidence "
                        f"{competitor:.3f} reached verification threshold "
                        f"{tau_v}{suffix}"),
                rounds_completed=len(rounds),
            )
        verification.append("valid" if rethinks == 0 else f"rethought({rethinks})")
        state = new_state
        rounds.append(trace_round)
        turns.append(_agent_turn(trace_round, db))
        if state.finished:
            break
        answer = simulate_patient_answer(case, decision.symptom)
        turns.append(Turn(role="patient", text=answer))
        patient_input = answer

    final = rounds[-1].decision
    assert isinstance(final, Diagnose)
    if final.disease != case.target:
        kind = "forced diagnosis" if final.forced else "diagnosis"
        return Discarded(
            case_id=case.case_id,
            reason=f"{kind} of '{final.disease}' instead of target '{case.target}'",
            rounds_completed=len(rounds),
        )
    return CoDRecord(
        case_id=case.case_id,
        turns=tuple(turns),
        verification=tuple(verification),
        final_diagnosis=final.disease,
    )


def _agent_turn(trace_round: TraceRound, db: DiseaseDB) -> Turn:
    decision = trace_round.decision
    if isinstance(decision, Diagnose):
        record = db.by_id[decision.disease]
        text = (f"{trace_round.reasoning.text} Diagnosis: {record.name} "
                f"(confidence {decision.confidence:.3f}). "
                f"Recommended management: {record.treatment}")
    else:
        text = f"{trace_round.reasoning.text} {decision.question_text}"
    return Turn(role="agent", text=text, round=trace_round)


# ---------------------------------------------------------------------------
# Export / reload
# ---------------------------------------------------------------------------

def record_to_dict(record: CoDRecord) -> dict:
    return {
        "case_id": record.case_id,
        "turns": [
            {"role": t.role, "text": t.text,
             "round": trace_round_to_dict(t.round) if t.round else None}
            for t in record.turns
        ],
        "verification": list(record.verification),
        "final_diagnosis": record.final_diagnosis,
    }


def record_from_dict(obj: dict) -> CoDRecord:
    return CoDRecord(
        case_id=obj["case_id"],
        turns=tuple(
            Turn(role=t["role"], text=t["text"],
                 round=trace_round_from_dict(t["round"]) if t.get("round") else None)
            for t in obj["turns"]
        ),
        verification=tuple(obj["verification"]),
        final_diagnosis=obj["final_diagnosis"],
    )


def export_training_set(records, path: str | Path) -> int:
    """Write retained records as JSONL; any Discarded in the list is an error."""
    rows = []
    for record in records:
        if isinstance(record, Discarded):
            raise ValueError(
                f"cannot export discarded case '{record.case_id}' ({record.reason})")
        rows.append(json.dumps(record_to_dict(record)))
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(row + "\n")
    return len(rows)


def load_training_set(path: str | Path) -> list[CoDRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(record_from_dict(json.loads(line)))
    return records
