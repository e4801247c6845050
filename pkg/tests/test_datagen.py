"""Verified training dialogues: retention, rethinks, discards, export."""

import pytest

from cod.belief import (BayesBelief, ConfidenceDistribution, SymptomEvidence,
                        verify_against_target)
from cod.datagen import (
    CoDRecord,
    Discarded,
    _training_pool,
    build_cod_record,
    export_training_set,
    load_training_set,
)
from cod.engine import DialogueState, SessionConfig
from cod.knowledge import CaseRecord, DiseaseDB
from cod.retriever import init_model
from tests.conftest import make_disease


@pytest.fixture
def toy_model(toy_db):
    return init_model(toy_db, dim=8, seed=0)


@pytest.fixture
def pair_model(pair_db):
    return init_model(pair_db, dim=8, seed=0)


def case(case_id, target, explicit, implicit=()):
    return CaseRecord(case_id, target, frozenset(explicit), frozenset(implicit))


class SkewedUntilRethink:
    """LLM-shaped fake: reports a wrong leader until asked to rethink."""

    kind = "llm"

    def __init__(self, rival: str, target: str, heal_on_rethink: bool = True):
        self.rival = rival
        self.target = target
        self.heal_on_rethink = heal_on_rethink
        self.honest = BayesBelief()
        self.poisoned = True

    def assess(self, evidence, candidates, db, rethink: bool = False):
        if rethink and self.heal_on_rethink:
            self.poisoned = False
        reasoning, dist = self.honest.assess(evidence, candidates, db)
        if not self.poisoned:
            return reasoning, dist
        skewed = {d: 0.1 / (len(dist.entries) - 1) for d in dist.entries}
        skewed[self.rival] = 0.9
        return reasoning, ConfidenceDistribution(skewed)


# ---------------------------------------------------------------------------
# retention and discards
# ---------------------------------------------------------------------------

def test_single_round_case_is_retained(pair_db, pair_model, bayes_backend):
    record = build_cod_record(case("c", "apnea", {"snoring"}),
                              SessionConfig(tau=0.5), pair_db, pair_model,
                              bayes_backend)
    assert isinstance(record, CoDRecord)
    assert record.final_diagnosis == "apnea"
    assert record.verification == ("valid",)
    assert [t.role for t in record.turns] == ["patient", "agent"]
    assert record.turns[0].text == "I have snoring."
    assert record.turns[0].round is None
    assert "Diagnosis: Apnea" in record.turns[1].text
    assert "apnea treatment" in record.turns[1].text
    assert record.turns[1].round.round == 1


def test_multi_round_case_records_question_turns(toy_db, toy_model, bayes_backend):
    record = build_cod_record(case("c", "flu", {"cough"}, {"fever"}),
                              SessionConfig(tau=0.6), toy_db, toy_model,
                              bayes_backend)
    assert isinstance(record, CoDRecord)
    assert [t.role for t in record.turns] == ["patient", "agent", "patient", "agent"]
    assert "Do you have fever?" in record.turns[1].text
    assert record.turns[2].text == "yes"
    assert record.verification == ("valid", "valid")
    assert record.final_diagnosis == "flu"


def test_poisoned_round_discards_bayes_record(pair_db, pair_model, bayes_backend):
    # evidence points at apnea while the record claims gout: the non-target
    # crosses the verification threshold in round 1 and bayes cannot rethink
    result = build_cod_record(case("c", "gout", {"snoring"}),
                              SessionConfig(tau=0.5), pair_db, pair_model,
                              bayes_backend)
    assert isinstance(result, Discarded)
    assert result.rounds_completed == 0
    assert "round 1" in result.reason
    assert "0.99" in result.reason
    assert "threshold 0.5" in result.reason
    assert "rethink" not in result.reason


def test_wrong_final_diagnosis_is_discarded(toy_db, toy_model, bayes_backend):
    # verification at 1.0 never trips, but the forced best guess lands on a
    # competitor, so the finished record still gets thrown away
    result = build_cod_record(case("c", "allergy", {"cough"}),
                              SessionConfig(tau=1.0), toy_db, toy_model,
                              bayes_backend, verify_tau=1.0)
    assert isinstance(result, Discarded)
    assert "forced diagnosis of 'cold'" in result.reason
    assert "target 'allergy'" in result.reason
    assert result.rounds_completed == 3


# ---------------------------------------------------------------------------
# rethinks (LLM-backed generation)
# ---------------------------------------------------------------------------

def test_rethink_repairs_the_round(pair_db, pair_model):
    backend = SkewedUntilRethink(rival="gout", target="apnea")
    record = build_cod_record(case("c", "apnea", {"snoring"}),
                              SessionConfig(tau=0.5), pair_db, pair_model, backend)
    assert isinstance(record, CoDRecord)
    assert record.verification == ("rethought(1)",)
    assert record.final_diagnosis == "apnea"
    # the healed assessment is the one kept in the trace
    kept = record.turns[1].round.confidence.entries
    assert kept["apnea"] == pytest.approx(1.81 / 1.82, rel=1e-9)


def test_rethink_budget_exhaustion(pair_db, pair_model):
    backend = SkewedUntilRethink(rival="gout", target="apnea", heal_on_rethink=False)
    result = build_cod_record(case("c", "apnea", {"snoring"}),
                              SessionConfig(tau=0.5), pair_db, pair_model, backend,
                              rethink_limit=2)
    assert isinstance(result, Discarded)
    assert "after 2 rethink(s)" in result.reason


def test_rethink_limit_zero_discards_immediately(pair_db, pair_model):
    backend = SkewedUntilRethink(rival="gout", target="apnea")
    result = build_cod_record(case("c", "apnea", {"snoring"}),
                              SessionConfig(tau=0.5), pair_db, pair_model, backend,
                              rethink_limit=0)
    assert isinstance(result, Discarded)
    assert "rethink(s)" not in result.reason


# ---------------------------------------------------------------------------
# question pool policy
# ---------------------------------------------------------------------------

def test_pool_serves_remaining_implicit_symptoms(pair_db, bayes_backend):
    c = case("c", "apnea", {"snoring"}, {"daytime sleepiness"})
    state = DialogueState(evidence=SymptomEvidence(present=frozenset({"snoring"})))
    dist = ConfidenceDistribution({"apnea": 0.99, "gout": 0.01})
    pool = _training_pool(c)(state, pair_db, 16, dist)
    assert pool == {"daytime sleepiness"}


def test_pool_probe_follows_the_leader():
    db = DiseaseDB((
        make_disease("d1", [("zebra", 0.7), ("apple", 0.7)]),
        make_disease("d2", [("mango", 0.7)]),
    ))
    c = case("c", "d1", {"known"})
    state = DialogueState()
    dist = ConfidenceDistribution({"d1": 0.6, "d2": 0.4})
    # no implicit symptoms left: the probe is the leader's heaviest unknown,
    # ties broken alphabetically
    assert _training_pool(c)(state, db, 16, dist) == {"apple"}
    flipped = ConfidenceDistribution({"d1": 0.4, "d2": 0.6})
    assert _training_pool(c)(state, db, 16, flipped) == {"mango"}


# ---------------------------------------------------------------------------
# export / reload
# ---------------------------------------------------------------------------

def test_export_reload_round_trip(tmp_path, pair_db, pair_model, bayes_backend):
    config = SessionConfig(tau=0.5)
    records = [
        build_cod_record(case("a", "apnea", {"snoring"}), config, pair_db,
                         pair_model, bayes_backend),
        build_cod_record(case("b", "gout", {"toe pain"}), config, pair_db,
                         pair_model, bayes_backend),
    ]
    assert all(isinstance(r, CoDRecord) for r in records)
    path = tmp_path / "cod_train.jsonl"
    assert export_training_set(records, path) == 2
    reloaded = load_training_set(path)
    assert reloaded == records


def test_export_rejects_discarded(tmp_path):
    bad = Discarded(case_id="c", reason="round 1: poisoned")
    with pytest.raises(ValueError, match="cannot export discarded case 'c'"):
        export_training_set([bad], tmp_path / "out.jsonl")


def test_exported_rounds_stay_sound(tmp_path, pair_db, pair_model, bayes_backend):
    config = SessionConfig(tau=0.5)
    records = [
        build_cod_record(case("a", "apnea", {"snoring"}, {"daytime sleepiness"}),
                         config, pair_db, pair_model, bayes_backend),
        build_cod_record(case("b", "gout", {"joint swelling"}, {"toe pain"}),
                         config, pair_db, pair_model, bayes_backend),
    ]
    assert all(isinstance(r, CoDRecord) for r in records)
    path = tmp_path / "cod_train.jsonl"
    export_training_set(records, path)
    by_id = {"a": "apnea", "b": "gout"}
    for record in load_training_set(path):
        target = by_id[record.case_id]
        assert record.final_diagnosis == target
        for turn in record.turns:
            if turn.round is not None:
                assert verify_against_target(turn.round.confidence, target,
                                             config.tau) == "valid"
