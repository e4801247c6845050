"""Shared fixtures: a tiny hand-built catalog plus the bundled demo pipeline."""

import pytest

# test_acceptance.py appends one "PASS/FAIL  <criterion>: <detail>" line per
# acceptance check; the summary hook below prints them after the test table
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from cod import (
    BayesConfig,
    BeliefBackendConfig,
    TrainConfig,
    demo_disease_db,
    make_backend,
    synthesize_cases,
    train_retriever,
)
from cod.knowledge import DiseaseDB, DiseaseRecord


def make_disease(disease_id: str, profile, department: str = "general",
                 name: str | None = None) -> DiseaseRecord:
    """Compact DiseaseRecord builder for tests; profile is [(symptom, weight)]."""
    return DiseaseRecord(
        id=disease_id,
        name=name or disease_id.replace("-", " ").title(),
        overview=f"{disease_id} overview",
        treatment=f"{disease_id} treatment",
        department=department,
        symptom_profile=tuple(profile),
    )


@pytest.fixture
def toy_db() -> DiseaseDB:
    # 3 diseases over a 4-symptom vocabulary
    return DiseaseDB((
        make_disease("allergy", [("sneezing", 0.9), ("rash", 0.4)]),
        make_disease("cold", [("cough", 0.8), ("sneezing", 0.6)]),
        make_disease("flu", [("fever", 0.9), ("cough", 0.7)]),
    ))


@pytest.fixture
def pair_db() -> DiseaseDB:
    # fully separable two-disease catalog
    return DiseaseDB((
        make_disease("apnea", [("snoring", 0.9), ("daytime sleepiness", 0.6)]),
        make_disease("gout", [("toe pain", 0.9), ("joint swelling", 0.6)]),
    ))


@pytest.fixture
def bayes_backend():
    return make_backend(BeliefBackendConfig(kind="bayes", bayes=BayesConfig()))


@pytest.fixture(scope="session")
def demo_db():
    return demo_disease_db()


@pytest.fixture(scope="session")
def demo_cases(demo_db):
    return synthesize_cases(demo_db, per_disease=5, seed=1)


@pytest.fixture(scope="session")
def demo_model(demo_db, demo_cases):
    return train_retriever(demo_db, demo_cases, TrainConfig()).model
