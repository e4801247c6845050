"""Diagnostic dialogue toolkit: catalog, retriever, belief, engine, benchmark."""

from .belief import (BayesBelief, BayesConfig, BeliefBackendConfig,
                     ConfidenceDistribution, LlmConfig, ReasoningTrace,
                     SymptomEvidence, assess_confidence, make_backend,
                     validate_distribution, verify_against_target)
from .demo import demo_disease_db
from .engine import (Decision, Diagnose, DialogueState, Inquire, Session,
                     SessionConfig, TraceRound, abstract_symptoms,
                     candidate_symptom_pool, decide, entropy, select_inquiry, step)
from .knowledge import (CaseRecord, Demographics, DiseaseDB, DiseaseDBError,
                        DiseaseRecord, load_cases, load_disease_db,
                        normalize_symptom, save_cases, save_disease_db,
                        split_cases, synthesize_cases)
from .retriever import (CandidateSet, RetrieverEvalReport, RetrieverModel,
                        TrainConfig, TrainResult, encode_symptoms, eval_retriever,
                        load_model, recall_top_k, save_model, train_retriever)
from .simeval import (CurvePoint, EvalReport, SessionResult, run_benchmark,
                      run_dialogue, simulate_patient_answer, sweep_tau,
                      threshold_curve)

__version__ = "0.1.0"
