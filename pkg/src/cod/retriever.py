"""Embedding-table retriever that maps symptom sets to candidate diseases.

Two free embedding tables (symptoms and diseases) are trained with a
softmax contrastive loss over the full catalog: for each case, raise the
cosine similarity between the encoded symptom set and the target disease
relative to every other disease.  Queries are encoded as the L2-normalized
mean of the member symptom vectors; recall is an exact cosine scan.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .knowledge import CaseRecord, DiseaseDB

logger = logging.getLogger(__name__)

_MAGIC = "cod-retriever"
_FORMAT_VERSION = 1


class FingerprintMismatchError(ValueError):
    """Model file was trained against a different catalog."""


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass
class RetrieverModel:
    dim: int
    symptom_tokens: tuple[str, ...]      # sorted vocabulary order
    disease_ids: tuple[str, ...]         # catalog order
    symptom_vectors: np.ndarray          # (len(symptom_tokens), dim)
    disease_vectors: np.ndarray          # (len(disease_ids), dim)
    vocab_fingerprint: str

    def __post_init__(self) -> None:
        if self.symptom_vectors.shape != (len(self.symptom_tokens), self.dim):
            raise ValueError("symptom vector table has the wrong shape")
        if self.disease_vectors.shape != (len(self.disease_ids), self.dim):
            raise ValueError("disease vector table has the wrong shape")

    @property
    def symptom_index(self) -> dict[str, int]:
        if not hasattr(self, "_symptom_index"):
            self._symptom_index = {t: i for i, t in enumerate(self.symptom_tokens)}
        return self._symptom_index

    @property
    def disease_index(self) -> dict[str, int]:
        if not hasattr(self, "_disease_index"):
            self._disease_index = {d: i for i, d in enumerate(self.disease_ids)}
        return self._disease_index


@dataclass(frozen=True)
class CandidateSet:
    """Top-k recall result: (disease_id, cosine score) pairs, best first."""
    entries: tuple[tuple[str, float], ...]
    k: int

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(d for d, _ in self.entries)


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 64
    epochs: int = 200
    learning_rate: float = 0.05
    seed: int = 1


@dataclass
class TrainResult:
    model: RetrieverModel
    loss_history: list[float]   # mean loss before each epoch's update, plus final

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1]


@dataclass(frozen=True)
class RetrieverEvalReport:
    n_cases: int
    mrr_at_100: float
    recall_at: dict[int, float]   # k -> fraction of cases with target rank <= k

    RECALL_KS = (3, 5, 10, 30, 50, 100)


def init_model(db: DiseaseDB, dim: int, seed: int) -> RetrieverModel:
    """Fresh model with small random vectors, bound to the catalog."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    tokens = db.symptom_vocab
    ids = tuple(d.id for d in db.diseases)
    return RetrieverModel(
        dim=dim,
        symptom_tokens=tokens,
        disease_ids=ids,
        symptom_vectors=rng.standard_normal((len(tokens), dim)) * 0.1,
        disease_vectors=rng.standard_normal((len(ids), dim)) * 0.1,
        vocab_fingerprint=db.fingerprint,
    )


def encode_symptoms(model: RetrieverModel, symptoms) -> np.ndarray:
    """L2-normalized mean of the member symptom vectors.

    Symptoms missing from the vocabulary are dropped with a warning; raises
    if none remain.
    """
    index = model.symptom_index
    known = [s for s in symptoms if s in index]
    unknown = [s for s in symptoms if s not in index]
    if unknown:
        logger.warning("dropping symptoms outside the retriever vocabulary: %s",
                       sorted(unknown))
    if not known:
        raise ValueError("no symptoms left to encode after vocabulary filtering")
    mean = model.symptom_vectors[[index[s] for s in known]].mean(axis=0)
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise ValueError("symptom set encodes to the zero vector")
    return mean / norm


def recall_top_k(model: RetrieverModel, symptoms, k: int,
                 db: DiseaseDB | None = None) -> CandidateSet:
    """Exact top-k diseases by cosine similarity; ties break by ascending id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if db is not None and db.fingerprint != model.vocab_fingerprint:
        raise FingerprintMismatchError(
            "retriever model is bound to a different disease catalog")
    query = encode_symptoms(model, symptoms)
    norms = np.linalg.norm(model.disease_vectors, axis=1)
    norms[norms == 0.0] = 1.0
    scores = (model.disease_vectors @ query) / norms
    order = sorted(range(len(model.disease_ids)),
                   key=lambda i: (-scores[i], model.disease_ids[i]))
    top = order[:min(k, len(order))]
    return CandidateSet(
        entries=tuple((model.disease_ids[i], float(scores[i])) for i in top),
        k=k,
    )


def rank_of_target(model: RetrieverModel, symptoms, target: str) -> int:
    """1-based rank of the target disease in the full-catalog ranking."""
    full = recall_top_k(model, symptoms, k=len(model.disease_ids))
    for pos, (disease_id, _) in enumerate(full.entries, start=1):
        if disease_id == target:
            return pos
    raise KeyError(f"disease '{target}' is not in the model's catalog")


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def case_loss_and_grads(symptom_vectors: np.ndarray, disease_vectors: np.ndarray,
                        symptom_idx: list[int], target_idx: int):
    """Softmax contrastive loss for one case and its analytic gradients.

    Returns (loss, grad_symptom_vectors, grad_disease_vectors); the symptom
    gradient is nonzero only on the rows in ``symptom_idx``.
    """
    m = len(symptom_idx)
    u = symptom_vectors[symptom_idx].mean(axis=0)
    u_norm = float(np.linalg.norm(u))
    q = u / u_norm

    d_norms = np.linalg.norm(disease_vectors, axis=1)
    d_hat = disease_vectors / d_norms[:, None]
    sims = d_hat @ q                                  # cosine logits

    shifted = sims - sims.max()
    exp = np.exp(shifted)
    probs = exp / exp.sum()
    loss = float(np.log(exp.sum()) - shifted[target_idx])

    coeff = probs.copy()
    coeff[target_idx] -= 1.0                          # dL/d_logit

    # d_logit/d_v = (q - sim * v_hat) / ||v||
    grad_d = coeff[:, None] * (q[None, :] - sims[:, None] * d_hat) / d_norms[:, None]

    # d_logit/d_u = (v_hat - sim * q) / ||u||; mean pools into each member.
    grad_u = (coeff[:, None] * (d_hat - sims[:, None] * q[None, :])).sum(axis=0) / u_norm
    grad_s = np.zeros_like(symptom_vectors)
    for i in symptom_idx:
        grad_s[i] += grad_u / m

    return loss, grad_s, grad_d


def _case_indices(model: RetrieverModel, cases: list[CaseRecord]) -> list[tuple[list[int], int]]:
    sym_index = model.symptom_index
    dis_index = model.disease_index
    prepared = []
    for case in cases:
        idx = sorted(sym_index[s] for s in case.all_symptoms if s in sym_index)
        if not idx:
            raise ValueError(f"case '{case.case_id}' has no symptoms in the vocabulary")
        if case.target not in dis_index:
            raise ValueError(f"case '{case.case_id}' targets unknown disease '{case.target}'")
        prepared.append((idx, dis_index[case.target]))
    return prepared


def _mean_loss_and_grads(model: RetrieverModel, prepared) -> tuple[float, np.ndarray, np.ndarray]:
    total = 0.0
    grad_s = np.zeros_like(model.symptom_vectors)
    grad_d = np.zeros_like(model.disease_vectors)
    for idx, target in prepared:
        loss, gs, gd = case_loss_and_grads(
            model.symptom_vectors, model.disease_vectors, idx, target)
        total += loss
        grad_s += gs
        grad_d += gd
    n = len(prepared)
    return total / n, grad_s / n, grad_d / n


def train_retriever(db: DiseaseDB, cases: list[CaseRecord],
                    config: TrainConfig = TrainConfig()) -> TrainResult:
    """Full-batch gradient descent on the contrastive loss.

    Deterministic for a fixed seed; raises TrainingDivergedError as soon as
    the mean loss stops being finite.
    """
    if not cases:
        raise ValueError("no training cases")
    model = init_model(db, config.dim, config.seed)
    prepared = _case_indices(model, cases)
    history: list[float] = []
    for epoch in range(config.epochs):
        loss, grad_s, grad_d = _mean_loss_and_grads(model, prepared)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"non-finite loss at epoch {epoch}")
        history.append(loss)
        model.symptom_vectors = model.symptom_vectors - config.learning_rate * grad_s
        model.disease_vectors = model.disease_vectors - config.learning_rate * grad_d
    final, _, _ = _mean_loss_and_grads(model, prepared)
    if not np.isfinite(final):
        raise TrainingDivergedError(f"non-finite loss at epoch {config.epochs}")
    history.append(final)
    return TrainResult(model=model, loss_history=history)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def eval_retriever(model: RetrieverModel, cases: list[CaseRecord]) -> RetrieverEvalReport:
    """Rank the target for each case by querying with explicit + implicit symptoms."""
    if not cases:
        raise ValueError("no evaluation cases")
    ranks = [rank_of_target(model, case.all_symptoms, case.target) for case in cases]
    recall_at = {
        k: sum(1 for r in ranks if r <= k) / len(ranks)
        for k in RetrieverEvalReport.RECALL_KS
    }
    mrr = sum((1.0 / r) if r <= 100 else 0.0 for r in ranks) / len(ranks)
    return RetrieverEvalReport(n_cases=len(ranks), mrr_at_100=mrr, recall_at=recall_at)


# ---------------------------------------------------------------------------
# Persistence: one JSON header line, then raw little-endian float32 vectors
# (symptom rows first, then disease rows, both in catalog order).
# ---------------------------------------------------------------------------

def save_model(model: RetrieverModel, path: str | Path) -> None:
    header = {
        "format": _MAGIC,
        "version": _FORMAT_VERSION,
        "dim": model.dim,
        "vocab_fingerprint": model.vocab_fingerprint,
        "n_symptoms": len(model.symptom_tokens),
        "n_diseases": len(model.disease_ids),
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(model.symptom_vectors.astype("<f4").tobytes())
        fh.write(model.disease_vectors.astype("<f4").tobytes())


def load_model(path: str | Path, db: DiseaseDB) -> RetrieverModel:
    """Load a model file and bind it to ``db``; fingerprints must match."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}: not a retriever model file") from exc
        if header.get("format") != _MAGIC:
            raise ValueError(f"{path}: not a retriever model file")
        if header.get("vocab_fingerprint") != db.fingerprint:
            raise FingerprintMismatchError(
                f"{path}: model was trained against a different catalog")
        dim = int(header["dim"])
        n_sym = int(header["n_symptoms"])
        n_dis = int(header["n_diseases"])
        if n_sym != len(db.symptom_vocab) or n_dis != len(db.diseases):
            raise ValueError(f"{path}: table sizes do not match the catalog")
        payload = fh.read()
    expected = (n_sym + n_dis) * dim * 4
    if len(payload) != expected:
        raise ValueError(f"{path}: truncated model file "
                         f"({len(payload)} bytes, expected {expected})")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    sym = flat[:n_sym * dim].reshape(n_sym, dim)
    dis = flat[n_sym * dim:].reshape(n_dis, dim)
    return RetrieverModel(
        dim=dim,
        symptom_tokens=db.symptom_vocab,
        disease_ids=tuple(d.id for d in db.diseases),
        symptom_vectors=sym.copy(),
        disease_vectors=dis.copy(),
        vocab_fingerprint=header["vocab_fingerprint"],
    )
