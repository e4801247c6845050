"""Language-model belief backend speaking a small JSON wire protocol.

The adapter renders a prompt template, POSTs ``{"template_id",
"rendered_prompt", "model"}`` to the configured endpoint, and expects
``{"analysis": str, "distribution": {disease name: number}}`` back.
Responses are repaired through ``validate_distribution``; names that do
not match a candidate are dropped there.  Transport failures retry with
exponential backoff, and an unparseable reply earns one rethink prompt
before the call fails.
"""

from __future__ import annotations

import json
import logging
import os
import time
from importlib import resources
from pathlib import Path

import httpx

from .belief import (ConfidenceDistribution, DiseaseMatch, LlmConfig, ReasoningTrace,
                     SymptomEvidence, validate_distribution)
from .knowledge import DiseaseDB
from .retriever import CandidateSet

logger = logging.getLogger(__name__)

ENDPOINT_ENV = "COD_LLM_ENDPOINT"
API_KEY_ENV = "COD_LLM_API_KEY"


class LlmBackendError(RuntimeError):
    """The endpoint could not produce a usable distribution."""


def load_template(template_id: str, template_dir: str | None = None) -> str:
    """Read a prompt template; ``template_dir`` overrides the bundled ones."""
    if template_dir:
        path = Path(template_dir) / f"{template_id}.txt"
        return path.read_text(encoding="utf-8")
    ref = resources.files("cod") / "templates" / f"{template_id}.txt"
    return ref.read_text(encoding="utf-8")


def render_prompt(template: str, evidence: SymptomEvidence, candidates: CandidateSet,
                  db: DiseaseDB, explicit: frozenset[str] | None = None,
                  previous_analysis: str = "") -> str:
    """Fill a template with the current evidence and candidate knowledge.

    ``explicit`` marks which present symptoms came from the opening message;
    the rest count as confirmed during questioning.
    """
    explicit = explicit if explicit is not None else evidence.present
    confirmed = evidence.present - explicit
    blocks = []
    for disease_id in candidates.ids:
        d = db.by_id[disease_id]
        profile = ", ".join(s for s, _ in d.symptom_profile)
        blocks.append(f"- {d.name}: {d.overview} Typical symptoms: {profile}.")
    return template.format(
        explicit_symptoms=", ".join(sorted(evidence.present & explicit)) or "none",
        implicit_symptoms=", ".join(sorted(confirmed)) or "none",
        absent_symptoms=", ".join(sorted(evidence.absent)) or "none",
        candidate_block="\n".join(blocks),
        previous_analysis=previous_analysis or "none",
    )


def _match_names_to_ids(raw: dict, candidates: CandidateSet, db: DiseaseDB) -> dict[str, float]:
    """Map whatever names the model used onto candidate ids where possible."""
    by_name = {db.by_id[i].name.lower(): i for i in candidates.ids}
    by_id = {i.lower(): i for i in candidates.ids}
    mapped: dict[str, float] = {}
    for key, value in raw.items():
        norm = str(key).strip().lower()
        disease_id = by_id.get(norm) or by_name.get(norm)
        mapped[disease_id if disease_id else str(key)] = value
    return mapped


class LlmBelief:
    """Belief backend backed by an external model endpoint."""

    kind = "llm"

    def __init__(self, config: LlmConfig = LlmConfig(),
                 transport: httpx.BaseTransport | None = None):
        endpoint = config.endpoint or os.environ.get(ENDPOINT_ENV, "")
        api_key = config.api_key or os.environ.get(API_KEY_ENV)
        if not endpoint:
            raise ValueError(
                f"no LLM endpoint configured (set {ENDPOINT_ENV} or pass endpoint=)")
        self.config = config
        self.endpoint = endpoint
        headers = {"content-type": "application/json"}
        if api_key:
            headers["authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(headers=headers, timeout=config.timeout,
                                    transport=transport)
        self.last_analysis = ""

    def close(self) -> None:
        self._client.close()

    def _post(self, template_id: str, prompt: str) -> dict:
        payload = {
            "template_id": template_id,
            "rendered_prompt": prompt,
            "model": self.config.model,
        }
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                response = self._client.post(self.endpoint, json=payload)
                response.raise_for_status()
                body = response.json()
                if not isinstance(body, dict):
                    raise ValueError(f"expected a JSON object, got {type(body).__name__}")
                return body
            except (httpx.HTTPError, ValueError, json.JSONDecodeError) as exc:
                last_error = exc
                if attempt < self.config.max_retries:
                    delay = 0.5 * (2 ** attempt)
                    logger.warning("LLM call failed (%s); retrying in %.1fs", exc, delay)
                    time.sleep(delay)
        raise LlmBackendError(f"LLM endpoint failed after "
                              f"{self.config.max_retries + 1} attempts: {last_error}")

    def _ask(self, template_id: str, evidence: SymptomEvidence, candidates: CandidateSet,
             db: DiseaseDB, previous_analysis: str = "") -> tuple[str, dict[str, float]]:
        template = load_template(template_id, self.config.template_dir)
        prompt = render_prompt(template, evidence, candidates, db,
                               previous_analysis=previous_analysis)
        body = self._post(template_id, prompt)
        analysis = str(body.get("analysis", ""))
        distribution = body.get("distribution")
        if not isinstance(distribution, dict) or not distribution:
            raise LlmBackendError("reply carries no usable 'distribution' object")
        try:
            numeric = {k: float(v) for k, v in distribution.items()}
        except (TypeError, ValueError) as exc:
            raise LlmBackendError(f"non-numeric confidence in reply: {exc}") from exc
        return analysis, numeric

    def _ask_validated(self, template_id: str, evidence: SymptomEvidence,
                       candidates: CandidateSet, db: DiseaseDB,
                       previous_analysis: str = "") -> tuple[str, ConfidenceDistribution]:
        analysis, raw = self._ask(template_id, evidence, candidates, db, previous_analysis)
        mapped = _match_names_to_ids(raw, candidates, db)
        return analysis, validate_distribution(mapped, candidates.ids)

    def assess(self, evidence: SymptomEvidence, candidates: CandidateSet, db: DiseaseDB,
               rethink: bool = False) -> tuple[ReasoningTrace, ConfidenceDistribution]:
        """One confidence call; ``rethink=True`` uses the reconsideration prompt."""
        template_id = "rethink" if rethink else self.config.template_id
        previous = self.last_analysis if rethink else ""
        try:
            analysis, dist = self._ask_validated(template_id, evidence, candidates,
                                                 db, previous)
        except (LlmBackendError, ValueError) as exc:
            if rethink:
                raise
            # One corrective re-prompt before giving up on a bad reply.
            logger.warning("unusable LLM reply (%s); issuing a rethink prompt", exc)
            try:
                analysis, dist = self._ask_validated(
                    "rethink", evidence, candidates, db,
                    previous_analysis=self.last_analysis)
            except ValueError as rethink_exc:
                raise LlmBackendError(
                    f"rethink reply still unusable: {rethink_exc}") from rethink_exc
        self.last_analysis = analysis
        matches = tuple(
            DiseaseMatch(
                disease=i,
                matched=tuple(sorted(evidence.present & db.by_id[i].profile_symptoms)),
                contradicting=tuple(sorted(evidence.absent & db.by_id[i].profile_symptoms)),
            )
            for i in candidates.ids
        )
        return ReasoningTrace(text=analysis, per_disease=matches), dist
