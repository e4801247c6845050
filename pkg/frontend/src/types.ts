// Wire types mirroring the JSON the session service emits. The console never
// derives its own numbers; everything rendered comes from these payloads.

export type Candidate = {
  id: string;
  name: string;
  score: number;
  overview: string;
  symptoms: string[];
};

export type DiseaseMatch = {
  disease: string;
  matched: string[];
  contradicting: string[];
};

export type Reasoning = {
  text: string;
  per_disease: DiseaseMatch[];
};

export type Decision =
  | { kind: "diagnose"; disease: string; confidence: number; forced: boolean }
  | {
      kind: "inquire";
      symptom: string | null;
      question: string;
      entropy_reduction: number | null;
    };

export type Round = {
  round: number;
  abstracted_symptoms: string[];
  candidates: Candidate[];
  reasoning: Reasoning;
  confidence: Record<string, number>;
  entropy: number;
  decision: Decision;
  warnings: string[];
};

export type Final = {
  disease: string;
  name: string;
  confidence: number;
  forced: boolean;
  overview: string;
  treatment: string;
};

export type RoundResponse = {
  session_id: string;
  round: Round;
  finished: boolean;
  final: Final | null;
};

export type SessionSnapshot = {
  session_id: string;
  finished: boolean;
  config: { tau: number; max_rounds: number; k: number; entropy_mode: string };
  evidence: { present: string[]; absent: string[] };
  asked: string[];
  pending: string | null;
  rounds: Round[];
  final: Final | null;
};

export type ServiceConfig = {
  version: string;
  backend: string;
  llm_configured: boolean;
  defaults: { tau: number; max_rounds: number; k: number; entropy_mode: string };
  vocabulary: string[];
  diseases: { id: string; name: string; department: string }[];
};

// Client-side session state assembled from the responses above.
export type SessionView = {
  sessionId: string;
  rounds: Round[];
  status: "awaiting_answer" | "finished";
  final: Final | null;
};
