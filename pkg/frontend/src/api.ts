import type { RoundResponse, ServiceConfig, SessionSnapshot } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  const body = await res.json().catch(() => ({}));
  if (!res.ok) {
    const message = (body as { error?: string }).error ?? `HTTP ${res.status}`;
    throw new ApiError(res.status, message);
  }
  return body as T;
}

function post<T>(url: string, payload: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
}

export function fetchConfig(): Promise<ServiceConfig> {
  return request("/api/config");
}

export function createSession(symptoms: string[], tau: number): Promise<RoundResponse> {
  return post("/api/sessions", { symptoms, tau });
}

export function answerSession(sessionId: string, answer: "yes" | "no"): Promise<RoundResponse> {
  return post(`/api/sessions/${encodeURIComponent(sessionId)}/answer`, { answer });
}

export function fetchSession(sessionId: string): Promise<SessionSnapshot> {
  return request(`/api/sessions/${encodeURIComponent(sessionId)}`);
}

export type Api = {
  fetchConfig: typeof fetchConfig;
  createSession: typeof createSession;
  answerSession: typeof answerSession;
  fetchSession: typeof fetchSession;
};

export const liveApi: Api = { fetchConfig, createSession, answerSession, fetchSession };
