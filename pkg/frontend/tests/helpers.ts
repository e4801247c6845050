import { readFileSync } from "node:fs";
import { join } from "node:path";

import type { Api } from "../src/api.js";
import type { RoundResponse, ServiceConfig, SessionSnapshot } from "../src/types.js";

// Recorded from a live service run against the bundled catalog: opening
// symptoms ["abdominal pain", "cough"] at tau 0.9, answers no/no/yes.
export type Fixture = {
  config: ServiceConfig;
  create: RoundResponse;
  answers: RoundResponse[];
};

export function loadFixture(): Fixture {
  // vitest runs with the package root as cwd; import.meta.url is unusable
  // here because the DOM environment rewrites it to an http scheme
  const path = join(process.cwd(), "tests", "fixtures", "scripted-session.json");
  return JSON.parse(readFileSync(path, "utf8")) as Fixture;
}

/** Api double that replays the recorded session and counts answer calls. */
export function scriptedApi(fixture: Fixture): {
  api: Api;
  answerCalls: () => number;
} {
  let calls = 0;
  const api: Api = {
    fetchConfig: async () => fixture.config,
    createSession: async () => fixture.create,
    answerSession: async () => {
      const res = fixture.answers[calls];
      calls += 1;
      if (!res) throw new Error("scripted answers exhausted");
      return res;
    },
    fetchSession: async () => {
      throw new Error("fetchSession not scripted");
    },
  };
  return { api, answerCalls: () => calls };
}

export function snapshotFrom(
  fixture: Fixture,
  upTo: number,
): SessionSnapshot {
  const responses = [fixture.create, ...fixture.answers].slice(0, upTo);
  const last = responses[responses.length - 1];
  return {
    session_id: fixture.create.session_id,
    finished: last.finished,
    config: fixture.config.defaults,
    evidence: { present: [], absent: [] },
    asked: [],
    pending: null,
    rounds: responses.map((r) => r.round),
    final: last.final,
  };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
