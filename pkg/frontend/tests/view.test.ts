import { describe, expect, it } from "vitest";

import { renderFinal, renderRound, renderSparkline } from "../src/view.js";
import { loadFixture } from "./helpers.js";

const fixture = loadFixture();
const firstRound = fixture.create.round;
const finalPayload = fixture.answers[2].final!;

describe("renderRound", () => {
  it("shows every candidate's confidence verbatim to three decimals", () => {
    const card = renderRound(firstRound);

    const rows = [...card.querySelectorAll(".bar-row")];
    expect(rows).toHaveLength(Object.keys(firstRound.confidence).length);

    const names = new Map(firstRound.candidates.map((c) => [c.id, c.name]));
    const byLabel = new Map(
      rows.map((row) => [
        row.querySelector(".bar-label")?.textContent,
        row.querySelector(".bar-value")?.textContent,
      ]),
    );
    for (const [diseaseId, value] of Object.entries(firstRound.confidence)) {
      expect(byLabel.get(names.get(diseaseId) ?? diseaseId)).toBe(value.toFixed(3));
    }
  });

  it("orders bars by descending confidence", () => {
    const card = renderRound(firstRound);
    const values = [...card.querySelectorAll(".bar-value")].map((n) =>
      Number(n.textContent),
    );
    const sorted = [...values].sort((a, b) => b - a);
    expect(values).toEqual(sorted);
  });

  it("shows the recorded entropy and the question", () => {
    const card = renderRound(firstRound);
    expect(card.querySelector(".round-entropy")?.textContent).toBe(
      `${firstRound.entropy.toFixed(3)} nats`,
    );
    const decision = firstRound.decision;
    expect(decision.kind).toBe("inquire");
    if (decision.kind === "inquire") {
      expect(card.querySelector(".round-question")?.textContent).toBe(
        decision.question,
      );
    }
  });

  it("lists the confirmed symptoms", () => {
    const card = renderRound(firstRound);
    expect(card.querySelector(".round-symptoms")?.textContent).toBe(
      `Confirmed: ${firstRound.abstracted_symptoms.join(", ")}`,
    );
  });

  it("renders warnings when the engine emitted any", () => {
    const noisy = { ...firstRound, warnings: ["unrecognized symptom: glitter"] };
    const card = renderRound(noisy);
    expect(card.querySelector(".round-warning")?.textContent).toBe(
      "unrecognized symptom: glitter",
    );
    expect(renderRound(firstRound).querySelector(".round-warning")).toBeNull();
  });
});

describe("renderFinal", () => {
  it("shows the diagnosis with its API confidence", () => {
    const card = renderFinal(finalPayload);
    expect(card.querySelector(".final-name")?.textContent).toBe(finalPayload.name);
    expect(card.querySelector(".final-confidence")?.textContent).toBe(
      `Confidence ${finalPayload.confidence.toFixed(3)}`,
    );
    expect(card.querySelector(".final-treatment")?.textContent).toBe(
      finalPayload.treatment,
    );
    expect(card.querySelector(".final-forced")).toBeNull();
  });

  it("flags a forced diagnosis", () => {
    const forced = { ...finalPayload, forced: true };
    expect(renderFinal(forced).querySelector(".final-forced")).not.toBeNull();
  });
});

describe("renderSparkline", () => {
  it("plots one point per round", () => {
    const entropies = [fixture.create, ...fixture.answers].map((r) => r.round.entropy);
    const svg = renderSparkline(entropies);
    const points = svg.querySelector("polyline")?.getAttribute("points") ?? "";
    expect(points.split(" ")).toHaveLength(entropies.length);
  });
});
