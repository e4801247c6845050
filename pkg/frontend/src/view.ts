import { barWidth, formatConfidence, formatEntropy } from "./format.js";
import type { Final, Round } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** One round as a card: confirmed symptoms, confidence bars, question. */
export function renderRound(round: Round): HTMLElement {
  const card = el("section", "round-card");
  card.dataset.round = String(round.round);

  const head = el("header", "round-head");
  head.append(
    el("span", "round-label", `Round ${round.round}`),
    el("span", "round-entropy", formatEntropy(round.entropy)),
  );
  card.append(head);

  if (round.abstracted_symptoms.length > 0) {
    card.append(
      el("p", "round-symptoms", `Confirmed: ${round.abstracted_symptoms.join(", ")}`),
    );
  }

  const names = new Map(round.candidates.map((c) => [c.id, c.name]));
  const ranked = Object.entries(round.confidence).sort(
    (a, b) => b[1] - a[1] || (a[0] < b[0] ? -1 : 1),
  );
  const bars = el("ul", "confidence-bars");
  for (const [diseaseId, value] of ranked) {
    const item = el("li", "bar-row");
    const track = el("div", "bar-track");
    const fill = el("div", "bar-fill");
    fill.style.width = barWidth(value);
    track.append(fill);
    item.append(
      el("span", "bar-label", names.get(diseaseId) ?? diseaseId),
      track,
      el("span", "bar-value", formatConfidence(value)),
    );
    bars.append(item);
  }
  card.append(bars);

  if (round.decision.kind === "inquire") {
    card.append(el("p", "round-question", round.decision.question));
  }
  for (const warning of round.warnings) {
    card.append(el("p", "round-warning", warning));
  }
  return card;
}

export function renderFinal(final: Final): HTMLElement {
  const card = el("section", "final-card");
  card.append(el("h2", "final-name", final.name));
  card.append(
    el("p", "final-confidence", `Confidence ${formatConfidence(final.confidence)}`),
  );
  if (final.forced) {
    card.append(
      el("p", "final-forced", "Round limit reached; this is the leading candidate."),
    );
  }
  if (final.overview) card.append(el("p", "final-overview", final.overview));
  if (final.treatment) card.append(el("p", "final-treatment", final.treatment));
  return card;
}

const SVG_NS = "http://www.w3.org/2000/svg";

/** Entropy per round as a polyline; scaling is presentation only. */
export function renderSparkline(
  entropies: number[],
  width = 220,
  height = 48,
): SVGSVGElement {
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);
  svg.setAttribute("class", "entropy-sparkline");
  const top = Math.max(...entropies, 1e-9);
  const pad = 4;
  const step = entropies.length > 1 ? (width - 2 * pad) / (entropies.length - 1) : 0;
  const points = entropies
    .map((value, i) => {
      const x = pad + i * step;
      const y = pad + (1 - value / top) * (height - 2 * pad);
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  const line = document.createElementNS(SVG_NS, "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  svg.append(line);
  return svg;
}
