// Display helpers. The values themselves always come verbatim from the API;
// only the precision shown is decided here.

export function formatConfidence(value: number): string {
  return value.toFixed(3);
}

export function formatEntropy(value: number): string {
  return `${value.toFixed(3)} nats`;
}

/** CSS width for a confidence bar, clamped to the track. */
export function barWidth(value: number): string {
  const pct = Math.max(0, Math.min(100, value * 100));
  return `${pct}%`;
}
