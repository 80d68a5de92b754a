// Rating payload schema shared with the service's POST /api/ratings contract.

export interface RatingPayload {
  assessor_id: string;
  trial_id: string;
  condition_id: string;
  score: number;
}

export function isValidScore(value: unknown): value is number {
  return typeof value === "number" && Number.isInteger(value) && value >= 0 && value <= 100;
}

export function isValidRating(value: unknown): value is RatingPayload {
  if (typeof value !== "object" || value === null) return false;
  const r = value as Record<string, unknown>;
  return (
    typeof r.assessor_id === "string" && r.assessor_id.length > 0 &&
    typeof r.trial_id === "string" && r.trial_id.length > 0 &&
    typeof r.condition_id === "string" && r.condition_id.length > 0 &&
    isValidScore(r.score)
  );
}

export function validateBatch(batch: unknown[]): RatingPayload[] {
  if (batch.length === 0) throw new Error("empty rating batch");
  for (const item of batch) {
    if (!isValidRating(item)) {
      throw new Error(`invalid rating payload: ${JSON.stringify(item)}`);
    }
  }
  return batch as RatingPayload[];
}

/** Clamp a slider position to the valid integer score range. */
export function clampScore(value: number): number {
  if (Number.isNaN(value)) return 0;
  return Math.min(100, Math.max(0, Math.round(value)));
}
