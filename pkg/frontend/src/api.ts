// Thin fetch client for the listening-test service.

import { RatingPayload } from "./schema.js";
import { SessionViewData } from "./state.js";

export function audioUrl(token: string): string {
  return `/api/audio/${token}`;
}

export async function fetchSession(assessorId: string): Promise<SessionViewData> {
  const res = await fetch(`/api/session?assessor=${encodeURIComponent(assessorId)}`);
  if (!res.ok) throw new Error(`session request failed: HTTP ${res.status}`);
  return (await res.json()) as SessionViewData;
}

export async function postRatings(payload: RatingPayload[]): Promise<void> {
  const res = await fetch("/api/ratings", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  if (!res.ok) throw new Error(`rating submission failed: HTTP ${res.status}`);
}
