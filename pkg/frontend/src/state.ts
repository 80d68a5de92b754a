// Trial state machine: slider positions, played flags, and the submission gate.
// All randomization comes from the server session; this module never learns
// what a condition token stands for.

import { clampScore, RatingPayload } from "./schema.js";

export interface TrialViewData {
  trial_id: string;
  reference: string;
  conditions: string[];
}

export interface SessionViewData {
  assessor_id: string;
  training: { label: string; token: string }[];
  trials: TrialViewData[];
}

export const SLIDER_INITIAL = 100;

export class TrialState {
  readonly trialId: string;
  readonly referenceToken: string;
  readonly tokens: string[];

  private sliders = new Map<string, number>();
  private touched = new Set<string>();
  private played = new Set<string>();
  private unplayable = new Set<string>();
  private referencePlayed = false;

  constructor(view: TrialViewData) {
    this.trialId = view.trial_id;
    this.referenceToken = view.reference;
    this.tokens = [...view.conditions];
    for (const token of this.tokens) this.sliders.set(token, SLIDER_INITIAL);
  }

  private requireToken(token: string): void {
    if (!this.sliders.has(token)) throw new Error(`unknown condition token ${token}`);
  }

  sliderValue(token: string): number {
    this.requireToken(token);
    return this.sliders.get(token)!;
  }

  /** Drags clamp to [0, 100]; moving a slider counts as touching it. */
  setSlider(token: string, value: number): number {
    this.requireToken(token);
    const clamped = clampScore(value);
    this.sliders.set(token, clamped);
    this.touched.add(token);
    return clamped;
  }

  /** Explicitly confirm a slider the assessor wants to leave at its position. */
  confirmSlider(token: string): void {
    this.requireToken(token);
    this.touched.add(token);
  }

  markPlayed(token: string): void {
    if (token === this.referenceToken) {
      this.referencePlayed = true;
      return;
    }
    this.requireToken(token);
    this.played.add(token);
  }

  /** An audio fetch failure makes the condition unplayable and blocks the trial. */
  markUnplayable(token: string): void {
    if (token === this.referenceToken) {
      this.unplayable.add(token);
      return;
    }
    this.requireToken(token);
    this.unplayable.add(token);
  }

  isPlayed(token: string): boolean {
    return token === this.referenceToken ? this.referencePlayed : this.played.has(token);
  }

  isTouched(token: string): boolean {
    return this.touched.has(token);
  }

  /** Reasons submission is still blocked; empty means ready. */
  blockers(): string[] {
    const out: string[] = [];
    if (this.unplayable.size > 0) {
      out.push(`${this.unplayable.size} item(s) failed to load`);
    }
    if (!this.referencePlayed) out.push("play the reference");
    const unplayed = this.tokens.filter((t) => !this.played.has(t)).length;
    if (unplayed > 0) out.push(`play all conditions (${unplayed} left)`);
    const unconfirmed = this.tokens.filter((t) => !this.touched.has(t)).length;
    if (unconfirmed > 0) out.push(`set or confirm every slider (${unconfirmed} left)`);
    return out;
  }

  canSubmit(): boolean {
    return this.blockers().length === 0;
  }

  payload(assessorId: string): RatingPayload[] {
    if (!this.canSubmit()) {
      throw new Error(`trial ${this.trialId} not ready: ${this.blockers().join("; ")}`);
    }
    return this.tokens.map((token) => ({
      assessor_id: assessorId,
      trial_id: this.trialId,
      condition_id: token,
      score: this.sliders.get(token)!,
    }));
  }
}
