// Session progression: trial order, resume-on-reload, local retention of
// batches that failed to POST. Scores are immutable once a trial submits.

import { RatingPayload, validateBatch } from "./schema.js";
import { SessionViewData, TrialState } from "./state.js";

export interface KeyValueStore {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

interface PersistedProgress {
  submitted: string[];
  startedAt: number;
  pending: RatingPayload[] | null;
}

export type PostRatings = (payload: RatingPayload[]) => Promise<void>;

export class SessionRunner {
  readonly assessorId: string;
  readonly trials: TrialState[];
  private submitted: Set<string>;
  private startedAt: number;
  private pending: RatingPayload[] | null;
  private readonly storageKey: string;

  constructor(
    view: SessionViewData,
    private readonly store: KeyValueStore,
    private readonly post: PostRatings,
    now: () => number = Date.now,
  ) {
    this.assessorId = view.assessor_id;
    this.trials = view.trials.map((t) => new TrialState(t));
    this.storageKey = `plc-mushra/${view.assessor_id}`;
    const saved = this.load();
    this.submitted = new Set(saved?.submitted ?? []);
    this.startedAt = saved?.startedAt ?? now();
    this.pending = saved?.pending ?? null;
    this.persist();
  }

  private load(): PersistedProgress | null {
    const raw = this.store.getItem(this.storageKey);
    if (!raw) return null;
    try {
      return JSON.parse(raw) as PersistedProgress;
    } catch {
      return null;
    }
  }

  private persist(): void {
    const data: PersistedProgress = {
      submitted: [...this.submitted],
      startedAt: this.startedAt,
      pending: this.pending,
    };
    this.store.setItem(this.storageKey, JSON.stringify(data));
  }

  /** Index of the first unsubmitted trial; trials.length when done. */
  currentIndex(): number {
    for (let i = 0; i < this.trials.length; i++) {
      if (!this.submitted.has(this.trials[i]!.trialId)) return i;
    }
    return this.trials.length;
  }

  currentTrial(): TrialState | null {
    const i = this.currentIndex();
    return i < this.trials.length ? this.trials[i]! : null;
  }

  isComplete(): boolean {
    return this.currentIndex() >= this.trials.length;
  }

  isSubmitted(trialId: string): boolean {
    return this.submitted.has(trialId);
  }

  hasPendingRetry(): boolean {
    return this.pending !== null;
  }

  elapsedSeconds(now: () => number = Date.now): number {
    return Math.round((now() - this.startedAt) / 1000);
  }

  /**
   * Submit the current trial. On failure the payload is retained locally and
   * the trial stays current so a retry can re-send it unchanged.
   */
  async submitCurrent(): Promise<"advanced" | "retained"> {
    const trial = this.currentTrial();
    if (!trial) throw new Error("session already complete");
    if (this.submitted.has(trial.trialId)) throw new Error("scores are immutable after submission");
    const payload = this.pending ?? validateBatch(trial.payload(this.assessorId));
    try {
      await this.post(payload);
    } catch {
      this.pending = payload;
      this.persist();
      return "retained";
    }
    this.pending = null;
    this.submitted.add(trial.trialId);
    this.persist();
    return "advanced";
  }
}
