// Gapless condition switching: all stimuli of a trial share one transport
// position, so pressing another button continues from the same point in time.

import { audioUrl } from "./api.js";

export class TrialPlayer {
  private ctx: AudioContext;
  private gain: GainNode;
  private buffers = new Map<string, AudioBuffer>();
  private source: AudioBufferSourceNode | null = null;
  private activeToken: string | null = null;
  private startedAtCtxTime = 0;
  private offset = 0;
  private volumeLocked = false;

  constructor(ctx?: AudioContext) {
    this.ctx = ctx ?? new AudioContext();
    this.gain = this.ctx.createGain();
    this.gain.connect(this.ctx.destination);
  }

  /** Volume adjustments are only allowed during the training phase. */
  setVolume(value: number): void {
    if (this.volumeLocked) return;
    this.gain.gain.value = Math.min(1.5, Math.max(0, value));
  }

  lockVolume(): void {
    this.volumeLocked = true;
  }

  get isVolumeLocked(): boolean {
    return this.volumeLocked;
  }

  async load(token: string): Promise<void> {
    if (this.buffers.has(token)) return;
    const res = await fetch(audioUrl(token));
    if (!res.ok) throw new Error(`audio fetch failed: HTTP ${res.status}`);
    const buf = await this.ctx.decodeAudioData(await res.arrayBuffer());
    this.buffers.set(token, buf);
  }

  private currentPosition(): number {
    if (this.source === null) return this.offset;
    return this.offset + (this.ctx.currentTime - this.startedAtCtxTime);
  }

  /** Switch playback to a token at the shared transport position. */
  play(token: string): void {
    const buffer = this.buffers.get(token);
    if (!buffer) throw new Error(`audio for token ${token} not loaded`);
    const position = this.currentPosition() % buffer.duration;
    this.stopSource();
    const source = this.ctx.createBufferSource();
    source.buffer = buffer;
    source.connect(this.gain);
    source.start(0, position);
    this.source = source;
    this.activeToken = token;
    this.offset = position;
    this.startedAtCtxTime = this.ctx.currentTime;
    source.onended = () => {
      if (this.source === source) {
        this.source = null;
        this.offset = 0;
      }
    };
  }

  stop(): void {
    this.offset = this.currentPosition();
    this.stopSource();
  }

  private stopSource(): void {
    if (this.source) {
      this.source.onended = null;
      this.source.stop();
      this.source.disconnect();
      this.source = null;
      this.activeToken = null;
    }
  }

  get playing(): string | null {
    return this.activeToken;
  }

  reset(): void {
    this.stopSource();
    this.offset = 0;
    this.buffers.clear();
  }
}
