/** Playback state machine: frame advance at selectable speed in either
 * direction, with at most one service call in flight. Moving forward onto
 * an unannotated frame requests tracking; playback pauses automatically
 * when any tracked circle is lost, putting the operator back in charge. */

import type { FrameStore } from "./state";

export const SPEEDS = [0.5, 1, 2, 5] as const;
export type Speed = (typeof SPEEDS)[number];

export type Direction = 1 | -1;

export interface PlaybackEvents {
  onFrame(frame: number): void;
  onPauseOnLost(frame: number): void;
}

export class PlaybackController {
  playing = false;
  speed: Speed = 1;
  direction: Direction = 1;
  frame = 0;
  /** Serializes service calls: the loop never overlaps requests. */
  private inFlight = false;

  constructor(
    private readonly store: FrameStore,
    private readonly events: PlaybackEvents,
    private readonly baseFps: number
  ) {}

  get intervalMs(): number {
    return 1000 / (this.baseFps * this.speed);
  }

  setSpeed(speed: Speed): void {
    this.speed = speed;
  }

  play(direction: Direction): void {
    this.direction = direction;
    this.playing = true;
  }

  pause(): void {
    this.playing = false;
  }

  async seek(frame: number): Promise<void> {
    if (!this.store.inBounds(frame)) {
      return;
    }
    this.frame = frame;
    await this.store.load(frame);
    this.events.onFrame(frame);
  }

  /** One playback tick; returns false when nothing was advanced (paused,
   * at the boundary, or a request is already in flight). */
  async tick(): Promise<boolean> {
    if (!this.playing || this.inFlight) {
      return false;
    }
    const next = this.frame + this.direction;
    if (!this.store.inBounds(next)) {
      this.playing = false;
      return false;
    }
    this.inFlight = true;
    try {
      // Tracking only applies moving forward, and never overwrites frames
      // that already carry annotations.
      if (this.direction === 1 && !this.store.hasAnnotations(next)) {
        const result = await this.store.track(this.frame);
        this.frame = result.frame;
        this.events.onFrame(this.frame);
        if (result.anyLost) {
          this.playing = false;
          this.events.onPauseOnLost(this.frame);
        }
        return true;
      }
      await this.store.load(next);
      this.frame = next;
      this.events.onFrame(next);
      return true;
    } finally {
      this.inFlight = false;
    }
  }
}
