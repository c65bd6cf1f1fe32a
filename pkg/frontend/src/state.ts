/** Client-side frame state: a cache of server payloads plus optimistic
 * edits that are reconciled against the server's responses. The rendered
 * scene is a pure function of (last payload, pending edits), so a full
 * refresh reproduces it. */

import type { AnnotateClient } from "./api";
import type { CirclePayload, FramePayload } from "./types";

export const MIN_RADIUS = 0.05;
export const MAX_RADIUS = 2.0;

export class ValidationError extends Error {}

/** Mirrors the server-side rules so no gesture can produce an invalid
 * API call. */
export function validateCircle(x: number, y: number, radius: number): void {
  if (!Number.isFinite(x) || !Number.isFinite(y) || !Number.isFinite(radius)) {
    throw new ValidationError("circle coordinates must be finite");
  }
  if (radius < MIN_RADIUS || radius > MAX_RADIUS) {
    throw new ValidationError(
      `radius ${radius.toFixed(3)} outside [${MIN_RADIUS}, ${MAX_RADIUS}]`
    );
  }
  if (x === 0 && y === 0) {
    throw new ValidationError("circle cannot sit on the sensor origin");
  }
}

export class FrameStore {
  private frames = new Map<number, FramePayload>();
  private frameCount = 0;

  constructor(private readonly client: AnnotateClient) {}

  async init(): Promise<number> {
    const meta = await this.client.meta();
    this.frameCount = meta.frames;
    return meta.frames;
  }

  get count(): number {
    return this.frameCount;
  }

  inBounds(frame: number): boolean {
    return frame >= 0 && frame < this.frameCount;
  }

  cached(frame: number): FramePayload | undefined {
    return this.frames.get(frame);
  }

  async load(frame: number, force = false): Promise<FramePayload> {
    if (!this.inBounds(frame)) {
      throw new ValidationError(`frame ${frame} out of bounds`);
    }
    const hit = this.frames.get(frame);
    if (hit !== undefined && !force) {
      return hit;
    }
    const payload = await this.client.frame(frame);
    this.frames.set(frame, payload);
    return payload;
  }

  /** True when the frame already carries annotations (tracked or edited),
   * in which case playback must not re-track over them. */
  hasAnnotations(frame: number): boolean {
    const payload = this.frames.get(frame);
    return payload !== undefined && payload.circles.length > 0;
  }

  private mutate(frame: number, fn: (circles: CirclePayload[]) => CirclePayload[]): void {
    const payload = this.frames.get(frame);
    if (payload !== undefined) {
      this.frames.set(frame, { ...payload, circles: fn(payload.circles) });
    }
  }

  /** Optimistically add, then reconcile the provisional id with the
   * server-assigned one (or roll back on failure). */
  async addCircle(
    frame: number,
    x: number,
    y: number,
    radius: number
  ): Promise<CirclePayload> {
    validateCircle(x, y, radius);
    const provisional: CirclePayload = {
      person_id: -1,
      x,
      y,
      radius,
      lost: false,
    };
    this.mutate(frame, (cs) => [...cs, provisional]);
    try {
      const confirmed = await this.client.addCircle(frame, x, y, radius);
      this.mutate(frame, (cs) =>
        cs.map((c) => (c === provisional ? confirmed : c))
      );
      return confirmed;
    } catch (err) {
      this.mutate(frame, (cs) => cs.filter((c) => c !== provisional));
      throw err;
    }
  }

  async moveCircle(
    frame: number,
    personId: number,
    x: number,
    y: number
  ): Promise<void> {
    const before = this.frames.get(frame);
    const prev = before?.circles.find((c) => c.person_id === personId);
    if (prev === undefined) {
      throw new ValidationError(`unknown circle ${personId}`);
    }
    validateCircle(x, y, prev.radius);
    this.mutate(frame, (cs) =>
      cs.map((c) => (c.person_id === personId ? { ...c, x, y, lost: false } : c))
    );
    try {
      await this.client.moveCircle(frame, personId, x, y);
    } catch (err) {
      this.mutate(frame, (cs) =>
        cs.map((c) => (c.person_id === personId ? prev : c))
      );
      throw err;
    }
  }

  async resizeCircle(frame: number, personId: number, radius: number): Promise<void> {
    const prev = this.frames.get(frame)?.circles.find((c) => c.person_id === personId);
    if (prev === undefined) {
      throw new ValidationError(`unknown circle ${personId}`);
    }
    validateCircle(prev.x, prev.y, radius);
    this.mutate(frame, (cs) =>
      cs.map((c) => (c.person_id === personId ? { ...c, radius } : c))
    );
    try {
      await this.client.resizeCircle(frame, personId, radius);
    } catch (err) {
      this.mutate(frame, (cs) =>
        cs.map((c) => (c.person_id === personId ? prev : c))
      );
      throw err;
    }
  }

  async deleteCircle(frame: number, personId: number): Promise<void> {
    const prev = this.frames.get(frame)?.circles.find((c) => c.person_id === personId);
    if (prev === undefined) {
      throw new ValidationError(`unknown circle ${personId}`);
    }
    this.mutate(frame, (cs) => cs.filter((c) => c.person_id !== personId));
    try {
      await this.client.deleteCircle(frame, personId);
    } catch (err) {
      this.mutate(frame, (cs) => [...cs, prev]);
      throw err;
    }
  }

  /** Track from `frame` into `frame + 1`, updating the cache. */
  async track(frame: number): Promise<{ frame: number; anyLost: boolean }> {
    const result = await this.client.track(frame, 1);
    const cachedNext = await this.load(result.frame, true);
    return {
      frame: result.frame,
      anyLost: cachedNext.circles.some((c) => c.lost),
    };
  }
}
