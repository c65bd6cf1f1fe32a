import { describe, expect, it } from "vitest";

import { AnnotateClient } from "../src/api";
import { PlaybackController, SPEEDS, type PlaybackEvents } from "../src/playback";
import { FrameStore } from "../src/state";
import { FakeAnnotationService } from "./fake_service";

interface Rig {
  controller: PlaybackController;
  store: FrameStore;
  service: FakeAnnotationService;
  frames: number[];
  lostAt: number[];
}

async function makeRig(
  options: ConstructorParameters<typeof FakeAnnotationService>[0],
  baseFps = 40
): Promise<Rig> {
  const service = new FakeAnnotationService(options);
  const client = new AnnotateClient("http://svc", service.fetch);
  await client.open("/data/toy.h5");
  const store = new FrameStore(client);
  await store.init();
  const frames: number[] = [];
  const lostAt: number[] = [];
  const events: PlaybackEvents = {
    onFrame: (f) => frames.push(f),
    onPauseOnLost: (f) => lostAt.push(f),
  };
  const controller = new PlaybackController(store, events, baseFps);
  await controller.seek(0);
  return { controller, store, service, frames, lostAt };
}

function trackCalls(service: FakeAnnotationService): number {
  return service.calls.filter((c) => c.path.includes("/track")).length;
}

describe("PlaybackController", () => {
  it("derives the tick interval from base rate and speed", async () => {
    const rig = await makeRig({ frames: 3 });
    expect(SPEEDS).toContain(rig.controller.speed);
    expect(rig.controller.intervalMs).toBeCloseTo(25, 10);
    rig.controller.setSpeed(5);
    expect(rig.controller.intervalMs).toBeCloseTo(5, 10);
    rig.controller.setSpeed(0.5);
    expect(rig.controller.intervalMs).toBeCloseTo(50, 10);
  });

  it("does nothing while paused", async () => {
    const rig = await makeRig({ frames: 3 });
    expect(await rig.controller.tick()).toBe(false);
    expect(rig.controller.frame).toBe(0);
  });

  it("tracks when moving forward onto an unannotated frame", async () => {
    const rig = await makeRig({
      frames: 5,
      circles: { 0: [{ person_id: 0, x: 2, y: 0, radius: 0.3, lost: false }] },
    });
    rig.controller.play(1);
    expect(await rig.controller.tick()).toBe(true);
    expect(rig.controller.frame).toBe(1);
    expect(trackCalls(rig.service)).toBe(1);
    expect(rig.store.cached(1)?.circles).toHaveLength(1);
  });

  it("never re-tracks over frames that already carry annotations", async () => {
    const circles: Record<number, { person_id: number; x: number; y: number; radius: number; lost: boolean }[]> = {};
    for (let f = 0; f < 5; f++) {
      circles[f] = [{ person_id: 0, x: 2 + 0.05 * f, y: 0, radius: 0.3, lost: false }];
    }
    const rig = await makeRig({ frames: 5, circles });
    // Pre-populate the cache, as seeking through an annotated stretch does.
    for (let f = 1; f < 5; f++) {
      await rig.store.load(f);
    }
    rig.controller.play(1);
    while (await rig.controller.tick()) {
      // run to the end
    }
    expect(rig.controller.frame).toBe(4);
    expect(trackCalls(rig.service)).toBe(0);
  });

  it("never tracks when playing backward", async () => {
    const rig = await makeRig({
      frames: 5,
      circles: { 3: [{ person_id: 0, x: 2, y: 0, radius: 0.3, lost: false }] },
    });
    await rig.controller.seek(3);
    rig.controller.play(-1);
    while (await rig.controller.tick()) {
      // rewind to the start
    }
    expect(rig.controller.frame).toBe(0);
    expect(trackCalls(rig.service)).toBe(0);
  });

  it("pauses automatically when a tracked circle is lost", async () => {
    const rig = await makeRig({
      frames: 6,
      circles: { 0: [{ person_id: 0, x: 2, y: 0, radius: 0.3, lost: false }] },
      lostOnTrackInto: [3],
    });
    rig.controller.play(1);
    await rig.controller.tick(); // -> 1
    await rig.controller.tick(); // -> 2
    expect(rig.controller.playing).toBe(true);
    await rig.controller.tick(); // -> 3, circle lost
    expect(rig.controller.frame).toBe(3);
    expect(rig.controller.playing).toBe(false);
    expect(rig.lostAt).toEqual([3]);
    expect(await rig.controller.tick()).toBe(false);
  });

  it("stops at the last frame instead of tracking past the end", async () => {
    const rig = await makeRig({
      frames: 3,
      circles: { 0: [{ person_id: 0, x: 2, y: 0, radius: 0.3, lost: false }] },
    });
    rig.controller.play(1);
    await rig.controller.tick();
    await rig.controller.tick();
    expect(rig.controller.frame).toBe(2);
    expect(await rig.controller.tick()).toBe(false);
    expect(rig.controller.playing).toBe(false);
  });

  it("keeps at most one request in flight", async () => {
    const rig = await makeRig({
      frames: 10,
      circles: { 0: [{ person_id: 0, x: 2, y: 0, radius: 0.3, lost: false }] },
    });
    rig.controller.play(1);
    const first = rig.controller.tick();
    const second = rig.controller.tick();
    expect(await second).toBe(false); // rejected while the first is pending
    expect(await first).toBe(true);
    expect(rig.controller.frame).toBe(1);
    expect(trackCalls(rig.service)).toBe(1);
  });

  it("ignores out-of-bounds seeks", async () => {
    const rig = await makeRig({ frames: 3 });
    await rig.controller.seek(99);
    expect(rig.controller.frame).toBe(0);
  });
});
