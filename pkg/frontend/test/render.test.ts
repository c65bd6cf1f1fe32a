import { describe, expect, it } from "vitest";

import { COLORS, drawFrame, hitTest, type Context2DLike } from "../src/render";
import type { FramePayload } from "../src/types";
import { ViewTransform } from "../src/view";

interface ArcCall {
  x: number;
  y: number;
  r: number;
  kind: "fill" | "stroke";
  style: string;
}

/** Records arcs together with how they were painted. */
class RecordingContext implements Context2DLike {
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 0;
  font = "";
  arcs: ArcCall[] = [];
  labels: { text: string; x: number; y: number }[] = [];
  private pending: { x: number; y: number; r: number } | null = null;

  clearRect(): void {}
  beginPath(): void {
    this.pending = null;
  }
  arc(x: number, y: number, r: number): void {
    this.pending = { x, y, r };
  }
  moveTo(): void {}
  lineTo(): void {}
  fill(): void {
    if (this.pending !== null) {
      this.arcs.push({ ...this.pending, kind: "fill", style: String(this.fillStyle) });
    }
  }
  stroke(): void {
    if (this.pending !== null) {
      this.arcs.push({ ...this.pending, kind: "stroke", style: String(this.strokeStyle) });
    }
  }
  fillText(text: string, x: number, y: number): void {
    this.labels.push({ text, x, y });
  }
}

function frameWith(
  points: [number, number][],
  circles: FramePayload["circles"]
): FramePayload {
  return { schema_version: 1, frame: 0, timestamp: 0, points, circles };
}

describe("drawFrame", () => {
  it("draws a point 2 m ahead directly above the origin marker", () => {
    const ctx = new RecordingContext();
    const view = new ViewTransform(1000, 700, 50);
    drawFrame(ctx, view, frameWith([[2, 0]], []), null);
    const origin = ctx.arcs.find((a) => a.style === COLORS.origin);
    const point = ctx.arcs.find((a) => a.style === COLORS.point);
    expect(origin).toMatchObject({ x: 500, y: 350 });
    expect(point).toMatchObject({ x: 500, y: 350 - 100 });
  });

  it("scales circle radii in meters and labels them with the person id", () => {
    const ctx = new RecordingContext();
    const view = new ViewTransform(1000, 700, 50, 2);
    drawFrame(
      ctx,
      view,
      frameWith([], [{ person_id: 7, x: 1, y: 0, radius: 0.3, lost: false }]),
      null
    );
    const rim = ctx.arcs.find((a) => a.kind === "stroke");
    expect(rim?.r).toBeCloseTo(0.3 * 100, 10);
    expect(rim?.style).toBe(COLORS.circle);
    expect(ctx.labels.map((l) => l.text)).toContain("#7");
  });

  it("paints lost circles in the lost color and selected ones with a handle", () => {
    const ctx = new RecordingContext();
    const view = new ViewTransform(1000, 700, 50);
    drawFrame(
      ctx,
      view,
      frameWith(
        [],
        [
          { person_id: 0, x: 2, y: 1, radius: 0.3, lost: true },
          { person_id: 1, x: 2, y: -1, radius: 0.3, lost: false },
        ]
      ),
      1
    );
    const strokes = ctx.arcs.filter((a) => a.kind === "stroke");
    expect(strokes.map((a) => a.style)).toEqual([COLORS.circleLost, COLORS.circleSelected]);
    const handle = ctx.arcs.find(
      (a) => a.kind === "fill" && a.style === COLORS.circleSelected
    );
    const selectedRim = strokes[1];
    expect(handle).toMatchObject({ x: selectedRim.x + selectedRim.r, y: selectedRim.y });
  });
});

describe("hitTest", () => {
  const frame = frameWith(
    [],
    [
      { person_id: 0, x: 2, y: 0, radius: 0.3, lost: false },
      { person_id: 1, x: 2.1, y: 0, radius: 0.3, lost: false },
    ]
  );

  it("returns the topmost (last-drawn) circle under the cursor", () => {
    expect(hitTest(frame, { x: 2.05, y: 0 }, 0)).toBe(1);
  });

  it("respects the slack margin", () => {
    // 0.35 m from circle 0's center, 0.45 m from circle 1's.
    expect(hitTest(frame, { x: 1.65, y: 0 }, 0)).toBeNull();
    expect(hitTest(frame, { x: 1.65, y: 0 }, 0.1)).toBe(0);
  });

  it("misses when nothing is near", () => {
    expect(hitTest(frame, { x: -5, y: -5 }, 0.1)).toBeNull();
  });
});
