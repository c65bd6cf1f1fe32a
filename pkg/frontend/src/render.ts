/** Canvas scene drawing. Takes a minimal 2D-context interface so the
 * geometry can be exercised without a browser canvas. */

import type { FramePayload } from "./types";
import type { ViewTransform } from "./view";

export interface Context2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
}

export const COLORS = {
  background: "#111418",
  point: "#9ecbff",
  origin: "#ffffff",
  circle: "#52d273",
  circleLost: "#ff5f5f",
  circleSelected: "#ffd34d",
  label: "#e6e6e6",
} as const;

const POINT_RADIUS_PX = 1.5;
const HANDLE_RADIUS_PX = 4;

export function drawFrame(
  ctx: Context2DLike,
  view: ViewTransform,
  frame: FramePayload,
  selectedId: number | null
): void {
  ctx.clearRect(0, 0, view.canvasWidth, view.canvasHeight);
  ctx.fillStyle = COLORS.background;
  // background
  ctx.beginPath();
  ctx.moveTo(0, 0);
  ctx.lineTo(view.canvasWidth, 0);
  ctx.lineTo(view.canvasWidth, view.canvasHeight);
  ctx.lineTo(0, view.canvasHeight);
  ctx.fill();

  // sensor origin marker
  const origin = view.toScreen({ x: 0, y: 0 });
  ctx.fillStyle = COLORS.origin;
  ctx.beginPath();
  ctx.arc(origin.x, origin.y, 3, 0, 2 * Math.PI);
  ctx.fill();

  ctx.fillStyle = COLORS.point;
  for (const [x, y] of frame.points) {
    const s = view.toScreen({ x, y });
    ctx.beginPath();
    ctx.arc(s.x, s.y, POINT_RADIUS_PX, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.font = "12px sans-serif";
  for (const circle of frame.circles) {
    const s = view.toScreen({ x: circle.x, y: circle.y });
    const r = view.lengthToScreen(circle.radius);
    const selected = circle.person_id === selectedId;
    ctx.strokeStyle = circle.lost
      ? COLORS.circleLost
      : selected
        ? COLORS.circleSelected
        : COLORS.circle;
    ctx.lineWidth = selected ? 3 : 2;
    ctx.beginPath();
    ctx.arc(s.x, s.y, r, 0, 2 * Math.PI);
    ctx.stroke();
    if (selected) {
      // resize handle on the circle's rim
      ctx.fillStyle = COLORS.circleSelected;
      ctx.beginPath();
      ctx.arc(s.x + r, s.y, HANDLE_RADIUS_PX, 0, 2 * Math.PI);
      ctx.fill();
    }
    ctx.fillStyle = COLORS.label;
    ctx.fillText(`#${circle.person_id}`, s.x + r + 4, s.y);
  }
}

/** Topmost circle whose rim or interior contains the world point. */
export function hitTest(
  frame: FramePayload,
  world: { x: number; y: number },
  slackMeters: number
): number | null {
  for (let i = frame.circles.length - 1; i >= 0; i--) {
    const c = frame.circles[i];
    const d = Math.hypot(world.x - c.x, world.y - c.y);
    if (d <= c.radius + slackMeters) {
      return c.person_id;
    }
  }
  return null;
}
