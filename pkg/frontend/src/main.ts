/** DOM wiring: canvas gestures (click-create, drag-move, wheel-resize,
 * right-click-delete), playback controls, and the pause-on-lost banner. */

import { AnnotateClient, ApiError } from "./api";
import { PlaybackController, SPEEDS, type Speed } from "./playback";
import { drawFrame, hitTest } from "./render";
import { FrameStore, ValidationError } from "./state";
import { ViewTransform } from "./view";

const DEFAULT_RADIUS = 0.3;
const HIT_SLACK_M = 0.1;
const RESIZE_STEP = 1.08;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function start(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    throw new Error("2D canvas unavailable");
  }
  const status = el<HTMLElement>("status");
  const frameLabel = el<HTMLElement>("frame-label");
  const scrubber = el<HTMLInputElement>("scrubber");

  const client = new AnnotateClient("");
  const store = new FrameStore(client);
  const view = new ViewTransform(canvas.width, canvas.height);
  let selectedId: number | null = null;

  const redraw = (frame: number): void => {
    const payload = store.cached(frame);
    if (payload !== undefined) {
      drawFrame(ctx, view, payload, selectedId);
      frameLabel.textContent = `frame ${frame} / ${store.count - 1}`;
      scrubber.value = String(frame);
    }
  };

  const playback = new PlaybackController(
    store,
    {
      onFrame: redraw,
      onPauseOnLost: (frame) => {
        status.textContent =
          `tracking lost a circle at frame ${frame} — fix it and resume`;
      },
    },
    40
  );

  const report = (err: unknown): void => {
    if (err instanceof ValidationError || err instanceof ApiError) {
      status.textContent = err.message;
    } else {
      throw err;
    }
  };

  // --- session ------------------------------------------------------------
  const datasetInput = el<HTMLInputElement>("dataset-path");
  el<HTMLButtonElement>("open").addEventListener("click", () => {
    void (async () => {
      try {
        await client.open(datasetInput.value);
        const frames = await store.init();
        scrubber.max = String(frames - 1);
        await playback.seek(0);
        status.textContent = `opened ${datasetInput.value} (${frames} frames)`;
      } catch (err) {
        report(err);
      }
    })();
  });

  // --- playback -----------------------------------------------------------
  let timer: number | null = null;
  const scheduleLoop = (): void => {
    if (timer !== null) {
      window.clearTimeout(timer);
    }
    timer = window.setTimeout(() => {
      void playback.tick().finally(scheduleLoop);
    }, playback.intervalMs);
  };
  scheduleLoop();

  el<HTMLButtonElement>("play-fwd").addEventListener("click", () => playback.play(1));
  el<HTMLButtonElement>("play-back").addEventListener("click", () => playback.play(-1));
  el<HTMLButtonElement>("pause").addEventListener("click", () => playback.pause());
  const speedSelect = el<HTMLSelectElement>("speed");
  for (const s of SPEEDS) {
    const option = document.createElement("option");
    option.value = String(s);
    option.textContent = `x${s}`;
    if (s === 1) {
      option.selected = true;
    }
    speedSelect.appendChild(option);
  }
  speedSelect.addEventListener("change", () => {
    playback.setSpeed(Number(speedSelect.value) as Speed);
  });
  scrubber.addEventListener("input", () => {
    playback.pause();
    void playback.seek(Number(scrubber.value)).catch(report);
  });

  // --- gestures -----------------------------------------------------------
  let dragging: number | null = null;

  canvas.addEventListener("mousedown", (ev) => {
    if (ev.button !== 0) {
      return;
    }
    const world = view.toWorld({ x: ev.offsetX, y: ev.offsetY });
    const payload = store.cached(playback.frame);
    if (payload === undefined) {
      return;
    }
    const hit = hitTest(payload, world, HIT_SLACK_M);
    if (hit !== null) {
      selectedId = hit;
      dragging = hit;
      redraw(playback.frame);
      return;
    }
    void store
      .addCircle(playback.frame, world.x, world.y, DEFAULT_RADIUS)
      .then((c) => {
        selectedId = c.person_id;
        redraw(playback.frame);
      })
      .catch(report);
  });

  canvas.addEventListener("mousemove", (ev) => {
    if (dragging === null) {
      return;
    }
    const world = view.toWorld({ x: ev.offsetX, y: ev.offsetY });
    void store
      .moveCircle(playback.frame, dragging, world.x, world.y)
      .then(() => redraw(playback.frame))
      .catch(report);
  });

  canvas.addEventListener("mouseup", () => {
    dragging = null;
  });

  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? RESIZE_STEP : 1 / RESIZE_STEP;
    if (selectedId !== null) {
      const circle = store
        .cached(playback.frame)
        ?.circles.find((c) => c.person_id === selectedId);
      if (circle !== undefined) {
        void store
          .resizeCircle(playback.frame, selectedId, circle.radius * factor)
          .then(() => redraw(playback.frame))
          .catch(report);
        return;
      }
    }
    view.zoomBy(factor);
    redraw(playback.frame);
  });

  canvas.addEventListener("contextmenu", (ev) => {
    ev.preventDefault();
    const world = view.toWorld({ x: ev.offsetX, y: ev.offsetY });
    const payload = store.cached(playback.frame);
    if (payload === undefined) {
      return;
    }
    const hit = hitTest(payload, world, HIT_SLACK_M);
    if (hit !== null) {
      if (selectedId === hit) {
        selectedId = null;
      }
      void store
        .deleteCircle(playback.frame, hit)
        .then(() => redraw(playback.frame))
        .catch(report);
    }
  });

  // --- export -------------------------------------------------------------
  el<HTMLButtonElement>("export").addEventListener("click", () => {
    void client
      .exportJson()
      .then((doc) => {
        const blob = new Blob([JSON.stringify(doc)], { type: "application/json" });
        const link = document.createElement("a");
        link.href = URL.createObjectURL(blob);
        link.download = "annotations.json";
        link.click();
        URL.revokeObjectURL(link.href);
      })
      .catch(report);
  });
}

window.addEventListener("DOMContentLoaded", () => {
  void start();
});
