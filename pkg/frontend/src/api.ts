/** Typed client for the annotation service. All session state lives on the
 * server; this class only carries the base URL and session id. */

import type {
  CirclePayload,
  ExportPayload,
  FramePayload,
  MetaPayload,
  TrackPayload,
} from "./types";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string }
) => Promise<{ ok: boolean; status: number; text(): Promise<string> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class AnnotateClient {
  private sessionId: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  get session(): string {
    if (this.sessionId === null) {
      throw new Error("no session open");
    }
    return this.sessionId;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown
  ): Promise<T> {
    const init: Parameters<FetchLike>[1] = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    const text = await resp.text();
    if (!resp.ok) {
      let detail = text;
      try {
        detail = (JSON.parse(text) as { detail?: string }).detail ?? text;
      } catch {
        // non-JSON error body: report it verbatim
      }
      throw new ApiError(resp.status, detail);
    }
    return JSON.parse(text) as T;
  }

  async open(datasetPath: string): Promise<string> {
    const out = await this.request<{ session_id: string }>("POST", "/sessions", {
      dataset_path: datasetPath,
    });
    this.sessionId = out.session_id;
    return out.session_id;
  }

  meta(): Promise<MetaPayload> {
    return this.request("GET", `/sessions/${this.session}/meta`);
  }

  frame(k: number): Promise<FramePayload> {
    return this.request("GET", `/sessions/${this.session}/frames/${k}`);
  }

  addCircle(
    frame: number,
    x: number,
    y: number,
    radius: number
  ): Promise<CirclePayload> {
    return this.request("POST", `/sessions/${this.session}/frames/${frame}/circles`, {
      action: "add",
      x,
      y,
      radius,
    });
  }

  moveCircle(
    frame: number,
    personId: number,
    x: number,
    y: number
  ): Promise<CirclePayload> {
    return this.request("POST", `/sessions/${this.session}/frames/${frame}/circles`, {
      action: "move",
      person_id: personId,
      x,
      y,
    });
  }

  resizeCircle(
    frame: number,
    personId: number,
    radius: number
  ): Promise<CirclePayload> {
    return this.request("POST", `/sessions/${this.session}/frames/${frame}/circles`, {
      action: "resize",
      person_id: personId,
      radius,
    });
  }

  deleteCircle(frame: number, personId: number): Promise<{ deleted: number }> {
    return this.request("POST", `/sessions/${this.session}/frames/${frame}/circles`, {
      action: "delete",
      person_id: personId,
    });
  }

  track(fromFrame: number, steps = 1): Promise<TrackPayload> {
    return this.request(
      "POST",
      `/sessions/${this.session}/track?from=${fromFrame}&steps=${steps}`
    );
  }

  exportJson(): Promise<ExportPayload> {
    return this.request("POST", `/sessions/${this.session}/export?format=json`);
  }

  save(path: string): Promise<{ saved: string }> {
    return this.request("POST", `/sessions/${this.session}/save`, { path });
  }
}
