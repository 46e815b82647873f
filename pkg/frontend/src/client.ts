// REST + SSE client. Every request targets one of the documented session
// service endpoints; the fetch implementation is injectable so tests can
// run against recorded responses.

import type { JournalEvent } from "./types.js";
import { applyEvent, type UiSession } from "./viewModel.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export type ApiError = { code: string; message: string };

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let detail: ApiError = { code: "E_HTTP", message: response.statusText };
  try {
    detail = (await response.json()) as ApiError;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new SessionApiError(response.status, detail.code, detail.message);
}

export class SessionApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "SessionApiError";
  }
}

export class SessionClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async createSession(): Promise<string> {
    const response = await this.fetchImpl(this.url("/v1/sessions"), {
      method: "POST",
    });
    await raiseForStatus(response);
    const body = (await response.json()) as { session_id: string };
    return body.session_id;
  }

  async attachDataset(
    sessionId: string,
    role: "train" | "test",
    csv: string,
  ): Promise<Record<string, unknown>> {
    const response = await this.fetchImpl(
      this.url(`/v1/sessions/${sessionId}/dataset?role=${role}`),
      {
        method: "POST",
        headers: { "content-type": "text/csv" },
        body: csv,
      },
    );
    await raiseForStatus(response);
    return (await response.json()) as Record<string, unknown>;
  }

  async sendInstruction(sessionId: string, text: string): Promise<number> {
    const response = await this.fetchImpl(
      this.url(`/v1/sessions/${sessionId}/instructions`),
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
    await raiseForStatus(response);
    const body = (await response.json()) as { seq: number };
    return body.seq;
  }

  async report(sessionId: string): Promise<Record<string, unknown>> {
    const response = await this.fetchImpl(
      this.url(`/v1/sessions/${sessionId}/report`),
    );
    await raiseForStatus(response);
    return (await response.json()) as Record<string, unknown>;
  }

  artifactUrl(sessionId: string, name: string): string {
    return this.url(`/v1/sessions/${sessionId}/artifacts/${name}`);
  }

  async *events(
    sessionId: string,
    fromSeq: number,
  ): AsyncGenerator<JournalEvent> {
    const response = await this.fetchImpl(
      this.url(`/v1/sessions/${sessionId}/events?from=${fromSeq}`),
      { headers: { accept: "text/event-stream" } },
    );
    await raiseForStatus(response);
    if (response.body === null) return;
    yield* parseSseStream(response.body);
  }
}

// SSE framing: blocks separated by a blank line; `data:` lines carry the
// JSON event (seq and ts are embedded in the payload the server sends),
// comment lines starting with ":" are keep-alives and are skipped.
export function parseSseBlock(block: string): JournalEvent | null {
  const dataLines: string[] = [];
  let type = "message";
  for (const line of block.split("\n")) {
    if (line.startsWith(":")) continue;
    if (line.startsWith("data:")) dataLines.push(line.slice(5).trimStart());
    else if (line.startsWith("event:")) type = line.slice(6).trim();
  }
  if (dataLines.length === 0) return null;
  const data = JSON.parse(dataLines.join("\n")) as {
    seq: number;
    ts: number;
    [extra: string]: unknown;
  };
  const { seq, ts, ...payload } = data;
  return { seq, ts, type, payload };
}

export async function* parseSseStream(
  body: ReadableStream<Uint8Array>,
): AsyncGenerator<JournalEvent> {
  const decoder = new TextDecoder();
  const reader = body.getReader();
  let buffer = "";
  for (;;) {
    const { value, done } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let boundary: number;
    while ((boundary = buffer.indexOf("\n\n")) !== -1) {
      const block = buffer.slice(0, boundary);
      buffer = buffer.slice(boundary + 2);
      const event = parseSseBlock(block);
      if (event !== null) yield event;
    }
  }
}

export type ConnectionState = "connecting" | "open" | "closed" | "error";

export type ConnectOptions = {
  onUpdate: (view: UiSession) => void;
  onState?: (state: ConnectionState) => void;
  maxReconnects?: number;
};

// Folds the live stream into the view model, resuming from the cursor on
// every reconnect. applyEvent drops events at or below the cursor, so a
// server that re-delivers on resume never produces duplicate rendering.
export async function connect(
  client: SessionClient,
  sessionId: string,
  view: UiSession,
  options: ConnectOptions,
): Promise<UiSession> {
  const maxReconnects = options.maxReconnects ?? 3;
  let attempt = 0;
  for (;;) {
    options.onState?.("connecting");
    try {
      const stream = client.events(sessionId, view.cursor + 1);
      options.onState?.("open");
      for await (const event of stream) {
        view = applyEvent(view, event);
        options.onUpdate(view);
      }
      options.onState?.("closed");
      return view;
    } catch (error) {
      attempt += 1;
      if (attempt > maxReconnects) {
        options.onState?.("error");
        throw error;
      }
    }
  }
}
