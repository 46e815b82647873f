import { readFileSync } from "node:fs";

import type { JournalEvent } from "../src/types.js";
import { parseJournalLines } from "../src/viewModel.js";

export function goldenJournal(): JournalEvent[] {
  const text = readFileSync(
    new URL("./fixtures/golden_journal.jsonl", import.meta.url),
    "utf-8",
  );
  return parseJournalLines(text);
}

export function sseText(events: JournalEvent[]): string {
  return events
    .map((e) => {
      const data = JSON.stringify({ ...e.payload, seq: e.seq, ts: e.ts });
      return `id: ${e.seq}\nevent: ${e.type}\ndata: ${data}\n\n`;
    })
    .join("");
}

export function sseResponse(body: string): Response {
  const stream = new ReadableStream<Uint8Array>({
    start(controller) {
      controller.enqueue(new TextEncoder().encode(body));
      controller.close();
    },
  });
  return new Response(stream, {
    status: 200,
    headers: { "content-type": "text/event-stream" },
  });
}

export type RecordedRequest = { url: string; init: RequestInit | undefined };

export function recordingFetch(
  respond: (url: string, init?: RequestInit) => Response,
): { calls: RecordedRequest[]; fetchImpl: (u: string, i?: RequestInit) => Promise<Response> } {
  const calls: RecordedRequest[] = [];
  return {
    calls,
    fetchImpl: (url: string, init?: RequestInit) => {
      calls.push({ url, init });
      return Promise.resolve(respond(url, init));
    },
  };
}
