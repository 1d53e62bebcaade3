import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import type { FetchLike } from "../src/api.js";

const here = dirname(fileURLToPath(import.meta.url));

export function fixture<T>(name: string): T {
  return JSON.parse(readFileSync(join(here, "fixtures", name), "utf-8")) as T;
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

/** Fake fetch that records calls and replays canned JSON responses. */
export function fakeFetch(
  routes: Record<string, unknown>,
  calls: RecordedCall[] = [],
): { fetchImpl: FetchLike; calls: RecordedCall[] } {
  const fetchImpl: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    calls.push({ url, method, body });
    const key = `${method} ${url}`;
    if (!(key in routes)) {
      return new Response(JSON.stringify({ detail: `no route ${key}` }), { status: 404 });
    }
    return new Response(JSON.stringify(routes[key]), {
      status: 200,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchImpl, calls };
}

/** Build a web ReadableStream of NDJSON lines for streaming tests. */
export function ndjsonStream(lines: unknown[], chunkSize = 2): ReadableStream<Uint8Array> {
  const text = lines.map((line) => JSON.stringify(line) + "\n").join("");
  const encoder = new TextEncoder();
  const chunks: Uint8Array[] = [];
  for (let index = 0; index < text.length; index += chunkSize) {
    chunks.push(encoder.encode(text.slice(index, index + chunkSize)));
  }
  return new ReadableStream({
    start(controller) {
      for (const chunk of chunks) controller.enqueue(chunk);
      controller.close();
    },
  });
}
