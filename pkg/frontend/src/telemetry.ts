/** Incremental parser for the server-sent telemetry stream.
 *
 * EventSource cannot send the auth headers the admin stream requires,
 * so the console reads the response body directly and feeds chunks
 * through this parser. Keep-alive comment lines (": ...") are ignored
 * per the SSE grammar. */

import type { TelemetryFrame } from "./api.js";

export class SseParser {
  private buffer = "";

  /** Feed a chunk of the stream; returns any complete data frames. */
  push(chunk: string): TelemetryFrame[] {
    this.buffer += chunk;
    const frames: TelemetryFrame[] = [];
    let sep: number;
    while ((sep = this.buffer.indexOf("\n\n")) >= 0) {
      const block = this.buffer.slice(0, sep);
      this.buffer = this.buffer.slice(sep + 2);
      for (const line of block.split("\n")) {
        if (line.startsWith("data: ")) {
          frames.push(JSON.parse(line.slice("data: ".length)) as TelemetryFrame);
        }
        // comment lines (":") and blank lines carry no payload
      }
    }
    return frames;
  }
}

/** Subscribe to the telemetry stream with custom headers. Returns an
 * abort function. */
export function streamTelemetry(
  url: string,
  headers: Record<string, string>,
  onFrame: (frame: TelemetryFrame) => void,
  fetchFn: typeof fetch = fetch,
): () => void {
  const controller = new AbortController();
  void (async () => {
    const resp = await fetchFn(url, { headers, signal: controller.signal });
    if (!resp.ok || !resp.body) return;
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
          onFrame(frame);
        }
      }
    } catch {
      // aborted or connection lost; the view model flags staleness
    }
  })();
  return () => controller.abort();
}
