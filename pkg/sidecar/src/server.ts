import readline from "node:readline";
import { Readable, Writable } from "node:stream";

import { SidecarError, StubHandlers } from "./stub.js";

interface SidecarRequest {
  id: number;
  op: string;
  params?: Record<string, unknown>;
}

const OPS = new Set([
  "health",
  "segment",
  "embed_image",
  "embed_text",
  "flow",
  "vlm",
]);

function handle(handlers: StubHandlers, request: SidecarRequest): string {
  const { id, op } = request;
  try {
    if (!OPS.has(op)) {
      throw new SidecarError("unsupported", `unknown op ${JSON.stringify(op)}`);
    }
    const method = handlers[op as keyof StubHandlers] as (
      params: Record<string, unknown>,
    ) => Record<string, unknown>;
    const result = method.call(handlers, request.params ?? {});
    return JSON.stringify({ id, ok: true, result });
  } catch (err) {
    const code = err instanceof SidecarError ? err.code : "internal";
    const message = err instanceof Error ? err.message : String(err);
    return JSON.stringify({ id, ok: false, error: { code, message } });
  }
}

/** Serve newline-delimited JSON requests until the input stream closes. */
export function serve(
  input: Readable,
  output: Writable,
  handlers: StubHandlers = new StubHandlers(),
): Promise<void> {
  const rl = readline.createInterface({ input, terminal: false });
  rl.on("line", (line: string) => {
    const trimmed = line.trim();
    if (!trimmed) {
      return;
    }
    let request: SidecarRequest;
    try {
      request = JSON.parse(trimmed);
    } catch {
      return; // transport noise; nothing to echo an id back to
    }
    // one JSON object per line, written atomically
    output.write(handle(handlers, request) + "\n");
  });
  return new Promise((resolve) => rl.on("close", resolve));
}
