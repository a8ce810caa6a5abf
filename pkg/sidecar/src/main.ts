import { serve } from "./server.js";
import { StubHandlers } from "./stub.js";

function parseMode(argv: string[]): string {
  const index = argv.indexOf("--mode");
  return index >= 0 && argv[index + 1] ? argv[index + 1] : "stub";
}

const mode = parseMode(process.argv.slice(2));
if (mode !== "stub") {
  // live mode would load real segmentation/flow/embedding models; this
  // build ships only the deterministic stub
  process.stderr.write(`unsupported mode ${JSON.stringify(mode)}; only "stub" is available\n`);
  process.exit(2);
}

process.stderr.write("mimix-sidecar: stub mode, reading NDJSON on stdin\n");
serve(process.stdin, process.stdout, new StubHandlers()).then(() => process.exit(0));
