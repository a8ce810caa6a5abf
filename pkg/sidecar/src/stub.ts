import { mkdirSync, readdirSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { basename, join } from "node:path";

import { gaussians, paramHash, rngFrom } from "./hash.js";
import { encodeGray, readDimensions } from "./png.js";

export const EMBED_DIM = 64;

export class SidecarError extends Error {
  constructor(public code: string, message: string) {
    super(message);
  }
}

function frameFiles(clipDir: string): string[] {
  let names: string[];
  try {
    names = readdirSync(clipDir);
  } catch {
    throw new SidecarError("not_found", `cannot read ${clipDir}`);
  }
  return names.filter((n) => /^frame_\d+\.png$/.test(n)).sort();
}

function unitVector(op: string, params: Record<string, unknown>): number[] {
  const vec = gaussians(rngFrom(paramHash(op, params)), EMBED_DIM);
  const norm = Math.sqrt(vec.reduce((acc, v) => acc + v * v, 0));
  return vec.map((v) => v / norm);
}

const ROSTER_LINE = /^- ([^:\n]+):/m;

/**
 * Deterministic implementations of every operation: results are pure
 * functions of a stable hash of the request parameters, so two launches
 * of the stub give byte-identical answers.
 */
export class StubHandlers {
  constructor(private matteRoot: string = join(tmpdir(), "mimix-sidecar-mattes")) {}

  health(): Record<string, unknown> {
    return { mode: "stub" };
  }

  segment(params: { clip_dir: string; character: string }): { matte_dir: string } {
    const frames = frameFiles(params.clip_dir);
    if (frames.length === 0) {
      throw new SidecarError("no_frames", `no frames in ${params.clip_dir}`);
    }
    const first = readFileSync(join(params.clip_dir, frames[0]));
    const { width, height } = readDimensions(first);
    const side = Math.max(4, Math.floor(Math.min(width, height) / 4));
    const spanX = Math.max(1, width - side);
    const spanY = Math.max(1, height - side);
    const safe = params.character.replace(/ /g, "_");
    const outDir = join(this.matteRoot, `${basename(params.clip_dir)}__${safe}`);
    mkdirSync(outDir, { recursive: true });
    for (let t = 0; t < frames.length; t++) {
      const alpha = new Uint8Array(width * height);
      const x0 = (t * 2) % spanX;
      const y0 = (t * 2) % spanY;
      for (let y = y0; y < y0 + side; y++) {
        alpha.fill(255, y * width + x0, y * width + x0 + side);
      }
      const name = `frame_${String(t).padStart(5, "0")}.png`;
      writeFileSync(join(outDir, name), encodeGray(alpha, width, height));
    }
    return { matte_dir: outDir };
  }

  embed_image(params: { path: string }): { vector: number[] } {
    return { vector: unitVector("embed_image", { path: String(params.path) }) };
  }

  embed_text(params: { text: string }): { vector: number[] } {
    return { vector: unitVector("embed_text", { text: String(params.text) }) };
  }

  flow(params: { clip_dir: string }): { mean_magnitudes: number[] } {
    const pairs = Math.max(1, frameFiles(params.clip_dir).length - 1);
    // keyed by the directory name so relocated clips score identically
    const rng = rngFrom(paramHash("flow", { clip_dir: basename(params.clip_dir) }));
    const magnitudes: number[] = [];
    for (let i = 0; i < pairs; i++) {
      magnitudes.push(rng() * 4.0);
    }
    return { mean_magnitudes: magnitudes };
  }

  vlm(params: { prompt: string; frame_paths?: string[] }): { text: string } {
    const prompt = String(params.prompt);
    const lower = prompt.toLowerCase();
    if (lower.includes("answer with a single integer")) {
      return { text: "7" };
    }
    if (lower.includes("answer yes or no")) {
      return { text: "yes" };
    }
    if (prompt.includes("[character:")) {
      const match = ROSTER_LINE.exec(prompt);
      const name = match ? match[1].trim() : "someone";
      const style = prompt.includes("Source: cartoon") ? "cartoon" : "realistic";
      return {
        text: `[character:${name}], moves through the scene. [scene-style:${style}]`,
      };
    }
    return { text: "ok" };
  }
}
