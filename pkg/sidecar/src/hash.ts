import { createHash } from "node:crypto";

/** Recursively sort object keys so serialization is order-independent. */
function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeys);
  }
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value as object).sort()) {
      out[key] = sortKeys((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

/** Stable 32-byte digest of an operation and its parameters. */
export function paramHash(op: string, params: Record<string, unknown>): Buffer {
  const payload = JSON.stringify(sortKeys({ op, params }));
  return createHash("sha256").update(payload).digest();
}

/**
 * Deterministic PRNG seeded from a digest (splitmix64 over the first
 * 8 bytes). Returns floats in [0, 1).
 */
export function rngFrom(seed: Buffer): () => number {
  let state = seed.readBigUInt64BE(0);
  return () => {
    state = (state + 0x9e3779b97f4a7c15n) & 0xffffffffffffffffn;
    let z = state;
    z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & 0xffffffffffffffffn;
    z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & 0xffffffffffffffffn;
    z = z ^ (z >> 31n);
    return Number(z >> 11n) / 2 ** 53;
  };
}

/** Standard normal samples via Box-Muller on the seeded PRNG. */
export function gaussians(rng: () => number, n: number): number[] {
  const out: number[] = [];
  while (out.length < n) {
    const u1 = Math.max(rng(), 1e-12);
    const u2 = rng();
    const r = Math.sqrt(-2 * Math.log(u1));
    out.push(r * Math.cos(2 * Math.PI * u2));
    if (out.length < n) {
      out.push(r * Math.sin(2 * Math.PI * u2));
    }
  }
  return out;
}
