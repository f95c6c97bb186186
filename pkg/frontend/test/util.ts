import { spawnSync } from "node:child_process";

import { KernelClient } from "../src/index.js";

/** Deterministic 32-bit PRNG for reproducible fixtures. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Axis-aligned rectangle rotated by theta, as a flat tl-first clockwise quad. */
export function rotatedRect(
  cx: number,
  cy: number,
  w: number,
  h: number,
  theta: number,
): Float64Array {
  const base = [
    [-w / 2, -h / 2],
    [w / 2, -h / 2],
    [w / 2, h / 2],
    [-w / 2, h / 2],
  ];
  const cos = Math.cos(theta);
  const sin = Math.sin(theta);
  const out = new Float64Array(8);
  base.forEach(([x, y], i) => {
    out[2 * i] = cx + cos * x - sin * y;
    out[2 * i + 1] = cy + sin * x + cos * y;
  });
  return out;
}

export function randomQuads(rand: () => number, n: number): Float64Array {
  const out = new Float64Array(n * 8);
  for (let i = 0; i < n; i++) {
    const quad = rotatedRect(
      20 + 60 * rand(),
      20 + 60 * rand(),
      5 + 30 * rand(),
      5 + 30 * rand(),
      2 * Math.PI * rand(),
    );
    out.set(quad, i * 8);
  }
  return out;
}

/** One-shot request through `unitailkit kernel --once` (a second, independent
 * transport into the same native kernels). */
export function kernelOnce(request: Record<string, unknown>): unknown {
  const command = KernelClient.defaultCommand();
  const proc = spawnSync(command[0], [...command.slice(1), "--once"], {
    input: JSON.stringify({ id: 0, ...request }) + "\n",
    encoding: "utf-8",
    maxBuffer: 64 * 1024 * 1024,
  });
  if (proc.status !== 0) {
    throw new Error(`one-shot kernel failed: ${proc.stderr}`);
  }
  const response = JSON.parse(proc.stdout.trim());
  if (!response.ok) throw new Error(`one-shot kernel error: ${response.error}`);
  return response.result;
}

function* permutations(items: number[]): Generator<number[]> {
  if (items.length <= 1) {
    yield items.slice();
    return;
  }
  for (let i = 0; i < items.length; i++) {
    const rest = items.slice(0, i).concat(items.slice(i + 1));
    for (const tail of permutations(rest)) yield [items[i], ...tail];
  }
}

/** Exhaustive minimum assignment total over injections of size min(n, m). */
export function bruteForceMinAssignment(cost: number[][]): number {
  const n = cost.length;
  const m = n ? cost[0].length : 0;
  if (n === 0 || m === 0) return 0;
  if (n > m) {
    const t: number[][] = Array.from({ length: m }, (_, j) =>
      Array.from({ length: n }, (_, i) => cost[i][j]),
    );
    return bruteForceMinAssignment(t);
  }
  let best = Infinity;
  for (const perm of permutations([...Array(m).keys()])) {
    let total = 0;
    for (let i = 0; i < n; i++) total += cost[i][perm[i]];
    if (total < best) best = total;
  }
  return best;
}

/** Direct soft-scale evaluation (default pyramid 3..7, reference level 5). */
export function softScaleOracle(area: number): Array<[number, number]> {
  const s = Math.log2(Math.sqrt(area) / 224);
  const clamp = (l: number) => Math.min(Math.max(l, 3), 7);
  const li = clamp(Math.ceil(5 + s));
  const lj = clamp(Math.floor(5 + s));
  const fLi = s - Math.floor(s);
  if (li === lj) return [[li, 1.0]];
  return [
    [li, fLi],
    [lj, 1.0 - fLi],
  ];
}

/** Direct quad-centerness evaluation from the centroid and edge lines. */
export function centernessOracle(px: number, py: number, q: Float64Array): number {
  const xs = [q[0], q[2], q[4], q[6]];
  const ys = [q[1], q[3], q[5], q[7]];
  let a = 0;
  let cx = 0;
  let cy = 0;
  for (let i = 0; i < 4; i++) {
    const j = (i + 1) % 4;
    const c = xs[i] * ys[j] - xs[j] * ys[i];
    a += c;
    cx += (xs[i] + xs[j]) * c;
    cy += (ys[i] + ys[j]) * c;
  }
  a *= 0.5;
  const gx = cx / (6 * a);
  const gy = cy / (6 * a);
  const edges: Array<[number, number]> = [
    [3, 0],
    [1, 2],
    [0, 1],
    [2, 3],
  ];
  let prod = 1;
  for (const [ia, ib] of edges) {
    const ex = xs[ib] - xs[ia];
    const ey = ys[ib] - ys[ia];
    const len = Math.sqrt(ex * ex + ey * ey);
    const dp = (ex * (py - ys[ia]) - ey * (px - xs[ia])) / len;
    const dg = (ex * (gy - ys[ia]) - ey * (gx - xs[ia])) / len;
    prod *= Math.min(dp, dg) / Math.max(dp, dg);
  }
  return Math.sqrt(prod);
}

/** Closed-form IoU of two axis-aligned rectangles given as flat quads. */
export function axisAlignedIou(a: Float64Array, b: Float64Array): number {
  const rect = (q: Float64Array) => ({
    x0: Math.min(q[0], q[4]),
    y0: Math.min(q[1], q[5]),
    x1: Math.max(q[0], q[4]),
    y1: Math.max(q[1], q[5]),
  });
  const ra = rect(a);
  const rb = rect(b);
  const iw = Math.max(0, Math.min(ra.x1, rb.x1) - Math.max(ra.x0, rb.x0));
  const ih = Math.max(0, Math.min(ra.y1, rb.y1) - Math.max(ra.y0, rb.y0));
  const inter = iw * ih;
  const union =
    (ra.x1 - ra.x0) * (ra.y1 - ra.y0) + (rb.x1 - rb.x0) * (rb.y1 - rb.y0) - inter;
  return union > 0 ? inter / union : 0;
}
