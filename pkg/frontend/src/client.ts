import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

import {
  type AssignmentTarget,
  type LevelWeight,
  type Matrix,
  type PyramidSpec,
  matrix,
} from "./types.js";

export interface KernelClientOptions {
  /** Full command to launch the kernel server; defaults to
   * `[$UNITAILKIT_PYTHON ?? "python3", "-m", "unitailkit", "kernel"]`. */
  command?: string[];
}

interface Pending {
  resolve: (value: unknown) => void;
  reject: (err: Error) => void;
}

/** Rows of 8 corner coordinates (tl, tr, br, bl) from a flat Float64Array. */
function quadRows(quads: Float64Array, name: string): number[][] {
  if (quads.length === 0 || quads.length % 8 !== 0) {
    throw new RangeError(`${name} must hold N*8 coordinates, got ${quads.length}`);
  }
  const rows: number[][] = [];
  for (let i = 0; i < quads.length; i += 8) {
    rows.push(Array.from(quads.subarray(i, i + 8)));
  }
  return rows;
}

function pointRows(points: Float64Array): number[][] {
  if (points.length % 2 !== 0) {
    throw new RangeError(`points must hold M*2 coordinates, got ${points.length}`);
  }
  const rows: number[][] = [];
  for (let i = 0; i < points.length; i += 2) {
    rows.push([points[i], points[i + 1]]);
  }
  return rows;
}

function specPayload(spec?: PyramidSpec): Record<string, number> | undefined {
  if (!spec) return undefined;
  const out: Record<string, number> = {};
  if (spec.minLevel !== undefined) out.min_level = spec.minLevel;
  if (spec.maxLevel !== undefined) out.max_level = spec.maxLevel;
  if (spec.lOrg !== undefined) out.l_org = spec.lOrg;
  if (spec.pretrainSize !== undefined) out.pretrain_size = spec.pretrainSize;
  return out;
}

/**
 * Speaks the JSON-lines kernel protocol against a persistent
 * `unitailkit kernel` subprocess. All methods are async, accept typed
 * arrays, never mutate their inputs, and may be issued concurrently
 * (responses are correlated by request id).
 */
export class KernelClient {
  private readonly child: ChildProcessWithoutNullStreams;
  private readonly lines: Interface;
  private readonly pending = new Map<number, Pending>();
  private nextId = 1;
  private exitError: Error | null = null;
  private stderrTail = "";

  constructor(options: KernelClientOptions = {}) {
    const command = options.command ?? KernelClient.defaultCommand();
    this.child = spawn(command[0], command.slice(1), {
      stdio: ["pipe", "pipe", "pipe"],
    });
    this.lines = createInterface({ input: this.child.stdout });
    this.lines.on("line", (line) => this.onLine(line));
    this.child.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString()).slice(-4096);
    });
    this.child.on("error", (err) => this.failAll(err));
    this.child.on("exit", (code) => {
      if (this.pending.size > 0) {
        this.failAll(
          new Error(
            `kernel server exited with code ${code}: ${this.stderrTail.trim()}`,
          ),
        );
      }
    });
  }

  static defaultCommand(): string[] {
    const python = process.env.UNITAILKIT_PYTHON ?? "python3";
    return [python, "-m", "unitailkit", "kernel"];
  }

  private onLine(line: string): void {
    let response: { id?: number; ok?: boolean; result?: unknown; error?: string };
    try {
      response = JSON.parse(line);
    } catch {
      return; // stray output, ignore
    }
    const waiter = response.id !== undefined ? this.pending.get(response.id) : undefined;
    if (!waiter) return;
    this.pending.delete(response.id as number);
    if (response.ok) {
      waiter.resolve(response.result);
    } else {
      waiter.reject(new Error(response.error ?? "kernel error"));
    }
  }

  private failAll(err: Error): void {
    this.exitError = err;
    for (const waiter of this.pending.values()) waiter.reject(err);
    this.pending.clear();
  }

  private request(op: string, args: Record<string, unknown>): Promise<unknown> {
    if (this.exitError) return Promise.reject(this.exitError);
    const id = this.nextId++;
    const payload = JSON.stringify({ id, op, ...args });
    return new Promise((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.child.stdin.write(payload + "\n", (err) => {
        if (err) {
          this.pending.delete(id);
          reject(err);
        }
      });
    });
  }

  /** Name of the kernel backend on the Python side ("cython" or "python"). */
  async backend(): Promise<string> {
    return (await this.request("backend", {})) as string;
  }

  /** Pairwise exact IoU between two batches of quads (flat N*8 and M*8). */
  async batchQuadIou(a: Float64Array, b: Float64Array): Promise<Matrix> {
    const rowsA = quadRows(a, "a");
    const rowsB = quadRows(b, "b");
    const raw = (await this.request("batch_quad_iou", {
      a: rowsA,
      b: rowsB,
    })) as number[][];
    const out = new Float64Array(rowsA.length * rowsB.length);
    raw.forEach((row, i) => out.set(row, i * rowsB.length));
    return matrix(rowsA.length, rowsB.length, out);
  }

  /** Exact IoU of a single pair of quads. */
  async quadIou(a: Float64Array, b: Float64Array): Promise<number> {
    if (a.length !== 8 || b.length !== 8) {
      throw new RangeError("quadIou takes two length-8 arrays");
    }
    return (await this.request("quad_iou", {
      a: Array.from(a),
      b: Array.from(b),
    })) as number;
  }

  /** Quad-centerness of each point (flat M*2); all points must lie strictly
   * inside the quad, otherwise the promise rejects naming the offending
   * index. */
  async batchCenterness(points: Float64Array, quad: Float64Array): Promise<Float64Array> {
    if (quad.length !== 8) {
      throw new RangeError(`quad must hold 8 coordinates, got ${quad.length}`);
    }
    const raw = (await this.request("batch_centerness", {
      points: pointRows(points),
      quad: Array.from(quad),
    })) as number[];
    return Float64Array.from(raw);
  }

  /** Soft-scale pyramid assignment of one object area: one or two adjacent
   * levels whose factors sum to 1. */
  async softScale(area: number, spec?: PyramidSpec): Promise<LevelWeight[]> {
    const raw = (await this.request("soft_scale", {
      area,
      spec: specPayload(spec),
    })) as [number, number][];
    return raw.map(([level, factor]) => ({ level, factor }));
  }

  /** Batched soft-scale over many areas. */
  async softScaleBatch(
    areas: number[] | Float64Array,
    spec?: PyramidSpec,
  ): Promise<LevelWeight[][]> {
    const raw = (await this.request("soft_scale", {
      areas: Array.from(areas),
      spec: specPayload(spec),
    })) as [number, number][][];
    return raw.map((lws) => lws.map(([level, factor]) => ({ level, factor })));
  }

  /** Per-pixel training targets for one image's ground-truth quads
   * (flat N*8). */
  async assignTargets(
    quads: Float64Array,
    imageW: number,
    imageH: number,
    alpha = 0.3,
    spec?: PyramidSpec,
  ): Promise<AssignmentTarget[]> {
    const raw = (await this.request("assign_targets", {
      quads: quadRows(quads, "quads"),
      image_w: imageW,
      image_h: imageH,
      alpha,
      spec: specPayload(spec),
    })) as Array<{
      level: number;
      grid_y: number;
      grid_x: number;
      weight: number;
      offsets: number[];
      gt_index: number;
    }>;
    return raw.map((t) => ({
      level: t.level,
      gridY: t.grid_y,
      gridX: t.grid_x,
      weight: t.weight,
      offsets: Float64Array.from(t.offsets),
      gtIndex: t.gt_index,
    }));
  }

  /** Minimum-cost assignment over a rectangular cost matrix: exactly
   * min(rows, cols) disjoint [row, col] pairs at the optimal total. */
  async hungarian(cost: Matrix): Promise<Array<[number, number]>> {
    const rows: number[][] = [];
    for (let i = 0; i < cost.rows; i++) {
      rows.push(Array.from(cost.data.subarray(i * cost.cols, (i + 1) * cost.cols)));
    }
    const raw = (await this.request("hungarian", { cost: rows })) as number[][];
    return raw.map(([i, j]) => [i, j]);
  }

  /** Terminate the kernel subprocess; pending requests are rejected. */
  async close(): Promise<void> {
    this.child.stdin.end();
    await new Promise<void>((resolve) => {
      if (this.child.exitCode !== null) return resolve();
      this.child.once("exit", () => resolve());
      setTimeout(() => {
        this.child.kill();
        resolve();
      }, 2000).unref();
    });
    this.failAll(new Error("kernel client closed"));
  }
}
