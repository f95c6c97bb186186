/** Dense row-major matrix backed by a Float64Array. */
export interface Matrix {
  rows: number;
  cols: number;
  data: Float64Array;
}

/** One pyramid level and its loss-reweighting factor. */
export interface LevelWeight {
  level: number;
  factor: number;
}

/** Feature-pyramid configuration (all fields optional, kernel defaults apply). */
export interface PyramidSpec {
  minLevel?: number;
  maxLevel?: number;
  lOrg?: number;
  pretrainSize?: number;
}

/** One positive training location emitted by the target assigner. */
export interface AssignmentTarget {
  level: number;
  gridY: number;
  gridX: number;
  weight: number;
  /** 8 stride-normalized corner offsets: (dx, dy) for tl, tr, br, bl. */
  offsets: Float64Array;
  gtIndex: number;
}

export function matrix(rows: number, cols: number, data: Float64Array): Matrix {
  if (data.length !== rows * cols) {
    throw new RangeError(
      `matrix data has ${data.length} entries, expected ${rows}x${cols}`,
    );
  }
  return { rows, cols, data };
}
