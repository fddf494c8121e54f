import type { MorphAssets, MorphPayload } from "./types";

export interface GridBlend {
  lo: number;
  hi: number;
  alpha: number;
}

/**
 * Bracketing grid samples for a weight delta, clamped to the grid ends.
 * alpha = 0 selects the lo buffer, alpha = 1 the hi buffer.
 */
export function blendForDelta(grid: number[], deltaKg: number): GridBlend {
  if (grid.length === 0) throw new Error("empty morph grid");
  if (deltaKg <= grid[0]) return { lo: 0, hi: 0, alpha: 0 };
  const last = grid.length - 1;
  if (deltaKg >= grid[last]) return { lo: last, hi: last, alpha: 0 };
  let hi = 1;
  while (grid[hi] < deltaKg) hi++;
  const lo = hi - 1;
  const span = grid[hi] - grid[lo];
  return { lo, hi, alpha: span > 0 ? (deltaKg - grid[lo]) / span : 0 };
}

/** Flat xyz vertex buffer interpolated between two grid samples. */
export function blendBuffers(assets: MorphAssets, blend: GridBlend): Float64Array {
  const a = assets.buffers[blend.lo];
  const b = assets.buffers[blend.hi];
  const out = new Float64Array(assets.vertex_count * 3);
  const w = blend.alpha;
  for (let v = 0; v < assets.vertex_count; v++) {
    for (let c = 0; c < 3; c++) {
      out[3 * v + c] = (1 - w) * a[v][c] + w * b[v][c];
    }
  }
  return out;
}

/** Displayed mesh for an absolute weight; out-of-range weights clamp. */
export function renderMorph(assets: MorphAssets, weightKg: number): Float64Array {
  const delta = weightKg - assets.base_weight_kg;
  return blendBuffers(assets, blendForDelta(assets.delta_grid_kg, delta));
}

/** Displayed mesh for a server-sent presentation payload. */
export function renderPayload(assets: MorphAssets, payload: MorphPayload): Float64Array {
  if (payload.type !== "morph") throw new Error(`not a morph payload: ${payload.type}`);
  const last = assets.delta_grid_kg.length - 1;
  if (payload.lo < 0 || payload.hi > last || payload.lo > payload.hi) {
    throw new Error(`morph indices out of range: ${payload.lo}..${payload.hi}`);
  }
  return blendBuffers(assets, payload);
}

/**
 * Weight shown on screen between authoritative server ticks.
 *
 * The display converges linearly from the previous authoritative weight to the
 * latest one over settleMs, so it is a pure function of the last two ticks and
 * elapsed time; replaying the same ticks reproduces the same display.
 */
export function displayedWeight(
  prevKg: number, latestKg: number, msSinceTick: number, settleMs = 150,
): number {
  if (msSinceTick >= settleMs) return latestKg;
  const f = Math.max(0, msSinceTick) / settleMs;
  return prevKg + f * (latestKg - prevKg);
}
