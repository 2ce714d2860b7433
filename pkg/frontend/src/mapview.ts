/**
 * Top-down 2D map projection: per (i, j) column keep the voxel with the
 * highest occupancy probability (z-slice max-occupancy), which is all the
 * two-room scenario needs.
 */

import type { VoxelRecord } from "./api.js";

export interface MapCell {
  x: number;
  y: number;
  p: number;
}

export function topDownProjection(voxels: VoxelRecord[]): MapCell[] {
  const best = new Map<string, MapCell>();
  for (const v of voxels) {
    const key = `${v.i},${v.j}`;
    const cur = best.get(key);
    if (cur === undefined || v.p > cur.p) {
      best.set(key, { x: v.x, y: v.y, p: v.p });
    }
  }
  return [...best.values()];
}

export function mapBounds(cells: MapCell[]) {
  if (cells.length === 0) return { minX: 0, maxX: 1, minY: 0, maxY: 1 };
  let minX = Infinity,
    maxX = -Infinity,
    minY = Infinity,
    maxY = -Infinity;
  for (const c of cells) {
    minX = Math.min(minX, c.x);
    maxX = Math.max(maxX, c.x);
    minY = Math.min(minY, c.y);
    maxY = Math.max(maxY, c.y);
  }
  return { minX, maxX, minY, maxY };
}
