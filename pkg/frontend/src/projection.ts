// Top-down (x, y) projection between world meters and canvas pixels.
// Screen y points down; world y points up.

import type { GridSummary } from "./types.js";

export class MapProjection {
  readonly scale: number;
  private readonly ox: number;
  private readonly oy: number;

  constructor(
    readonly grid: GridSummary,
    readonly widthPx: number,
    readonly heightPx: number,
    readonly marginPx = 12,
  ) {
    const wm = grid.dims[0] * grid.resolution;
    const hm = grid.dims[1] * grid.resolution;
    this.scale = Math.min((widthPx - 2 * marginPx) / wm, (heightPx - 2 * marginPx) / hm);
    this.ox = marginPx;
    this.oy = heightPx - marginPx;
  }

  worldToScreen(x: number, y: number): [number, number] {
    return [
      this.ox + (x - this.grid.origin[0]) * this.scale,
      this.oy - (y - this.grid.origin[1]) * this.scale,
    ];
  }

  /** Inverse of worldToScreen; null when the point is outside the grid. */
  screenToWorld(sx: number, sy: number): [number, number] | null {
    const x = (sx - this.ox) / this.scale + this.grid.origin[0];
    const y = (this.oy - sy) / this.scale + this.grid.origin[1];
    const maxX = this.grid.origin[0] + this.grid.dims[0] * this.grid.resolution;
    const maxY = this.grid.origin[1] + this.grid.dims[1] * this.grid.resolution;
    if (x < this.grid.origin[0] || x > maxX || y < this.grid.origin[1] || y > maxY) {
      return null;
    }
    return [x, y];
  }

  /** World z of the center of a grid z-slice, where clicked tasks land. */
  sliceZ(slice: number): number {
    return this.grid.origin[2] + (slice + 0.5) * this.grid.resolution;
  }

  cellSizePx(): number {
    return this.grid.resolution * this.scale;
  }
}
