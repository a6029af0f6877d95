/**
 * The editable mask layer: a boolean grid at full image resolution with a
 * round brush and a bounded undo stack. The image pixels themselves are
 * never touched here; only this grid is editable, and it exports as a
 * strictly binary P5 (painted = 255, unpainted = 0).
 */

import { encodePgm, decodePgm } from "./netpbm.js";

export const UNDO_LIMIT = 50;

export class CanvasMask {
  readonly width: number;
  readonly height: number;
  brushRadius: number;
  private grid: Uint8Array;
  private undoStack: Uint8Array[] = [];

  constructor(width: number, height: number, brushRadius = 8) {
    if (width < 1 || height < 1) throw new Error(`bad mask size ${width}x${height}`);
    this.width = width;
    this.height = height;
    this.brushRadius = brushRadius;
    this.grid = new Uint8Array(width * height);
  }

  get(x: number, y: number): boolean {
    return this.grid[y * this.width + x] !== 0;
  }

  isEmpty(): boolean {
    return !this.grid.some((v) => v !== 0);
  }

  paintedFraction(): number {
    let painted = 0;
    for (const v of this.grid) painted += v;
    return painted / this.grid.length;
  }

  /** Snapshot the grid so the whole following stroke undoes as one step. */
  beginStroke(): void {
    this.undoStack.push(this.grid.slice());
    if (this.undoStack.length > UNDO_LIMIT) this.undoStack.shift();
  }

  /** Stamp the round brush; value=true paints, false erases. */
  stamp(cx: number, cy: number, value = true): void {
    const r = this.brushRadius;
    const r2 = r * r;
    const x0 = Math.max(0, Math.ceil(cx - r));
    const x1 = Math.min(this.width - 1, Math.floor(cx + r));
    const y0 = Math.max(0, Math.ceil(cy - r));
    const y1 = Math.min(this.height - 1, Math.floor(cy + r));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          this.grid[y * this.width + x] = value ? 1 : 0;
        }
      }
    }
  }

  /** Stamp along a segment so fast pointer moves leave no gaps. */
  strokeLine(x0: number, y0: number, x1: number, y1: number, value = true): void {
    const steps = Math.max(1, Math.ceil(Math.hypot(x1 - x0, y1 - y0)));
    for (let i = 0; i <= steps; i++) {
      const t = i / steps;
      this.stamp(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, value);
    }
  }

  undo(): boolean {
    const prev = this.undoStack.pop();
    if (!prev) return false;
    this.grid = prev;
    return true;
  }

  undoDepth(): number {
    return this.undoStack.length;
  }

  clear(): void {
    this.beginStroke();
    this.grid.fill(0);
  }

  /** Strictly binary P5 bytes: painted 255, unpainted 0. */
  toPgm(): Uint8Array {
    const pixels = new Uint8Array(this.grid.length);
    for (let i = 0; i < this.grid.length; i++) pixels[i] = this.grid[i] ? 255 : 0;
    return encodePgm({ width: this.width, height: this.height, pixels });
  }

  /** Rebuild from P5 bytes using the engine's threshold (>= 128 is inside). */
  static fromPgm(data: Uint8Array, brushRadius = 8): CanvasMask {
    const img = decodePgm(data);
    const mask = new CanvasMask(img.width, img.height, brushRadius);
    for (let i = 0; i < img.pixels.length; i++) {
      if (img.pixels[i] >= 128) mask.grid[i] = 1;
    }
    return mask;
  }
}
