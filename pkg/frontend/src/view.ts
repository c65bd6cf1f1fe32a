/** Metric-space view transform. The scene is drawn top-down with the
 * sensor's X axis (forward) pointing up and Y (left) pointing left on
 * screen; 1 m maps to a constant pixel count at zoom 1, so circle radii
 * read truthfully. */

export interface Point {
  x: number;
  y: number;
}

export class ViewTransform {
  constructor(
    public canvasWidth: number,
    public canvasHeight: number,
    /** Pixels per meter at zoom 1. */
    public pxPerMeter = 50,
    public zoom = 1,
    /** Pan offset in screen pixels. */
    public panX = 0,
    public panY = 0
  ) {}

  get scale(): number {
    return this.pxPerMeter * this.zoom;
  }

  /** World (x forward, y left) to canvas pixels. */
  toScreen(p: Point): Point {
    return {
      x: this.canvasWidth / 2 - p.y * this.scale + this.panX,
      y: this.canvasHeight / 2 - p.x * this.scale + this.panY,
    };
  }

  /** Canvas pixels back to world coordinates. */
  toWorld(s: Point): Point {
    return {
      x: (this.canvasHeight / 2 - s.y + this.panY) / this.scale,
      y: (this.canvasWidth / 2 - s.x + this.panX) / this.scale,
    };
  }

  /** Meters to pixels (for radii). */
  lengthToScreen(meters: number): number {
    return meters * this.scale;
  }

  zoomBy(factor: number): void {
    this.zoom = Math.min(20, Math.max(0.1, this.zoom * factor));
  }
}
