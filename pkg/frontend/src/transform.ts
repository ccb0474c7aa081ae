/**
 * Canvas <-> image coordinate mapping.
 *
 * The canvas shows the scene image scaled by `zoom` and panned by
 * `offset` (in canvas pixels).  Arrows are always transmitted to the
 * service in image-pixel coordinates, so the mapping must be exact and
 * invertible: the same drawn arrow yields the same request regardless of
 * how the user has zoomed or resized the canvas.
 */

export interface Point {
  readonly x: number;
  readonly y: number;
}

export interface CanvasArrow {
  readonly start: Point;
  readonly end: Point;
}

export interface ViewTransform {
  /** Canvas pixels per image pixel. */
  readonly zoom: number;
  /** Canvas position of the image origin. */
  readonly offsetX: number;
  readonly offsetY: number;
}

export function canvasToImage(p: Point, t: ViewTransform): Point {
  if (t.zoom <= 0 || !Number.isFinite(t.zoom)) {
    throw new Error(`invalid zoom: ${t.zoom}`);
  }
  return {
    x: (p.x - t.offsetX) / t.zoom,
    y: (p.y - t.offsetY) / t.zoom,
  };
}

export function imageToCanvas(p: Point, t: ViewTransform): Point {
  if (t.zoom <= 0 || !Number.isFinite(t.zoom)) {
    throw new Error(`invalid zoom: ${t.zoom}`);
  }
  return {
    x: p.x * t.zoom + t.offsetX,
    y: p.y * t.zoom + t.offsetY,
  };
}

/** Convert a canvas-space arrow into the image-space arrow sent to the service. */
export function arrowToImage(arrow: CanvasArrow, t: ViewTransform): CanvasArrow {
  return {
    start: canvasToImage(arrow.start, t),
    end: canvasToImage(arrow.end, t),
  };
}
