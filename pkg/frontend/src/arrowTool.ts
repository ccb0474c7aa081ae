/**
 * Press-drag-release arrow drawing with live rubber-banding.
 *
 * The tool works purely in canvas coordinates; callers convert the
 * finished arrow to image coordinates with the current view transform.
 * A click without a drag (zero-length arrow) is discarded silently.
 */

import { CanvasArrow, Point } from "./transform.js";

export class ArrowTool {
  private anchor: Point | null = null;
  private cursor: Point | null = null;

  pointerDown(p: Point): void {
    this.anchor = { ...p };
    this.cursor = { ...p };
  }

  pointerMove(p: Point): void {
    if (this.anchor !== null) {
      this.cursor = { ...p };
    }
  }

  /** Returns the finished arrow, or null for a zero-length click. */
  pointerUp(p: Point): CanvasArrow | null {
    if (this.anchor === null) {
      return null;
    }
    const arrow: CanvasArrow = { start: this.anchor, end: { ...p } };
    this.anchor = null;
    this.cursor = null;
    if (arrow.start.x === arrow.end.x && arrow.start.y === arrow.end.y) {
      return null;
    }
    return arrow;
  }

  /** Current rubber-band segment while dragging, for live rendering. */
  rubberBand(): CanvasArrow | null {
    if (this.anchor === null || this.cursor === null) {
      return null;
    }
    return { start: this.anchor, end: this.cursor };
  }

  get dragging(): boolean {
    return this.anchor !== null;
  }
}
