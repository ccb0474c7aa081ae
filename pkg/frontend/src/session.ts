/**
 * Per-tab session state: selections, the log-scale size slider, and the
 * append-only placement history that powers the what-if/redraw loop.
 */

import { PlacementJson } from "./api.js";
import { CanvasArrow } from "./transform.js";

export const SCALE_MIN_M = 0.05;
export const SCALE_MAX_M = 3.0;
export const SCALE_DEFAULT_M = 0.5;

/** Slider position in [0, 1] -> meters on a log scale. */
export function sliderToMeters(position: number): number {
  const clamped = Math.min(1, Math.max(0, position));
  const logMin = Math.log(SCALE_MIN_M);
  const logMax = Math.log(SCALE_MAX_M);
  return Math.exp(logMin + clamped * (logMax - logMin));
}

/** Meters -> slider position in [0, 1] (inverse of sliderToMeters). */
export function metersToSlider(meters: number): number {
  const clamped = Math.min(SCALE_MAX_M, Math.max(SCALE_MIN_M, meters));
  const logMin = Math.log(SCALE_MIN_M);
  const logMax = Math.log(SCALE_MAX_M);
  return (Math.log(clamped) - logMin) / (logMax - logMin);
}

export interface HistoryEntry {
  readonly arrow: CanvasArrow; // image-pixel coordinates
  readonly placement: PlacementJson;
  readonly previewPng: Uint8Array;
}

export class SessionState {
  sceneId: string | null = null;
  meshId: string | null = null;
  scaleMeters: number = SCALE_DEFAULT_M;
  /** Last drawn arrow in image-pixel coordinates; kept across errors. */
  currentArrow: CanvasArrow | null = null;
  /** Inline error from the latest failed request, if any. */
  lastError: string | null = null;

  private readonly entries: HistoryEntry[] = [];

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  appendHistory(entry: HistoryEntry): void {
    this.entries.push(entry);
  }
}
