/**
 * Orchestrates one placement round trip: plan, preview, record history.
 *
 * Service errors surface as an inline message while the drawn arrow and the
 * existing history are preserved, so the user can adjust and resubmit.
 */

import { PlacementClient, PlacementJson, ServiceError } from "./api.js";
import { SessionState } from "./session.js";
import { CanvasArrow } from "./transform.js";

export interface PlacementOutcome {
  readonly ok: boolean;
  readonly placement?: PlacementJson;
  readonly previewPng?: Uint8Array;
  readonly errorCode?: string;
  readonly errorMessage?: string;
}

export class StudioController {
  constructor(
    private readonly client: PlacementClient,
    readonly session: SessionState,
  ) {}

  /**
   * Submit an image-space arrow.  On success the (arrow, placement,
   * preview) triple is appended to history; on failure the session keeps
   * the arrow and history untouched and records the inline error.
   */
  async submitArrow(arrow: CanvasArrow): Promise<PlacementOutcome> {
    const { sceneId, meshId, scaleMeters } = this.session;
    if (sceneId === null || meshId === null) {
      return this.fail(arrow, "no_selection", "select a scene and a mesh first");
    }
    this.session.currentArrow = arrow;
    try {
      const placement = await this.client.planPlacement(
        sceneId,
        arrow,
        scaleMeters,
      );
      const previewPng = await this.client.preview(sceneId, meshId, placement);
      this.session.lastError = null;
      this.session.appendHistory({ arrow, placement, previewPng });
      return { ok: true, placement, previewPng };
    } catch (err) {
      if (err instanceof ServiceError) {
        return this.fail(arrow, err.code, err.message);
      }
      if (err instanceof DOMException && err.name === "AbortError") {
        // superseded by a newer drag; not an error the user needs to see
        return { ok: false, errorCode: "superseded", errorMessage: "" };
      }
      const message = err instanceof Error ? err.message : String(err);
      return this.fail(arrow, "network_error", message);
    }
  }

  private fail(
    arrow: CanvasArrow,
    code: string,
    message: string,
  ): PlacementOutcome {
    this.session.currentArrow = arrow;
    this.session.lastError = `${code}: ${message}`;
    return { ok: false, errorCode: code, errorMessage: message };
  }
}
