/**
 * Typed client for the placement service.
 *
 * The UI never computes geometry itself; every placement comes from the
 * service.  At most one placement request is in flight: starting a new one
 * aborts the previous (stale drags never overwrite newer results).
 */

import { CanvasArrow } from "./transform.js";

export interface PlaneJson {
  normal: number[];
  offset: number;
}

export interface PlacementJson {
  position: number[];
  rotation: number[][];
  scale: number;
  forward_3d: number[];
  plane: PlaneJson;
  twist_defaulted: boolean;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class PlacementClient {
  private inflight: AbortController | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async listScenes(): Promise<string[]> {
    return this.getJson("/scenes");
  }

  async listMeshes(): Promise<string[]> {
    return this.getJson("/meshes");
  }

  sceneImageUrl(sceneId: string): string {
    return `${this.baseUrl}/scenes/${encodeURIComponent(sceneId)}/image.png`;
  }

  /**
   * POST /plan-placement.  Aborts any placement request still in flight.
   */
  async planPlacement(
    sceneId: string,
    arrow: CanvasArrow,
    scale: number,
  ): Promise<PlacementJson> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/plan-placement`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({
          scene_id: sceneId,
          arrow: {
            x1: arrow.start.x,
            y1: arrow.start.y,
            x2: arrow.end.x,
            y2: arrow.end.y,
          },
          scale,
        }),
        signal: controller.signal,
      });
      if (!resp.ok) {
        throw await this.toServiceError(resp);
      }
      return (await resp.json()) as PlacementJson;
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }

  /** POST /preview; resolves to PNG bytes. */
  async preview(
    sceneId: string,
    meshId: string,
    placement: PlacementJson,
  ): Promise<Uint8Array> {
    const resp = await this.fetchImpl(`${this.baseUrl}/preview`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        scene_id: sceneId,
        mesh_id: meshId,
        placement,
      }),
    });
    if (!resp.ok) {
      throw await this.toServiceError(resp);
    }
    return new Uint8Array(await resp.arrayBuffer());
  }

  get hasInflight(): boolean {
    return this.inflight !== null;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw await this.toServiceError(resp);
    }
    return (await resp.json()) as T;
  }

  private async toServiceError(resp: Response): Promise<ServiceError> {
    let code = "unknown_error";
    let message = `HTTP ${resp.status}`;
    try {
      const body = (await resp.json()) as { code?: string; message?: string };
      if (body.code) code = body.code;
      if (body.message) message = body.message;
    } catch {
      // non-JSON error body; keep defaults
    }
    return new ServiceError(resp.status, code, message);
  }
}
