/**
 * DOM wiring for the arrow studio page.  All logic lives in the imported
 * modules so it can be unit-tested without a browser.
 */

import { PlacementClient } from "./api.js";
import { ArrowTool } from "./arrowTool.js";
import { StudioController } from "./controller.js";
import {
  SessionState,
  metersToSlider,
  sliderToMeters,
} from "./session.js";
import { ViewTransform, arrowToImage, imageToCanvas } from "./transform.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8000";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function boot(): Promise<void> {
  const client = new PlacementClient(SERVICE_URL);
  const session = new SessionState();
  const controller = new StudioController(client, session);
  const tool = new ArrowTool();

  const canvas = el<HTMLCanvasElement>("scene-canvas");
  const ctx = canvas.getContext("2d")!;
  const sceneSelect = el<HTMLSelectElement>("scene-select");
  const meshSelect = el<HTMLSelectElement>("mesh-select");
  const scaleSlider = el<HTMLInputElement>("scale-slider");
  const scaleLabel = el<HTMLSpanElement>("scale-label");
  const statusLine = el<HTMLDivElement>("status-line");
  const readout = el<HTMLPreElement>("placement-readout");
  const historyList = el<HTMLUListElement>("history-list");

  let sceneImage: HTMLImageElement | null = null;
  let previewImage: HTMLImageElement | null = null;
  let view: ViewTransform = { zoom: 1, offsetX: 0, offsetY: 0 };

  function redraw(): void {
    ctx.fillStyle = "#202028";
    ctx.fillRect(0, 0, canvas.width, canvas.height);
    const base = previewImage ?? sceneImage;
    if (base) {
      ctx.drawImage(
        base,
        view.offsetX,
        view.offsetY,
        base.naturalWidth * view.zoom,
        base.naturalHeight * view.zoom,
      );
    }
    const band =
      tool.rubberBand() ??
      (session.currentArrow
        ? {
            start: imageToCanvas(session.currentArrow.start, view),
            end: imageToCanvas(session.currentArrow.end, view),
          }
        : null);
    if (band) {
      ctx.strokeStyle = "#ff5050";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(band.start.x, band.start.y);
      ctx.lineTo(band.end.x, band.end.y);
      ctx.stroke();
      const angle = Math.atan2(
        band.end.y - band.start.y,
        band.end.x - band.start.x,
      );
      ctx.beginPath();
      ctx.moveTo(band.end.x, band.end.y);
      ctx.lineTo(
        band.end.x - 10 * Math.cos(angle - 0.4),
        band.end.y - 10 * Math.sin(angle - 0.4),
      );
      ctx.moveTo(band.end.x, band.end.y);
      ctx.lineTo(
        band.end.x - 10 * Math.cos(angle + 0.4),
        band.end.y - 10 * Math.sin(angle + 0.4),
      );
      ctx.stroke();
    }
  }

  function fitView(): void {
    if (!sceneImage) return;
    const zoom = Math.min(
      canvas.width / sceneImage.naturalWidth,
      canvas.height / sceneImage.naturalHeight,
    );
    view = {
      zoom,
      offsetX: (canvas.width - sceneImage.naturalWidth * zoom) / 2,
      offsetY: (canvas.height - sceneImage.naturalHeight * zoom) / 2,
    };
  }

  async function loadScene(sceneId: string): Promise<void> {
    session.sceneId = sceneId;
    previewImage = null;
    sceneImage = new Image();
    sceneImage.crossOrigin = "anonymous";
    sceneImage.src = client.sceneImageUrl(sceneId);
    await sceneImage.decode();
    fitView();
    redraw();
  }

  function setStatus(text: string, isError: boolean): void {
    statusLine.textContent = text;
    statusLine.className = isError ? "status error" : "status";
  }

  function canvasPoint(ev: PointerEvent): { x: number; y: number } {
    const rect = canvas.getBoundingClientRect();
    return {
      x: ((ev.clientX - rect.left) * canvas.width) / rect.width,
      y: ((ev.clientY - rect.top) * canvas.height) / rect.height,
    };
  }

  canvas.addEventListener("pointerdown", (ev) => {
    canvas.setPointerCapture(ev.pointerId);
    tool.pointerDown(canvasPoint(ev));
    redraw();
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (tool.dragging) {
      tool.pointerMove(canvasPoint(ev));
      redraw();
    }
  });
  canvas.addEventListener("pointerup", async (ev) => {
    const canvasArrow = tool.pointerUp(canvasPoint(ev));
    if (!canvasArrow) {
      redraw();
      return; // zero-length click, discarded silently
    }
    const arrow = arrowToImage(canvasArrow, view);
    setStatus("planning placement…", false);
    const outcome = await controller.submitArrow(arrow);
    if (outcome.ok && outcome.placement && outcome.previewPng) {
      const blob = new Blob([outcome.previewPng.slice().buffer], { type: "image/png" });
      previewImage = new Image();
      previewImage.src = URL.createObjectURL(blob);
      await previewImage.decode();
      const p = outcome.placement;
      readout.textContent = [
        `position  ${p.position.map((v) => v.toFixed(3)).join(", ")}`,
        `forward   ${p.forward_3d.map((v) => v.toFixed(3)).join(", ")}`,
        `rotation  ${p.rotation
          .map((row) => row.map((v) => v.toFixed(3)).join(" "))
          .join(" | ")}`,
      ].join("\n");
      const item = document.createElement("li");
      item.textContent = `#${session.history.length} scale ${session.scaleMeters.toFixed(2)} m`;
      historyList.appendChild(item);
      setStatus("placed", false);
    } else if (outcome.errorCode !== "superseded") {
      setStatus(`${outcome.errorCode}: ${outcome.errorMessage}`, true);
    }
    redraw();
  });

  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const factor = ev.deltaY < 0 ? 1.25 : 0.8;
    const p = canvasPoint(ev as unknown as PointerEvent);
    view = {
      zoom: view.zoom * factor,
      offsetX: p.x - (p.x - view.offsetX) * factor,
      offsetY: p.y - (p.y - view.offsetY) * factor,
    };
    redraw();
  });

  scaleSlider.addEventListener("input", () => {
    session.scaleMeters = sliderToMeters(Number(scaleSlider.value));
    scaleLabel.textContent = `${session.scaleMeters.toFixed(2)} m`;
  });
  scaleSlider.value = String(metersToSlider(session.scaleMeters));
  scaleLabel.textContent = `${session.scaleMeters.toFixed(2)} m`;

  sceneSelect.addEventListener("change", () => loadScene(sceneSelect.value));
  meshSelect.addEventListener("change", () => {
    session.meshId = meshSelect.value;
  });

  const [scenes, meshes] = await Promise.all([
    client.listScenes(),
    client.listMeshes(),
  ]);
  for (const s of scenes) {
    sceneSelect.add(new Option(s, s));
  }
  for (const m of meshes) {
    meshSelect.add(new Option(m, m));
  }
  if (scenes.length) await loadScene(scenes[0]);
  if (meshes.length) {
    session.meshId = meshes[0];
    meshSelect.value = meshes[0];
  }
  setStatus("draw an arrow to place the object", false);
}

boot().catch((err) => {
  const line = document.getElementById("status-line");
  if (line) line.textContent = `failed to start: ${err}`;
});
