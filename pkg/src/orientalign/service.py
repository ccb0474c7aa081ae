"""HTTP service exposing placement planning and previews to the arrow UI.

Scenes are directories {image.png, depth.dmap, intrinsics.json} under
scenes_dir; meshes are .obj/.ply files under meshes_dir.  Assets are loaded
once and shared read-only; the service never mutates either directory.
"""

import io
import os
from dataclasses import dataclass
from threading import Lock

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse, Response

from .meshio import MeshError, load_mesh, normalize_mesh
from .placement import (
    Arrow2D,
    Placement,
    PlacementError,
    load_scene_bundle,
    plan_placement,
    render_placement_preview,
)


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    scenes_dir: str = "scenes"
    meshes_dir: str = "meshes"
    max_image_bytes: int = 32 * 1024 * 1024

    def __post_init__(self):
        if self.max_image_bytes <= 0:
            raise ValueError("max_image_bytes must be positive")
        for d in (self.scenes_dir, self.meshes_dir):
            if not os.path.isdir(d):
                raise ValueError(f"directory does not exist: {d}")


def _error(status, code, message):
    return JSONResponse(status_code=status,
                        content={"code": code, "message": message})


class _AssetCache:
    def __init__(self, config):
        self.config = config
        self._scenes = {}
        self._meshes = {}
        self._lock = Lock()

    def scene_ids(self):
        return sorted(
            d for d in os.listdir(self.config.scenes_dir)
            if os.path.isfile(os.path.join(self.config.scenes_dir, d, "image.png"))
        )

    def mesh_ids(self):
        return sorted(
            os.path.splitext(f)[0]
            for f in os.listdir(self.config.meshes_dir)
            if f.lower().endswith((".obj", ".ply"))
        )

    def scene(self, scene_id):
        with self._lock:
            if scene_id not in self._scenes:
                if scene_id not in self.scene_ids():
                    raise KeyError(scene_id)
                self._scenes[scene_id] = load_scene_bundle(
                    os.path.join(self.config.scenes_dir, scene_id))
            return self._scenes[scene_id]

    def mesh(self, mesh_id):
        with self._lock:
            if mesh_id not in self._meshes:
                path = None
                for ext in (".obj", ".ply"):
                    cand = os.path.join(self.config.meshes_dir, mesh_id + ext)
                    if os.path.isfile(cand):
                        path = cand
                        break
                if path is None:
                    raise KeyError(mesh_id)
                self._meshes[mesh_id] = normalize_mesh(load_mesh(path))
            return self._meshes[mesh_id]


def create_app(config):
    app = FastAPI(title="orientalign placement service")
    cache = _AssetCache(config)

    @app.get("/scenes")
    def list_scenes():
        return cache.scene_ids()

    @app.get("/meshes")
    def list_meshes():
        return cache.mesh_ids()

    @app.get("/scenes/{scene_id}/image.png")
    def scene_image(scene_id: str):
        from PIL import Image

        try:
            scene = cache.scene(scene_id)
        except (KeyError, OSError, PlacementError):
            return _error(404, "unknown_scene", f"no such scene: {scene_id}")
        buf = io.BytesIO()
        Image.fromarray(scene.image).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    def _parse_arrow(body):
        arrow = body.get("arrow")
        if not isinstance(arrow, dict) or not all(
                k in arrow for k in ("x1", "y1", "x2", "y2")):
            raise PlacementError("arrow must be {x1, y1, x2, y2}")
        try:
            return Arrow2D(
                (float(arrow["x1"]), float(arrow["y1"])),
                (float(arrow["x2"]), float(arrow["y2"])))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, PlacementError):
                raise
            raise PlacementError(f"malformed arrow coordinates: {exc}")

    @app.post("/plan-placement")
    def plan(body: dict):
        scene_id = body.get("scene_id")
        if not scene_id:
            return _error(400, "missing_scene_id", "scene_id is required")
        try:
            scene = cache.scene(scene_id)
        except (KeyError, OSError):
            return _error(404, "unknown_scene", f"no such scene: {scene_id}")
        try:
            arrow = _parse_arrow(body)
            scale = float(body.get("scale", 0))
            region = body.get("region", "whole-image")
            radius = float(body.get("radius_px", 64))
            result = plan_placement(scene, arrow, scale, region=region,
                                    radius_px=radius)
        except PlacementError as exc:
            msg = str(exc)
            if "outside image bounds" in msg:
                code = "arrow_out_of_bounds"
            elif "degenerate" in msg or "start equals end" in msg:
                code = "degenerate_arrow"
            elif "scale" in msg:
                code = "invalid_scale"
            else:
                code = "placement_failed"
            return _error(400, code, msg)
        except (TypeError, ValueError) as exc:
            return _error(400, "malformed_request", str(exc))
        return result.to_dict()

    @app.post("/preview")
    def preview(body: dict):
        scene_id = body.get("scene_id")
        mesh_id = body.get("mesh_id")
        try:
            scene = cache.scene(scene_id)
        except (KeyError, OSError, TypeError):
            return _error(404, "unknown_scene", f"no such scene: {scene_id}")
        try:
            mesh = cache.mesh(mesh_id)
        except (KeyError, MeshError, TypeError):
            return _error(404, "unknown_mesh", f"no such mesh: {mesh_id}")
        try:
            placement = Placement.from_dict(body["placement"])
        except (KeyError, TypeError, ValueError) as exc:
            return _error(400, "malformed_placement", str(exc))
        image = render_placement_preview(scene, mesh, placement)
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(image).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    return app


def run(config):
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
