"""Arrow-based object placement: depth unprojection, plane fitting, and the
2D (image + depth) and 3D arrow variants.

Depth maps use the DMAP container: magic "DMAP", uint32-LE width and height,
then width*height float32-LE row-major depths in meters; NaN or <= 0 marks
invalid pixels.
"""

import json
import os
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    GeometryError,
    Plane,
    Ray,
    align_vectors,
    fit_plane_least_squares,
    pixel_to_ray,
    ray_plane_intersect,
    rotation_from_axis_angle,
)
from .meshio import FORWARD_AXIS, UP_AXIS
from .render import Camera, CameraIntrinsics, RenderOutput, render

DMAP_MAGIC = b"DMAP"


class PlacementError(ValueError):
    pass


@dataclass
class DepthMap:
    values: np.ndarray  # H x W float, meters

    def __post_init__(self):
        # float64 in memory; the DMAP container quantizes to float32 on disk
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise PlacementError("depth map must be 2D")

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def validity(self):
        v = self.values
        return np.isfinite(v) & (v > 0)


def write_dmap(depth, path):
    values = np.asarray(depth.values if isinstance(depth, DepthMap) else depth,
                        dtype="<f4")
    h, w = values.shape
    with open(str(path), "wb") as fh:
        fh.write(DMAP_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(values.tobytes(order="C"))


def read_dmap(path):
    with open(str(path), "rb") as fh:
        data = fh.read()
    if data[:4] != DMAP_MAGIC:
        raise PlacementError("not a DMAP file")
    w, h = struct.unpack_from("<II", data, 4)
    expect = 12 + 4 * w * h
    if len(data) < expect:
        raise PlacementError("truncated DMAP payload")
    values = np.frombuffer(data, dtype="<f4", count=w * h, offset=12)
    return DepthMap(values.reshape(h, w).copy())


@dataclass
class Arrow2D:
    start: np.ndarray  # pixel (u, v)
    end: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.end = np.asarray(self.end, dtype=np.float64)
        if np.allclose(self.start, self.end):
            raise PlacementError("degenerate arrow: start equals end")


@dataclass
class Arrow3D:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        self.start = np.asarray(self.start, dtype=np.float64)
        self.end = np.asarray(self.end, dtype=np.float64)
        if np.allclose(self.start, self.end):
            raise PlacementError("degenerate arrow: start equals end")


@dataclass
class SceneBundle:
    image: np.ndarray  # H x W x 3 uint8
    depth: DepthMap
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        if self.image.shape[:2] != (self.depth.height, self.depth.width):
            raise PlacementError("image and depth dimensions differ")


def load_scene_bundle(directory):
    """Load {image.png, depth.dmap, intrinsics.json} from a directory."""
    from PIL import Image

    directory = str(directory)
    image = np.asarray(
        Image.open(os.path.join(directory, "image.png")).convert("RGB"))
    depth = read_dmap(os.path.join(directory, "depth.dmap"))
    with open(os.path.join(directory, "intrinsics.json")) as fh:
        intr = CameraIntrinsics.from_dict(json.load(fh))
    return SceneBundle(image=image, depth=depth, intrinsics=intr)


def save_scene_bundle(scene, directory):
    from PIL import Image

    os.makedirs(str(directory), exist_ok=True)
    Image.fromarray(scene.image).save(os.path.join(str(directory), "image.png"))
    write_dmap(scene.depth, os.path.join(str(directory), "depth.dmap"))
    with open(os.path.join(str(directory), "intrinsics.json"), "w") as fh:
        json.dump(scene.intrinsics.to_dict(), fh)


@dataclass
class Placement:
    position: np.ndarray        # camera frame, meters
    rotation: np.ndarray        # canonical -> camera frame
    scale: float                # meters per normalized unit
    forward_3d: np.ndarray      # unit, in-plane target direction
    plane: Plane
    twist_defaulted: bool = False

    def to_dict(self):
        return {
            "position": list(map(float, self.position)),
            "rotation": [[float(x) for x in row] for row in self.rotation],
            "scale": float(self.scale),
            "forward_3d": list(map(float, self.forward_3d)),
            "plane": {
                "normal": list(map(float, self.plane.normal)),
                "offset": float(self.plane.offset),
            },
            "twist_defaulted": self.twist_defaulted,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            position=np.asarray(d["position"], dtype=np.float64),
            rotation=np.asarray(d["rotation"], dtype=np.float64),
            scale=float(d["scale"]),
            forward_3d=np.asarray(d["forward_3d"], dtype=np.float64),
            plane=Plane(np.asarray(d["plane"]["normal"], dtype=np.float64),
                        float(d["plane"]["offset"])),
            twist_defaulted=bool(d.get("twist_defaulted", False)),
        )


def unproject_depth(depth, intrinsics, stride=1):
    """Valid depth pixels -> camera-frame points z * ((u-cx)/fx, (v-cy)/fy, 1)."""
    if stride < 1:
        raise PlacementError("stride must be >= 1")
    v = depth.values[::stride, ::stride].astype(np.float64)
    valid = np.isfinite(v) & (v > 0)
    if valid.sum() < 3:
        raise PlacementError("too few valid depth pixels")
    ys, xs = np.nonzero(valid)
    z = v[ys, xs]
    u = xs * stride + 0.5
    vv = ys * stride + 0.5
    x = z * (u - intrinsics.cx) / intrinsics.fx
    y = z * (vv - intrinsics.cy) / intrinsics.fy
    return np.stack([x, y, z], axis=1)


def _region_mask(depth, arrow, region, radius_px):
    if region == "whole-image":
        return np.ones_like(depth.values, dtype=bool)
    if region != "window":
        raise PlacementError(f"unknown region kind: {region}")
    h, w = depth.values.shape
    gy, gx = np.mgrid[0:h, 0:w]
    p = np.stack([gx + 0.5, gy + 0.5], axis=-1).astype(np.float64)
    a, b = arrow.start, arrow.end
    ab = b - a
    t = np.clip(((p - a) @ ab) / (ab @ ab), 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(p - closest, axis=-1) <= radius_px


def _fit_scene_plane(scene, arrow, region, radius_px, stride, ransac, rng=None):
    mask = _region_mask(scene.depth, arrow, region, radius_px)
    values = np.where(mask, scene.depth.values, np.nan)
    pts = unproject_depth(DepthMap(values), scene.intrinsics, stride=stride)
    if ransac:
        pts = _ransac_inliers(pts, rng or np.random.default_rng(0))
    return fit_plane_least_squares(
        pts, camera_origin=np.zeros(3), camera_forward=np.array([0.0, 0.0, 1.0]))


def _ransac_inliers(pts, rng, iterations=100):
    # inlier threshold: 2% of the median depth
    thresh = 0.02 * float(np.median(pts[:, 2]))
    best = None
    n = len(pts)
    for _ in range(iterations):
        idx = rng.choice(n, size=3, replace=False)
        a, b, c = pts[idx]
        normal = np.cross(b - a, c - a)
        nn = np.linalg.norm(normal)
        if nn < 1e-12:
            continue
        normal = normal / nn
        dist = np.abs((pts - a) @ normal)
        inliers = dist <= thresh
        if best is None or inliers.sum() > best.sum():
            best = inliers
    if best is None or best.sum() < 3:
        raise PlacementError("RANSAC failed to find a plane")
    return pts[best]


def _check_arrow_bounds(arrow, width, height):
    for p in (arrow.start, arrow.end):
        if not (0 <= p[0] <= width and 0 <= p[1] <= height):
            raise PlacementError("arrow endpoint outside image bounds")


def _rotation_on_plane(normal, v_target):
    """Up-then-yaw decomposition: map canonical up to the plane normal, then
    rotate about the normal so canonical forward follows v_target's in-plane
    projection.  Returns (rotation, unit in-plane forward)."""
    v_inplane = v_target - (v_target @ normal) * normal
    norm = np.linalg.norm(v_inplane)
    if norm < 1e-9:
        raise PlacementError("arrow direction is parallel to the plane normal")
    forward_3d = v_inplane / norm
    r_up = align_vectors(UP_AXIS, normal)
    f0 = r_up @ FORWARD_AXIS
    cos = np.clip(f0 @ forward_3d, -1.0, 1.0)
    sin = float(np.cross(f0, forward_3d) @ normal)
    angle = np.arctan2(sin, cos)
    return rotation_from_axis_angle(normal, angle) @ r_up, forward_3d


def plan_placement(scene, arrow, scale, region="whole-image", radius_px=64,
                   stride=4, ransac=False):
    """Lift a 2D arrow through the scene depth into a full Placement.

    Fits the support plane from unprojected depth, intersects both endpoint
    rays with it, and builds the rotation as up-alignment followed by
    in-plane yaw toward the arrow direction.
    """
    if scale <= 0:
        raise PlacementError("scale must be positive")
    _check_arrow_bounds(arrow, scene.depth.width, scene.depth.height)
    plane = _fit_scene_plane(scene, arrow, region, radius_px, stride, ransac)
    ray_start = pixel_to_ray(scene.intrinsics, arrow.start)
    ray_end = pixel_to_ray(scene.intrinsics, arrow.end)
    try:
        p_start = ray_plane_intersect(ray_start, plane)
        p_end = ray_plane_intersect(ray_end, plane)
    except GeometryError as exc:
        raise PlacementError(str(exc))
    v_target = p_end - p_start
    if np.linalg.norm(v_target) < 1e-12:
        raise PlacementError("degenerate arrow: endpoints project to the same point")
    rotation, forward_3d = _rotation_on_plane(plane.normal, v_target)
    return Placement(position=p_start, rotation=rotation, scale=float(scale),
                     forward_3d=forward_3d, plane=plane)


def plan_placement_3d(arrow, up_hint=UP_AXIS, scale=1.0):
    """Direct 3D-arrow variant: align canonical forward with the arrow, then
    twist about the arrow direction to bring canonical up closest to up_hint.

    When the arrow is parallel to up_hint the twist is undefined and falls
    back to zero, flagged on the result.
    """
    direction = arrow.end - arrow.start
    d = direction / np.linalg.norm(direction)
    up = np.asarray(up_hint, dtype=np.float64)
    up = up / np.linalg.norm(up)
    r0 = align_vectors(FORWARD_AXIS, d)
    u0 = r0 @ UP_AXIS
    a = u0 - (u0 @ d) * d
    b = up - (up @ d) * d
    twist_defaulted = False
    if np.linalg.norm(b) < 1e-9 or np.linalg.norm(a) < 1e-9:
        rotation = r0
        twist_defaulted = True
    else:
        a = a / np.linalg.norm(a)
        bn = b / np.linalg.norm(b)
        angle = np.arctan2(float(np.cross(a, bn) @ d), float(np.clip(a @ bn, -1, 1)))
        rotation = rotation_from_axis_angle(d, angle) @ r0
    plane = Plane(up, float(up @ arrow.start))
    return Placement(position=arrow.start.copy(), rotation=rotation,
                     scale=float(scale), forward_3d=d, plane=plane,
                     twist_defaulted=twist_defaulted)


def render_placement_preview(scene, mesh, placement):
    """Composite the placed mesh over the scene image with a depth z-test.

    Scene pixels occlude the object where the scene depth is nearer; invalid
    scene depth never occludes.
    """
    h, w = scene.depth.height, scene.depth.width
    camera = Camera(rotation=np.eye(3), translation=np.zeros(3), width=w,
                    height=h, projection="perspective",
                    intrinsics=scene.intrinsics)
    placed = mesh.transformed(rotation=placement.rotation,
                              translation=placement.position,
                              scale=placement.scale)
    out = render(placed, camera)
    scene_depth = np.where(scene.depth.validity,
                           scene.depth.values.astype(np.float64), np.inf)
    visible = out.mask & (out.depth < scene_depth)
    result = scene.image.copy()
    result[visible] = out.color_u8()[visible]
    return result
