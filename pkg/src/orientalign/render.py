"""Deterministic software rasterizer and the fixed camera rigs.

Camera convention: world -> camera via x_cam = R x_world + t, camera looks
down +Z with +X right and +Y down in image space.  Depth is camera-frame Z.

Rig constants (shared by VLM views, templates and evaluation queries):
orthographic distance 2, half extent 0.75; evaluation cameras perspective at
distance 2.2 with a 40 degree vertical FOV.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import GeometryError, rotation_from_axis_angle, yaw_rotation
from .meshio import UP_AXIS

ORTHO_DISTANCE = 2.0
ORTHO_HALF_EXTENT = 0.75
EVAL_DISTANCE = 2.2
EVAL_VFOV_DEG = 40.0
NEAR_PLANE = 1e-2

AMBIENT = 0.35
DIFFUSE = 0.65
DEFAULT_GRAY = 0.7


@dataclass
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError("focal lengths must be positive")

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_dict(cls, d):
        return cls(fx=float(d["fx"]), fy=float(d["fy"]),
                   cx=float(d["cx"]), cy=float(d["cy"]))


@dataclass
class Camera:
    rotation: np.ndarray  # world -> camera
    translation: np.ndarray
    width: int
    height: int
    projection: str  # "orthographic" | "perspective"
    half_extent: Optional[float] = None
    intrinsics: Optional[CameraIntrinsics] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise GeometryError("camera resolution must be at least 1x1")
        if self.projection == "orthographic" and not self.half_extent:
            raise GeometryError("orthographic camera needs half_extent")
        if self.projection == "perspective" and self.intrinsics is None:
            raise GeometryError("perspective camera needs intrinsics")

    @property
    def position(self):
        return -self.rotation.T @ self.translation

    @property
    def forward_world(self):
        return self.rotation.T @ np.array([0.0, 0.0, 1.0])

    def to_camera(self, points):
        return np.asarray(points) @ self.rotation.T + self.translation

    def project(self, cam_points):
        """Camera-frame points -> pixel coordinates (u right, v down)."""
        p = np.asarray(cam_points)
        cx, cy = self.width / 2.0, self.height / 2.0
        if self.projection == "orthographic":
            sx = (self.width / 2.0) / self.half_extent
            sy = (self.height / 2.0) / self.half_extent
            u = cx + p[..., 0] * sx
            v = cy + p[..., 1] * sy
        else:
            k = self.intrinsics
            z = p[..., 2]
            u = k.cx + k.fx * p[..., 0] / z
            v = k.cy + k.fy * p[..., 1] / z
        return np.stack([u, v], axis=-1)


def look_at(position, target=(0.0, 0.0, 0.0), up=UP_AXIS, roll_deg=0.0):
    """World->camera rotation and translation for a camera looking at target."""
    position = np.asarray(position, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - position
    fn = np.linalg.norm(f)
    if fn == 0:
        raise GeometryError("look_at: position equals target")
    f = f / fn
    r = np.cross(f, np.asarray(up, dtype=np.float64))
    rn = np.linalg.norm(r)
    if rn < 1e-12:
        raise GeometryError("look_at: view direction parallel to up")
    r = r / rn
    d = np.cross(f, r)
    rot = np.stack([r, d, f], axis=0)
    if roll_deg:
        c, s = np.cos(np.deg2rad(roll_deg)), np.sin(np.deg2rad(roll_deg))
        roll = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        rot = roll @ rot
    return rot, -rot @ position


def camera_at_azimuth(azimuth_deg, resolution, distance=ORTHO_DISTANCE,
                      half_extent=ORTHO_HALF_EXTENT):
    """Orthographic camera on the horizontal ring; azimuth 0 is the front camera
    at -X looking toward +X, positive azimuth rotates the camera CCW about +Z."""
    base = np.array([-distance, 0.0, 0.0])
    pos = yaw_rotation(np.deg2rad(azimuth_deg)) @ base
    rot, t = look_at(pos)
    return Camera(rotation=rot, translation=t, width=resolution,
                  height=resolution, projection="orthographic",
                  half_extent=half_extent)


FOUR_VIEW_AZIMUTHS_DEG = (0.0, 180.0, 90.0, 270.0)  # front, back, left, right
SIX_VIEW_AZIMUTHS_DEG = (0.0, 45.0, -45.0, 90.0, -90.0, 180.0)


def orthogonal_four_views(resolution):
    """Fixed [front, back, left, right] orthographic rig around +Z."""
    if resolution < 64:
        raise GeometryError("resolution must be at least 64")
    return [camera_at_azimuth(a, resolution) for a in FOUR_VIEW_AZIMUTHS_DEG]


def six_canonical_views(resolution):
    """[front, front-left, front-right, left, right, back] orthographic rig."""
    if resolution < 64:
        raise GeometryError("resolution must be at least 64")
    return [camera_at_azimuth(a, resolution) for a in SIX_VIEW_AZIMUTHS_DEG]


def evaluation_camera(seed, resolution=256):
    """Random perspective query camera: azimuth U[0,360), polar U[0,60],
    roll U[-30,30], look-at origin from distance 2.2, vertical FOV 40."""
    rng = np.random.default_rng(seed)
    azimuth = rng.uniform(0.0, 360.0)
    polar = rng.uniform(0.0, 60.0)
    roll = rng.uniform(-30.0, 30.0)
    return _camera_from_angles(azimuth, polar, roll, resolution)


def _camera_from_angles(azimuth_deg, polar_deg, roll_deg, resolution):
    base = np.array([-EVAL_DISTANCE, 0.0, 0.0])
    elev = rotation_from_axis_angle(np.array([0.0, 1.0, 0.0]), np.deg2rad(polar_deg))
    pos = yaw_rotation(np.deg2rad(azimuth_deg)) @ (elev @ base)
    rot, t = look_at(pos, roll_deg=roll_deg)
    f = (resolution / 2.0) / np.tan(np.deg2rad(EVAL_VFOV_DEG / 2.0))
    intr = CameraIntrinsics(fx=f, fy=f, cx=resolution / 2.0, cy=resolution / 2.0)
    return Camera(rotation=rot, translation=t, width=resolution,
                  height=resolution, projection="perspective", intrinsics=intr)


@dataclass
class LightSpec:
    """Directional light; direction points from the scene toward the light.
    None means a headlight along the camera viewing axis."""

    direction: Optional[np.ndarray] = None


@dataclass
class RenderOutput:
    color: np.ndarray  # H x W x 3 float in [0, 1]
    depth: np.ndarray  # H x W, +inf where empty
    mask: np.ndarray   # H x W bool

    def color_u8(self):
        return np.clip(np.round(self.color * 255.0), 0, 255).astype(np.uint8)


def render(mesh, camera, light=None):
    """Z-buffer rasterization with flat shading over a white background.

    Back-face culling is disabled (normals are flipped toward the camera for
    shading).  Sampling at pixel centers; edge ties resolved by a fixed
    top-left rule.  Single-threaded and bit-deterministic.
    """
    h, w = camera.height, camera.width
    color = np.ones((h, w, 3), dtype=np.float64)
    depth = np.full((h, w), np.inf, dtype=np.float64)

    verts_cam = camera.to_camera(mesh.vertices)
    persp = camera.projection == "perspective"
    if persp:
        ok = verts_cam[:, 2] > NEAR_PLANE
    else:
        ok = np.ones(len(verts_cam), dtype=bool)
    pix = np.zeros((len(verts_cam), 2))
    pix[ok] = camera.project(verts_cam[ok])
    zs = verts_cam[:, 2]

    if light is None:
        light = LightSpec()
    if light.direction is None:
        light_dir = -camera.forward_world
    else:
        light_dir = np.asarray(light.direction, dtype=np.float64)
        light_dir = light_dir / np.linalg.norm(light_dir)

    v_world = mesh.vertices
    cam_pos = camera.position
    cam_fwd = camera.forward_world

    for face in mesh.faces:
        if not ok[face].all():
            continue
        p = pix[face]
        z = zs[face]
        area = _edge(p[0], p[1], p[2])
        if area == 0.0:
            continue
        if area < 0:
            face = face[[0, 2, 1]]
            p = pix[face]
            z = zs[face]
            area = -area

        x0 = max(int(np.floor(p[:, 0].min() - 0.5)), 0)
        x1 = min(int(np.ceil(p[:, 0].max() - 0.5)), w - 1)
        y0 = max(int(np.floor(p[:, 1].min() - 0.5)), 0)
        y1 = min(int(np.ceil(p[:, 1].max() - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue

        xs = np.arange(x0, x1 + 1) + 0.5
        ys = np.arange(y0, y1 + 1) + 0.5
        gx, gy = np.meshgrid(xs, ys)

        e0 = _edge_grid(p[1], p[2], gx, gy)
        e1 = _edge_grid(p[2], p[0], gx, gy)
        e2 = _edge_grid(p[0], p[1], gx, gy)
        cov = (
            _covers(e0, p[1], p[2])
            & _covers(e1, p[2], p[0])
            & _covers(e2, p[0], p[1])
        )
        if not cov.any():
            continue

        l0 = e0 / area
        l1 = e1 / area
        l2 = e2 / area
        if persp:
            inv_z = l0 / z[0] + l1 / z[1] + l2 / z[2]
            zbuf = 1.0 / inv_z
        else:
            zbuf = l0 * z[0] + l1 * z[1] + l2 * z[2]

        sub_depth = depth[y0:y1 + 1, x0:x1 + 1]
        upd = cov & (zbuf < sub_depth) & (zbuf > (NEAR_PLANE if persp else -np.inf))
        if not upd.any():
            continue

        tri = v_world[face]
        n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
        nn = np.linalg.norm(n)
        if nn == 0:
            continue
        n = n / nn
        centroid = tri.mean(axis=0)
        if camera.projection == "perspective":
            to_cam = cam_pos - centroid
        else:
            to_cam = -cam_fwd
        if n @ to_cam < 0:
            n = -n
        shade = AMBIENT + DIFFUSE * max(0.0, float(n @ light_dir))
        if mesh.vertex_colors is not None:
            base = mesh.vertex_colors[face].mean(axis=0)
        else:
            base = np.full(3, DEFAULT_GRAY)
        rgb = np.clip(base * shade, 0.0, 1.0)

        sub_depth[upd] = zbuf[upd]
        sub_color = color[y0:y1 + 1, x0:x1 + 1]
        sub_color[upd] = rgb

    return RenderOutput(color=color, depth=depth, mask=np.isfinite(depth))


def _edge(a, b, c):
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _edge_grid(a, b, gx, gy):
    return (b[0] - a[0]) * (gy - a[1]) - (b[1] - a[1]) * (gx - a[0])


def _covers(e, a, b):
    # inside is e > 0; e == 0 counts only on top-left edges
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    top_left = dy > 0 or (dy == 0 and dx < 0)
    if top_left:
        return e >= 0
    return e > 0


def save_png(image_u8, path):
    from PIL import Image

    Image.fromarray(image_u8).save(str(path))


def save_mask_png(mask, path):
    from PIL import Image

    Image.fromarray(mask.astype(np.uint8) * 255).convert("1").save(str(path))
