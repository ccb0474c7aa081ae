"""Rotation math, vector alignment, PCA canonicalization, planes and rays."""

import enum

import numpy as np

from .meshio import FORWARD_AXIS, UP_AXIS


class GeometryError(ValueError):
    """Raised for degenerate geometric inputs."""


def is_rotation(m, tol=1e-9):
    m = np.asarray(m)
    return (
        m.shape == (3, 3)
        and np.allclose(m.T @ m, np.eye(3), atol=tol)
        and abs(np.linalg.det(m) - 1.0) <= tol
    )


def check_rotation(m, tol=1e-9):
    m = np.asarray(m, dtype=np.float64)
    if not is_rotation(m, tol):
        raise GeometryError("matrix is not a proper rotation")
    return m


class ViewLabel(enum.Enum):
    """Which of the four horizontal views the front camera currently shows."""

    FRONT = "front"
    BACK = "back"
    LEFT = "left"
    RIGHT = "right"
    NO_FRONT_VIEW = "no_front_view"


class Plane:
    """Plane {x : normal . x = offset} with a unit normal."""

    def __init__(self, normal, offset):
        normal = np.asarray(normal, dtype=np.float64)
        n = np.linalg.norm(normal)
        if abs(n - 1.0) > 1e-12:
            if n == 0:
                raise GeometryError("plane normal must be nonzero")
            normal = normal / n
            offset = offset / n
        self.normal = normal
        self.offset = float(offset)

    def signed_distance(self, p):
        return np.asarray(p) @ self.normal - self.offset


class Ray:
    """Ray origin + t * direction, t >= 0, unit direction."""

    def __init__(self, origin, direction):
        self.origin = np.asarray(origin, dtype=np.float64)
        direction = np.asarray(direction, dtype=np.float64)
        n = np.linalg.norm(direction)
        if n == 0:
            raise GeometryError("ray direction must be nonzero")
        self.direction = direction / n


def skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def rotation_from_axis_angle(axis, angle):
    """Rodrigues formula R = I + sin(t) K + (1 - cos(t)) K^2 for a unit axis."""
    axis = np.asarray(axis, dtype=np.float64)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-6:
        raise GeometryError("axis must be unit length")
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def yaw_rotation(angle):
    """Rotation about the up axis (+Z); positive is CCW seen from +Z."""
    return rotation_from_axis_angle(UP_AXIS, angle)


def align_vectors(v_init, v_target):
    """Minimal rotation taking v_init's direction onto v_target's.

    Antiparallel inputs rotate 180 degrees about the axis obtained by
    crossing v_init with the standard basis vector with the smallest
    |component| in v_init (deterministic).
    """
    a = np.asarray(v_init, dtype=np.float64)
    b = np.asarray(v_target, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise GeometryError("align_vectors requires nonzero vectors")
    a, b = a / na, b / nb
    cross = np.cross(a, b)
    s = np.linalg.norm(cross)
    c = float(np.dot(a, b))
    if s < 1e-12:
        if c > 0:
            return np.eye(3)
        basis = np.eye(3)[np.argmin(np.abs(a))]
        axis = np.cross(a, basis)
        axis /= np.linalg.norm(axis)
        return rotation_from_axis_angle(axis, np.pi)
    axis = cross / s
    angle = np.arctan2(s, c)
    return rotation_from_axis_angle(axis, angle)


_LABEL_YAW_DEG = {
    ViewLabel.FRONT: 0.0,
    ViewLabel.BACK: 180.0,
    ViewLabel.LEFT: 90.0,
    ViewLabel.RIGHT: -90.0,
}


def yaw_for_label(label):
    """Correction yaw (about +Z) that brings the recognized view to canonical.

    Front -> 0, Back -> 180, Left -> +90, Right -> -90 degrees; positive yaw
    is counterclockwise seen from +Z.
    """
    if label == ViewLabel.NO_FRONT_VIEW:
        raise GeometryError("no front view: object must be excluded, not rotated")
    return yaw_rotation(np.deg2rad(_LABEL_YAW_DEG[label]))


def yaw_deg_for_label(label):
    if label == ViewLabel.NO_FRONT_VIEW:
        raise GeometryError("no front view: object must be excluded, not rotated")
    return _LABEL_YAW_DEG[label]


def rotation_error_deg(pred, gt):
    """Geodesic rotation error in degrees.

    Evaluated as atan2(sin, cos) of the relative rotation, which stays
    well-conditioned for near-identical rotations where the plain
    arccos((Tr - 1) / 2) form loses ~6 digits.
    """
    d = np.asarray(pred) @ np.asarray(gt).T
    cos = (np.trace(d) - 1.0) / 2.0
    axis = np.array([d[2, 1] - d[1, 2], d[0, 2] - d[2, 0], d[1, 0] - d[0, 1]])
    sin = 0.5 * np.linalg.norm(axis)
    return float(np.degrees(np.arctan2(sin, cos)))


def front_direction_error_deg(pred, gt):
    """Angle between the two rotated forward axes; roll about forward is ignored."""
    f1 = np.asarray(pred) @ FORWARD_AXIS
    f2 = np.asarray(gt) @ FORWARD_AXIS
    cos = np.dot(f1, f2) / (np.linalg.norm(f1) * np.linalg.norm(f2))
    return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))


def pca_align(points):
    """Rotation diagonalizing the point covariance, eigenvalues descending on X,Y,Z.

    Eigenvector signs: the third moment of the centered projections must be
    >= 0; near-zero moments fall back to making the largest-|component|
    entry positive.  det is forced to +1 by flipping the Z axis if needed.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 4:
        raise GeometryError("pca_align requires at least 4 points")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = evecs[:, order]
    if evals[2] <= 1e-12 * max(evals[0], 1e-300) or evals[0] <= 0:
        raise GeometryError("degenerate point cloud: covariance is rank-deficient")
    axes = []
    for j in range(3):
        v = evecs[:, j]
        proj = centered @ v
        moment = float(np.sum(proj ** 3))
        scale = len(pts) * evals[j] ** 1.5
        if abs(moment) <= 1e-9 * scale:
            k = int(np.argmax(np.abs(v)))
            if v[k] < 0:
                v = -v
        elif moment < 0:
            v = -v
        axes.append(v)
    r = np.stack(axes, axis=0)
    if np.linalg.det(r) < 0:
        r[2] = -r[2]
    return r


def fit_plane_least_squares(points, camera_origin=None, camera_forward=None):
    """Total-least-squares plane through a point cloud.

    The normal is the smallest-eigenvalue eigenvector of the centered
    covariance.  Orientation: primarily normal . (-camera_forward) >= 0 when
    a camera frame is given, breaking ties toward the camera origin;
    without camera context, normal_z >= 0 (ties resolved on y then x).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 3:
        raise GeometryError("plane fit requires at least 3 points")
    centroid = pts.mean(axis=0)
    centered = pts - centroid
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 1e-12 * max(evals[2], 1e-300):
        raise GeometryError("collinear points: plane is underdetermined")
    normal = evecs[:, 0]
    if camera_forward is not None or camera_origin is not None:
        s = 0.0
        if camera_forward is not None:
            s = float(normal @ (-np.asarray(camera_forward, dtype=np.float64)))
        if abs(s) < 1e-9 and camera_origin is not None:
            s = float(normal @ (np.asarray(camera_origin, dtype=np.float64) - centroid))
    else:
        s = normal[2]
        if abs(s) < 1e-12:
            s = normal[1]
            if abs(s) < 1e-12:
                s = normal[0]
    if s < 0:
        normal = -normal
    return Plane(normal, float(normal @ centroid))


def ray_plane_intersect(ray, plane):
    """Intersection point of a ray with a plane; requires t > 0."""
    denom = float(ray.direction @ plane.normal)
    if abs(denom) <= 1e-9:
        raise GeometryError("ray is parallel to the plane")
    t = (plane.offset - float(ray.origin @ plane.normal)) / denom
    if t <= 0:
        raise GeometryError("intersection is behind the ray origin")
    return ray.origin + t * ray.direction


def pixel_to_ray(intrinsics, pixel):
    """Camera-frame ray through a pixel center for a pinhole camera."""
    u, v = float(pixel[0]), float(pixel[1])
    d = np.array([
        (u - intrinsics.cx) / intrinsics.fx,
        (v - intrinsics.cy) / intrinsics.fy,
        1.0,
    ])
    return Ray(np.zeros(3), d)
