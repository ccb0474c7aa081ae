"""Render-and-compare orientation estimation over a rotation hypothesis grid."""

import json
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .meshio import TriMesh, load_mesh, normalize_mesh
from .metrics import EvalRecord, aggregate_metrics
from .render import evaluation_camera, render

DEFAULT_GRID = (36, 4, 3)
REFINE_HALVINGS = 3


class PoseError(ValueError):
    pass


def _rx(deg):
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]], dtype=np.float64)


def _ry(deg):
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]], dtype=np.float64)


def _rz(deg):
    t = np.deg2rad(deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]], dtype=np.float64)


def rotation_from_angles(azimuth_deg, polar_deg, roll_deg):
    """Hypothesis rotation composed in yaw-pitch-roll order."""
    return _rz(azimuth_deg) @ _ry(polar_deg) @ _rx(roll_deg)


@dataclass
class HypothesisGrid:
    rotations: List[np.ndarray]
    angles: List[Tuple[float, float, float]]  # (azimuth, polar, roll) degrees
    counts: Tuple[int, int, int]
    spacings: Tuple[float, float, float]

    def __len__(self):
        return len(self.rotations)


def make_grid(n_azimuth, n_polar, n_roll):
    """Azimuth uniform on [0,360), polar on [0,60], roll on [-30,30].

    Matches the evaluation pose distribution; a single roll count collapses
    to roll 0 so the (1,1,1) grid is the identity.
    """
    if n_azimuth < 1 or n_polar < 1 or n_roll < 1:
        raise PoseError("grid counts must be >= 1")
    azimuths = [360.0 * i / n_azimuth for i in range(n_azimuth)]
    polars = list(np.linspace(0.0, 60.0, n_polar)) if n_polar > 1 else [0.0]
    rolls = list(np.linspace(-30.0, 30.0, n_roll)) if n_roll > 1 else [0.0]
    angles = [(a, p, r) for a in azimuths for p in polars for r in rolls]
    rotations = [rotation_from_angles(*ang) for ang in angles]
    spacings = (
        360.0 / n_azimuth,
        60.0 / (n_polar - 1) if n_polar > 1 else 60.0,
        60.0 / (n_roll - 1) if n_roll > 1 else 30.0,
    )
    return HypothesisGrid(rotations=rotations, angles=angles,
                          counts=(n_azimuth, n_polar, n_roll),
                          spacings=spacings)


def sample_gt_rotation(rng):
    """Ground-truth pose draw matching the evaluation camera distribution."""
    return rotation_from_angles(
        rng.uniform(0.0, 360.0), rng.uniform(0.0, 60.0), rng.uniform(-30.0, 30.0)
    )


class GrayscaleDescriptor:
    """Downsampled grayscale over a white background; distance is L2."""

    kind = "downsampled-grayscale"

    def __init__(self, grid_size=32):
        self.grid_size = grid_size

    def describe(self, image):
        gray = _to_gray(image)
        return _block_resize(gray, self.grid_size).ravel()


class GradientHistogramDescriptor:
    """Per-cell gradient orientation histograms, magnitude weighted."""

    kind = "gradient-histogram"

    def __init__(self, cells=4, bins=8):
        self.cells = cells
        self.bins = bins

    def describe(self, image):
        gray = _to_gray(image)
        gy, gx = np.gradient(gray)
        mag = np.hypot(gx, gy)
        ang = np.mod(np.arctan2(gy, gx), np.pi)
        h, w = gray.shape
        out = np.zeros((self.cells, self.cells, self.bins))
        ys = np.linspace(0, h, self.cells + 1).astype(int)
        xs = np.linspace(0, w, self.cells + 1).astype(int)
        for i in range(self.cells):
            for j in range(self.cells):
                m = mag[ys[i]:ys[i + 1], xs[j]:xs[j + 1]].ravel()
                a = ang[ys[i]:ys[i + 1], xs[j]:xs[j + 1]].ravel()
                hist, _ = np.histogram(a, bins=self.bins, range=(0, np.pi), weights=m)
                out[i, j] = hist
        return out.ravel()


class ExternalFileDescriptor:
    """Precomputed feature vectors: <hypothesis_index>.feat and query.feat,
    little-endian float32."""

    kind = "external-file"

    def __init__(self, directory):
        self.directory = str(directory)

    def load(self, name):
        path = os.path.join(self.directory, f"{name}.feat")
        vec = np.fromfile(path, dtype="<f4").astype(np.float64)
        if vec.size == 0:
            raise PoseError(f"empty feature file: {path}")
        return vec

    def describe(self, image):
        raise PoseError("external-file descriptors cannot describe images")


def _to_gray(image):
    img = np.asarray(image, dtype=np.float64)
    if img.dtype == np.float64 and img.max() > 1.5:
        img = img / 255.0
    if img.ndim == 3:
        img = img @ np.array([0.299, 0.587, 0.114])
    return img


def _block_resize(gray, size):
    h, w = gray.shape
    if h % size == 0 and w % size == 0:
        return gray.reshape(size, h // size, size, w // size).mean(axis=(1, 3))
    from PIL import Image

    im = Image.fromarray((gray * 255.0).astype(np.float32), mode="F")
    return np.asarray(im.resize((size, size), Image.BILINEAR), dtype=np.float64) / 255.0


@dataclass
class EstimateResult:
    best: np.ndarray
    best_distance: float
    ranked: List[Tuple[np.ndarray, float]]
    best_angles: Optional[Tuple[float, float, float]] = None


def _hypothesis_distance(template, rotation, camera, descriptor, query_vec):
    out = render(template.transformed(rotation=rotation), camera)
    vec = descriptor.describe(out.color)
    return float(np.linalg.norm(vec - query_vec))


def estimate_orientation(template, query, camera, grid, descriptor,
                         refine=False, refine_all=False, top_k=None):
    """Rank the hypothesis grid by descriptor L2 distance to the query.

    With refine, coordinate descent over (azimuth, polar, roll) from the
    best hypothesis: step starts at the grid spacing and is halved 3 times,
    re-rendering each probe.  refine_all refines every hypothesis before the
    final ranking instead of only the winner.
    """
    external = isinstance(descriptor, ExternalFileDescriptor)
    if external:
        if refine or refine_all:
            raise PoseError("refinement needs re-rendering; not available with external features")
        query_vec = descriptor.load("query")
        distances = []
        for i in range(len(grid)):
            vec = descriptor.load(str(i))
            if vec.shape != query_vec.shape:
                raise PoseError(
                    f"feature length mismatch for hypothesis {i}: "
                    f"{vec.shape[0]} != {query_vec.shape[0]}")
            distances.append(float(np.linalg.norm(vec - query_vec)))
    else:
        query_vec = descriptor.describe(query)
        distances = [
            _hypothesis_distance(template, r, camera, descriptor, query_vec)
            for r in grid.rotations
        ]

    order = sorted(range(len(grid)), key=lambda i: (distances[i], i))
    if refine_all and not external:
        refined = []
        for i in order[: (top_k or len(order))]:
            ang, dist = _coordinate_descent(
                template, camera, descriptor, query_vec, grid.angles[i],
                grid.spacings)
            refined.append((ang, dist))
        refined.sort(key=lambda t: t[1])
        ranked = [(rotation_from_angles(*a), d) for a, d in refined]
        best_angles = refined[0][0]
        return EstimateResult(best=ranked[0][0], best_distance=ranked[0][1],
                              ranked=ranked, best_angles=best_angles)

    ranked = [(grid.rotations[i], distances[i]) for i in order]
    if top_k is not None:
        ranked = ranked[:top_k]
    best_angles = grid.angles[order[0]] if not external else None
    best = ranked[0][0]
    best_distance = ranked[0][1]
    if refine:
        best_angles, best_distance = _coordinate_descent(
            template, camera, descriptor, query_vec, best_angles, grid.spacings)
        best = rotation_from_angles(*best_angles)
        ranked = [(best, best_distance)] + ranked[1:]
    return EstimateResult(best=best, best_distance=best_distance,
                          ranked=ranked, best_angles=best_angles)


def _coordinate_descent(template, camera, descriptor, query_vec, angles, spacings):
    angles = list(angles)
    best = _hypothesis_distance(
        template, rotation_from_angles(*angles), camera, descriptor, query_vec)
    steps = list(spacings)
    for level in range(REFINE_HALVINGS + 1):
        for axis in range(3):
            step = steps[axis] / (2 ** level)
            moved = True
            guard = 0
            while moved and guard < 8:
                moved = False
                guard += 1
                for sign in (1.0, -1.0):
                    probe = list(angles)
                    probe[axis] += sign * step
                    d = _hypothesis_distance(
                        template, rotation_from_angles(*probe), camera,
                        descriptor, query_vec)
                    if d < best:
                        best = d
                        angles = probe
                        moved = True
                        break
    return tuple(angles), best


def load_eval_manifest(path):
    with open(str(path)) as fh:
        data = json.load(fh)
    objects = data["objects"] if isinstance(data, dict) else data
    if not objects:
        raise PoseError("empty evaluation manifest")
    return objects


def evaluate_estimator(manifest_path, grid, descriptor, seed=0, refine=True,
                       resolution=64):
    """Closed-loop evaluation: render a query per object under the random
    evaluation camera at a random ground-truth pose, estimate, aggregate."""
    objects = load_eval_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(str(manifest_path)))
    records = []
    for i, obj in enumerate(objects):
        mesh_path = obj["mesh"]
        if not os.path.isabs(mesh_path):
            mesh_path = os.path.join(base, mesh_path)
        mesh = normalize_mesh(load_mesh(mesh_path))
        rng = np.random.default_rng(seed + 1000 * i)
        camera = evaluation_camera(seed + 1000 * i, resolution=resolution)
        gt = sample_gt_rotation(rng)
        query = render(mesh.transformed(rotation=gt), camera).color
        result = estimate_orientation(mesh, query, camera, grid, descriptor,
                                      refine=refine)
        records.append(EvalRecord(
            object_id=obj.get("id", f"obj{i}"),
            category=obj.get("category", "unknown"),
            stick_like=bool(obj.get("stick_like", False)),
            gt=gt, pred=result.best))
    return aggregate_metrics(records)
