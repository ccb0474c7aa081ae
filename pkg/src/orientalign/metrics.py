"""Surface sampling, Chamfer distance and orientation metrics."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import front_direction_error_deg, rotation_error_deg

DEFAULT_CD_GAMMA = 0.01
DEFAULT_SAMPLE_COUNT = 10000


class MetricsError(ValueError):
    pass


def sample_surface(mesh, n, seed=0):
    """Sample n points uniformly over the mesh surface (area-weighted).

    Deterministic for a fixed seed; zero-area faces are never selected.
    """
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0:
        raise MetricsError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    face_idx = rng.choice(len(areas), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    tri = mesh.vertices[mesh.faces[face_idx]]
    return (
        tri[:, 0]
        + u[:, None] * (tri[:, 1] - tri[:, 0])
        + v[:, None] * (tri[:, 2] - tri[:, 0])
    )


def build_index(points):
    """Exact nearest-neighbor index (KD-tree) over a point cloud."""
    return cKDTree(np.asarray(points, dtype=np.float64))


def chamfer_distance(a, b, squared=False):
    """Symmetric mean nearest-neighbor distance, 0.5 * (mean_a + mean_b).

    The default is unsquared Euclidean; squared=True averages squared
    distances instead (the variant used for the misalignment threshold,
    whose sampling-noise floor would otherwise sit above gamma for
    large-area shapes like the unit cube).
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise MetricsError("chamfer_distance requires non-empty clouds")
    d_ab, _ = build_index(b).query(a)
    d_ba, _ = build_index(a).query(b)
    if squared:
        d_ab, d_ba = d_ab ** 2, d_ba ** 2
    return 0.5 * (float(d_ab.mean()) + float(d_ba.mean()))


def chamfer_distance_bruteforce(a, b, squared=False, chunk=512):
    """O(N*M) reference Chamfer distance; oracle for the KD-tree path."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise MetricsError("chamfer_distance requires non-empty clouds")

    def one_way(x, y):
        mins = np.empty(len(x))
        for i in range(0, len(x), chunk):
            d = np.linalg.norm(x[i:i + chunk, None, :] - y[None, :, :], axis=2)
            mins[i:i + chunk] = d.min(axis=1)
        if squared:
            mins = mins ** 2
        return float(mins.mean())

    return 0.5 * (one_way(a, b) + one_way(b, a))


def flag_misalignment(pred_mesh, gt_mesh, gamma=DEFAULT_CD_GAMMA,
                      n=DEFAULT_SAMPLE_COUNT, seed=0, squared=True):
    """Chamfer-threshold misalignment check between two normalized meshes.

    Fresh independent samples are drawn for each side (seed and seed+1).
    Uses the squared Chamfer variant by default: at n=10000 its sampling
    noise floor (~2e-4 on a unit cube) sits well below gamma, whereas the
    unsquared floor (~0.012) does not.  Returns (flagged, cd).
    """
    a = sample_surface(pred_mesh, n, seed=seed)
    b = sample_surface(gt_mesh, n, seed=seed + 1)
    cd = chamfer_distance(a, b, squared=squared)
    return cd > gamma, cd


@dataclass
class EvalRecord:
    object_id: str
    category: str
    stick_like: bool
    gt: np.ndarray
    pred: np.ndarray


@dataclass
class MetricsReport:
    overall: dict
    per_category: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(
            {"overall": self.overall, "per_category": self.per_category},
            indent=2, sort_keys=True,
        )


def record_error_deg(record):
    if record.stick_like:
        return front_direction_error_deg(record.pred, record.gt)
    return rotation_error_deg(record.pred, record.gt)


def aggregate_metrics(records, threshold_deg=30.0):
    """Acc@threshold (percent below threshold) and mean absolute error.

    Stick-like records use the front-direction error; others the full
    geodesic rotation error.  Grouped per category plus an overall row.
    """
    if not records:
        raise MetricsError("aggregate_metrics requires at least one record")
    errors = {}
    for rec in sorted(records, key=lambda r: r.object_id):
        errors.setdefault(rec.category, []).append(record_error_deg(rec))

    def summarize(errs):
        errs = np.asarray(errs)
        return {
            "acc30": float(100.0 * np.mean(errs < threshold_deg)),
            "abs": float(errs.mean()),
            "n": int(len(errs)),
        }

    per_category = {cat: summarize(errs) for cat, errs in sorted(errors.items())}
    all_errs = [e for errs in errors.values() for e in errs]
    return MetricsReport(overall=summarize(all_errs), per_category=per_category)
