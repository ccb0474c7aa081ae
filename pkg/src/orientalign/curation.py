"""Batch canonicalization of mesh directories plus VLM error analysis.

Directory layout: in_dir/<category>/<id>.obj|ply.  The manifest is a
versioned JSON file written atomically; reruns with resume=True skip
objects already present.
"""

import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

from .meshio import MeshError, load_mesh, normalize_mesh, save_mesh
from .metrics import DEFAULT_CD_GAMMA, DEFAULT_SAMPLE_COUNT, flag_misalignment
from .vlm import VlmError, applied_yaw_deg, canonicalize_with_vlm

MANIFEST_SCHEMA = 1
MANIFEST_NAME = "manifest.json"

STATUS_ALIGNED = "aligned"
STATUS_EXCLUDED = "excluded_no_front"
STATUS_FAILED = "failed"

MESH_EXTENSIONS = (".obj", ".ply")


@dataclass
class CurationEntry:
    id: str
    category: str
    status: str
    applied_yaw_deg: Optional[float] = None
    verdict_raw: str = ""
    attempts: int = 0
    cd_vs_reference: Optional[float] = None
    error: str = ""


@dataclass
class CurationManifest:
    schema: int = MANIFEST_SCHEMA
    objects: dict = field(default_factory=dict)  # id -> CurationEntry

    def counts(self):
        out = {STATUS_ALIGNED: 0, STATUS_EXCLUDED: 0, STATUS_FAILED: 0}
        for e in self.objects.values():
            out[e.status] += 1
        return out

    def review_queue(self):
        """Objects needing manual attention: excluded or failed."""
        return sorted(
            e.id for e in self.objects.values() if e.status != STATUS_ALIGNED
        )

    def to_dict(self):
        return {
            "schema": self.schema,
            "objects": {k: asdict(v) for k, v in sorted(self.objects.items())},
            "review_queue": self.review_queue(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema") != MANIFEST_SCHEMA:
            raise ValueError(f"unsupported manifest schema: {d.get('schema')}")
        objects = {
            k: CurationEntry(**{f: v[f] for f in CurationEntry.__dataclass_fields__ if f in v})
            for k, v in d["objects"].items()
        }
        return cls(schema=d["schema"], objects=objects)


def write_manifest(manifest, path):
    # atomic: write to a temp file in the same directory, then rename
    path = str(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path):
    with open(str(path)) as fh:
        return CurationManifest.from_dict(json.load(fh))


def discover_meshes(in_dir):
    """Yields (object_id, category, path) sorted by id; category is the
    immediate parent directory name."""
    found = []
    for root, _dirs, files in os.walk(in_dir):
        for name in sorted(files):
            if not name.lower().endswith(MESH_EXTENSIONS):
                continue
            stem = os.path.splitext(name)[0]
            category = os.path.basename(root)
            if os.path.abspath(root) == os.path.abspath(in_dir):
                category = "uncategorized"
            found.append((f"{category}/{stem}", category, os.path.join(root, name)))
    return sorted(found)


def curate_directory(in_dir, out_dir, config, resume=False, resolution=256,
                     max_workers=4, session=None):
    """Normalize and canonicalize every mesh under in_dir via the VLM.

    Aligned meshes are written to out_dir mirroring the input layout;
    excluded and failed objects are recorded in the manifest only.  Per-object
    failures are isolated.  Returns the manifest.
    """
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory not writable: {out_dir}")
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    if resume and os.path.exists(manifest_path):
        manifest = read_manifest(manifest_path)
    else:
        manifest = CurationManifest()

    todo = [
        item for item in discover_meshes(in_dir)
        if not (resume and item[0] in manifest.objects)
    ]

    def process(item):
        object_id, category, path = item
        try:
            mesh = normalize_mesh(load_mesh(path))
        except (MeshError, OSError) as exc:
            return CurationEntry(id=object_id, category=category,
                                 status=STATUS_FAILED, error=str(exc))
        try:
            aligned, verdict = canonicalize_with_vlm(
                mesh, config, resolution=resolution, session=session)
        except VlmError as exc:
            return CurationEntry(id=object_id, category=category,
                                 status=STATUS_FAILED, error=str(exc))
        yaw = applied_yaw_deg(verdict)
        if yaw is None:
            return CurationEntry(id=object_id, category=category,
                                 status=STATUS_EXCLUDED,
                                 verdict_raw=verdict.raw_response,
                                 attempts=verdict.attempts)
        out_path = os.path.join(out_dir, category, os.path.basename(path))
        os.makedirs(os.path.dirname(out_path), exist_ok=True)
        save_mesh(aligned, out_path)
        return CurationEntry(id=object_id, category=category,
                             status=STATUS_ALIGNED, applied_yaw_deg=yaw,
                             verdict_raw=verdict.raw_response,
                             attempts=verdict.attempts)

    if max_workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            entries = list(pool.map(process, todo))
    else:
        entries = [process(item) for item in todo]
    for entry in entries:
        manifest.objects[entry.id] = entry
    write_manifest(manifest, manifest_path)
    return manifest


@dataclass
class ErrorAnalysisReport:
    per_category: dict
    overall: dict

    def to_json(self):
        return json.dumps(
            {"overall": self.overall, "per_category": self.per_category},
            indent=2, sort_keys=True,
        )


def read_skip_list(path):
    if path is None:
        return set()
    with open(str(path)) as fh:
        return {line.strip() for line in fh if line.strip()}


def vlm_error_analysis(candidate_dir, reference_dir, gamma=DEFAULT_CD_GAMMA,
                       n=DEFAULT_SAMPLE_COUNT, seed=0, skip_ids=()):
    """Per-category error rates: fraction of shared objects whose candidate
    vs reference Chamfer distance exceeds gamma.  Skip-listed ids (near-
    symmetric shapes) are removed from the denominator."""
    cand = {oid: p for oid, _c, p in discover_meshes(candidate_dir)}
    ref = {oid: (c, p) for oid, c, p in discover_meshes(reference_dir)}
    shared = sorted(set(cand) & set(ref) - set(skip_ids))
    if not shared:
        raise ValueError("no shared objects between candidate and reference")
    stats = {}
    for oid in shared:
        category, ref_path = ref[oid]
        a = normalize_mesh(load_mesh(cand[oid]))
        b = normalize_mesh(load_mesh(ref_path))
        flagged, _cd = flag_misalignment(a, b, gamma=gamma, n=n, seed=seed)
        tot, bad = stats.get(category, (0, 0))
        stats[category] = (tot + 1, bad + int(flagged))
    per_category = {
        c: {"n": tot, "errors": bad, "error_rate": 100.0 * bad / tot}
        for c, (tot, bad) in sorted(stats.items())
    }
    tot = sum(t for t, _ in stats.values())
    bad = sum(b for _, b in stats.values())
    overall = {"n": tot, "errors": bad, "error_rate": 100.0 * bad / tot}
    return ErrorAnalysisReport(per_category=per_category, overall=overall)
