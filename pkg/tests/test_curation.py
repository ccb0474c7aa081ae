import json
import os

import numpy as np
import pytest

from orientalign.curation import (
    CurationManifest,
    MANIFEST_NAME,
    STATUS_ALIGNED,
    STATUS_EXCLUDED,
    STATUS_FAILED,
    curate_directory,
    discover_meshes,
    read_manifest,
    read_skip_list,
    vlm_error_analysis,
    write_manifest,
)
from orientalign.geometry import yaw_rotation
from orientalign.meshio import normalize_mesh, save_mesh
from orientalign.vlm import VlmConfig

from conftest import asymmetric_mesh, unit_cube_mesh


def _config(url, **kw):
    kw.setdefault("backoff_base", 0.0)
    return VlmConfig(endpoint_url=url, **kw)


def _write_tree(root, layout):
    """layout: {relative_path: mesh}"""
    for rel, mesh in layout.items():
        path = os.path.join(root, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        save_mesh(mesh, path)


class TestDiscover:
    def test_sorted_ids_and_categories(self, tmp_path):
        _write_tree(str(tmp_path), {
            "cups/b.obj": asymmetric_mesh(0),
            "cups/a.ply": asymmetric_mesh(1),
            "tools/x.obj": asymmetric_mesh(2),
            "loose.obj": asymmetric_mesh(3),
        })
        with open(tmp_path / "cups" / "readme.txt", "w") as fh:
            fh.write("not a mesh")
        found = discover_meshes(str(tmp_path))
        ids = [oid for oid, _c, _p in found]
        assert ids == sorted(ids)
        assert "cups/a" in ids and "cups/b" in ids and "tools/x" in ids
        assert "uncategorized/loose" in ids
        cats = {oid: c for oid, c, _p in found}
        assert cats["cups/a"] == "cups"
        assert cats["uncategorized/loose"] == "uncategorized"


class TestManifestIO:
    def test_roundtrip(self, tmp_path):
        from orientalign.curation import CurationEntry

        m = CurationManifest()
        m.objects["cups/a"] = CurationEntry(
            id="cups/a", category="cups", status=STATUS_ALIGNED,
            applied_yaw_deg=-90.0, verdict_raw="2", attempts=1)
        m.objects["cups/b"] = CurationEntry(
            id="cups/b", category="cups", status=STATUS_EXCLUDED)
        path = tmp_path / MANIFEST_NAME
        write_manifest(m, path)
        back = read_manifest(path)
        assert back.objects["cups/a"].applied_yaw_deg == -90.0
        assert back.counts() == {STATUS_ALIGNED: 1, STATUS_EXCLUDED: 1,
                                 STATUS_FAILED: 0}
        assert back.review_queue() == ["cups/b"]

    def test_schema_guard(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"schema": 99, "objects": {}}))
        with pytest.raises(ValueError):
            read_manifest(path)

    def test_atomic_write_no_temp_left(self, tmp_path):
        write_manifest(CurationManifest(), tmp_path / MANIFEST_NAME)
        leftovers = [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]
        assert leftovers == []


class TestCurateDirectory:
    def test_scripted_end_to_end(self, tmp_path, mock_vlm):
        """Four objects with scripted verdicts 1 / 3 / NONE / malformed-then-2."""
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        meshes = {f"cat/m{i}.obj": asymmetric_mesh(i) for i in range(4)}
        _write_tree(str(in_dir), meshes)
        srv = mock_vlm(replies=["1", "3", "NONE", "not sure...", "2"])
        manifest = curate_directory(
            str(in_dir), str(out_dir), _config(srv.url), resolution=64,
            max_workers=1)

        e = manifest.objects
        assert e["cat/m0"].status == STATUS_ALIGNED
        assert e["cat/m0"].applied_yaw_deg == 0.0
        assert e["cat/m1"].status == STATUS_ALIGNED
        assert e["cat/m1"].applied_yaw_deg == 180.0
        assert e["cat/m2"].status == STATUS_EXCLUDED
        assert e["cat/m2"].applied_yaw_deg is None
        assert e["cat/m3"].status == STATUS_ALIGNED
        assert e["cat/m3"].applied_yaw_deg == -90.0
        assert e["cat/m3"].attempts == 2
        assert srv.request_count == 5
        assert manifest.review_queue() == ["cat/m2"]

        # aligned outputs exist, excluded does not
        assert (out_dir / "cat" / "m0.obj").exists()
        assert (out_dir / "cat" / "m1.obj").exists()
        assert not (out_dir / "cat" / "m2.obj").exists()
        assert (out_dir / MANIFEST_NAME).exists()

        # the -90 yaw was actually applied to m3's geometry
        from orientalign.meshio import load_mesh

        out_m3 = load_mesh(str(out_dir / "cat" / "m3.obj"))
        expected = normalize_mesh(asymmetric_mesh(3)).transformed(
            rotation=yaw_rotation(np.deg2rad(-90.0)))
        np.testing.assert_allclose(out_m3.vertices, expected.vertices, atol=1e-5)

    def test_corrupt_mesh_isolated_as_failed(self, tmp_path, mock_vlm):
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        _write_tree(str(in_dir), {"cat/good.obj": asymmetric_mesh(0)})
        with open(in_dir / "cat" / "bad.obj", "w") as fh:
            fh.write("v 1 2\nf 1 2 3\n")
        srv = mock_vlm(replies=["1"])
        manifest = curate_directory(
            str(in_dir), str(out_dir), _config(srv.url), resolution=64,
            max_workers=1)
        assert manifest.objects["cat/bad"].status == STATUS_FAILED
        assert manifest.objects["cat/bad"].error
        assert manifest.objects["cat/good"].status == STATUS_ALIGNED

    def test_resume_skips_done(self, tmp_path, mock_vlm):
        in_dir = tmp_path / "in"
        out_dir = tmp_path / "out"
        _write_tree(str(in_dir), {"cat/a.obj": asymmetric_mesh(0)})
        srv = mock_vlm(replies=["1", "1"])
        curate_directory(str(in_dir), str(out_dir), _config(srv.url),
                         resolution=64, max_workers=1)
        assert srv.request_count == 1
        # add one more object; resume should only process the new one
        _write_tree(str(in_dir), {"cat/b.obj": asymmetric_mesh(1)})
        manifest = curate_directory(str(in_dir), str(out_dir), _config(srv.url),
                                    resume=True, resolution=64, max_workers=1)
        assert srv.request_count == 2
        assert set(manifest.objects) == {"cat/a", "cat/b"}

    def test_parallel_matches_serial_statuses(self, tmp_path, mock_vlm):
        in_dir = tmp_path / "in"
        _write_tree(str(in_dir), {f"cat/m{i}.obj": asymmetric_mesh(i)
                                  for i in range(6)})
        srv = mock_vlm(answer_fn=lambda images: "1")
        m_serial = curate_directory(str(in_dir), str(tmp_path / "o1"),
                                    _config(srv.url), resolution=64, max_workers=1)
        m_par = curate_directory(str(in_dir), str(tmp_path / "o2"),
                                 _config(srv.url), resolution=64, max_workers=4)
        assert m_serial.counts() == m_par.counts()
        assert sorted(m_serial.objects) == sorted(m_par.objects)


class TestErrorAnalysis:
    def test_rates_and_skip_list(self, tmp_path):
        ref_dir = tmp_path / "ref"
        cand_dir = tmp_path / "cand"
        # two asymmetric objects: one aligned, one yaw-90 off; plus a cube
        m0, m1 = asymmetric_mesh(0), asymmetric_mesh(1)
        cube = unit_cube_mesh()
        _write_tree(str(ref_dir), {
            "cat/a.obj": m0, "cat/b.obj": m1, "sym/c.obj": cube})
        _write_tree(str(cand_dir), {
            "cat/a.obj": m0,
            "cat/b.obj": m1.transformed(rotation=yaw_rotation(np.pi / 2)),
            "sym/c.obj": cube.transformed(rotation=yaw_rotation(np.pi / 2)),
        })
        report = vlm_error_analysis(str(cand_dir), str(ref_dir), n=4000)
        assert report.per_category["cat"]["n"] == 2
        assert report.per_category["cat"]["errors"] == 1
        assert report.per_category["cat"]["error_rate"] == 50.0
        # cube rotated by 90 is congruent: not flagged
        assert report.per_category["sym"]["errors"] == 0
        assert report.overall["n"] == 3

        skipped = vlm_error_analysis(str(cand_dir), str(ref_dir), n=4000,
                                     skip_ids={"sym/c"})
        assert "sym" not in skipped.per_category
        assert skipped.overall["n"] == 2

    def test_no_shared_objects(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        _write_tree(str(a), {"x/m.obj": asymmetric_mesh(0)})
        _write_tree(str(b), {"y/m.obj": asymmetric_mesh(1)})
        with pytest.raises(ValueError):
            vlm_error_analysis(str(a), str(b))

    def test_read_skip_list(self, tmp_path):
        p = tmp_path / "skip.txt"
        p.write_text("sym/c\n\n  cat/a  \n")
        assert read_skip_list(str(p)) == {"sym/c", "cat/a"}
        assert read_skip_list(None) == set()
