"""Bridge tests. The compiler is exercised only through its CLI and file
formats; Blender-dependent paths run against a fake bpy, and the real-render
integration test is skipped when no blender binary is available."""
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from scenec_bridge.gltf_scene import compare_poses, load_interchange
from scenec_bridge.maskcheck import edge_pixels, mask_agreement

FIXTURE_SCRIPT = """
import json, sys
from pathlib import Path
sys.path.insert(0, {tests_dir!r})
from fixtures import write_fixture_tree
write_fixture_tree(Path({root!r}), resolution=(160, 90), cameras_per_scene=3)
"""


@pytest.fixture(scope="module")
def compiled_scene(tmp_path_factory):
    """Fixture scene compiled via the scenec CLI (external interface only)."""
    root = tmp_path_factory.mktemp("bridge_fixture")
    tests_dir = str(Path(__file__).resolve().parents[2] / "tests")
    script = FIXTURE_SCRIPT.format(tests_dir=tests_dir, root=str(root))
    subprocess.run([sys.executable, "-c", script], check=True)
    subprocess.run(
        [sys.executable, "-m", "scenec.cli", "build-scene",
         "--config", str(root / "config.json"), "--scene-id", "fixture-001"],
        check=True,
    )
    scene_dir = root / "out" / "fixture-001"
    return scene_dir / "scene.gltf", scene_dir / "scene.json", root


class TestGltfReader:
    def test_instance_count_matches_scene_file(self, compiled_scene):
        gltf_path, json_path, _ = compiled_scene
        scene = load_interchange(gltf_path)
        doc = json.loads(json_path.read_text())
        assert len(scene.instances) == len(doc["instances"])
        assert scene.scene_id == doc["meta"]["scene_id"]
        assert scene.hdri == doc["lighting"]["hdri"]

    def test_poses_match_within_1e4(self, compiled_scene):
        gltf_path, json_path, _ = compiled_scene
        scene = load_interchange(gltf_path)
        rows = compare_poses(scene, json_path, tol_m=1e-4, tol_rad=1e-4)
        assert rows and all(r.get("ok") for r in rows), rows

    def test_cameras_parsed(self, compiled_scene):
        gltf_path, json_path, _ = compiled_scene
        scene = load_interchange(gltf_path)
        doc = json.loads(json_path.read_text())
        assert len(scene.cameras) == len(doc["cameras"]) == 3
        for cam in scene.cameras:
            assert cam.yfov > 0
            assert {"fx", "fy", "cx", "cy"} <= set(cam.intrinsics)

    def test_static_meshes_decoded(self, compiled_scene):
        gltf_path, _, _ = compiled_scene
        scene = load_interchange(gltf_path)
        names = {m.name for m in scene.static_meshes}
        assert "mesh_ground" in names
        ground = next(m for m in scene.static_meshes if m.name == "mesh_ground")
        assert ground.vertices.shape[1] == 3
        assert ground.faces.shape == (2, 3)


class TestImporterFakeBpy:
    def test_import_scene(self, compiled_scene):
        gltf_path, json_path, _ = compiled_scene
        import fake_bpy

        bpy = fake_bpy.install()
        from scenec_bridge.importer import import_scene

        report = import_scene(gltf_path)
        doc = json.loads(json_path.read_text())
        assert report.imported_instances == len(doc["instances"])
        assert report.imported_cameras == 3
        names = {o.name for o in bpy._linked}
        for inst in doc["instances"]:
            matches = [n for n in names if n.startswith(f"inst_{inst['instance_id']}_")]
            assert len(matches) == 1
        # no real meshes shipped: every instance warns and gets a cube
        assert len(report.warnings) >= report.imported_instances

    def test_pass_index_and_pose(self, compiled_scene):
        gltf_path, json_path, _ = compiled_scene
        import fake_bpy

        bpy = fake_bpy.install()
        from scenec_bridge.importer import import_scene

        import_scene(gltf_path)
        doc = json.loads(json_path.read_text())
        by_id = {i["instance_id"]: i for i in doc["instances"]}
        checked = 0
        for obj in bpy._linked:
            if not obj.name.startswith("inst_"):
                continue
            instance_id = int(obj.name.split("_")[1])
            ref = by_id[instance_id]
            assert obj.pass_index == instance_id
            world = np.array(obj.matrix_world, dtype=float)
            assert np.allclose(world[:3, 3], ref["pose"]["translation"], atol=1e-4)
            checked += 1
        assert checked == len(by_id)

    def test_render_rgb_records_files(self, compiled_scene, tmp_path):
        gltf_path, _, _ = compiled_scene
        import fake_bpy

        bpy = fake_bpy.install()
        from scenec_bridge.importer import import_scene, render_rgb

        report = import_scene(gltf_path)
        report = render_rgb(report, tmp_path, resolution=(64, 36), samples=1)
        assert len(report.rendered) == 3
        assert bpy.context.scene.render.resolution_x == 64
        assert bpy.context.scene.cycles.samples == 1

    def test_hdri_missing_warns(self, compiled_scene):
        gltf_path, _, _ = compiled_scene
        import fake_bpy

        fake_bpy.install()
        from scenec_bridge.importer import import_scene

        report = import_scene(gltf_path, catalog_dir=None)
        assert any("HDRI" in w for w in report.warnings)


class TestMaskCheck:
    def test_identical_masks(self):
        m = np.zeros((20, 20), dtype=np.int32)
        m[5:10, 5:10] = 3
        assert mask_agreement(m, m) == 1.0

    def test_edge_exclusion(self):
        a = np.zeros((20, 20), dtype=np.int32)
        a[5:10, 5:10] = 3
        b = a.copy()
        b[4:10, 5:10] = 3  # one-pixel dilation: differs only at the boundary
        assert mask_agreement(a, b, ignore_edges=True) == 1.0
        assert mask_agreement(a, b, ignore_edges=False) < 1.0

    def test_disagreement_counted(self):
        a = np.zeros((10, 10), dtype=np.int32)
        b = np.ones((10, 10), dtype=np.int32)
        assert mask_agreement(a, b) == 0.0

    def test_edge_pixels(self):
        m = np.zeros((5, 5), dtype=np.int32)
        m[2, 2] = 1
        edges = edge_pixels(m)
        assert edges[2, 2] and edges[1, 2] and edges[2, 1]
        assert not edges[0, 0]


BLENDER = shutil.which("blender")


@pytest.mark.skipif(BLENDER is None, reason="blender binary not available")
class TestBlenderIntegration:
    def test_import_and_index_render(self, compiled_scene, tmp_path):
        gltf_path, json_path, root = compiled_scene
        bridge_py = Path(__file__).resolve().parents[1] / "bridge.py"
        out = tmp_path / "render"
        subprocess.run(
            [BLENDER, "--background", "--python", str(bridge_py), "--",
             str(gltf_path), str(out), "--scene-json", str(json_path),
             "--resolution", "160x90", "--samples", "1", "--index-pass"],
            check=True, timeout=600,
        )
        report = json.loads((out / "bridge_report.json").read_text())
        doc = json.loads(json_path.read_text())
        assert report["imported_instances"] == len(doc["instances"])
        assert all(r.get("ok") for r in report["poses"])
        assert len(report["rendered"]) == 3
