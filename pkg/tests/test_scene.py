"""Camera geometry and scene I/O.

Back-projection math (camera frame: +x right, +y down, +z forward):

    backproject(u, v, z) = ((u - cx) * z / fx,  (v - cy) * z / fy,  z)
    project(x, y, z)     = (fx * x / z + cx,    fy * y / z + cy)

Every expectation below is hand-computed from these formulas.
"""

from __future__ import annotations

import json

import numpy as np
import pytest

from pointsynth.errors import NonPositiveDepth, NoValidDepth, SceneFormatError
from pointsynth.scene import (
    CameraIntrinsics,
    DepthMap,
    ObjectCandidate,
    SceneObservation,
    backproject,
    bbox_point_cloud,
    load_scene,
    load_scenes,
    project,
    read_depth_png,
    read_rgb_png,
    robust_depth_at,
    write_depth_png,
    write_rgb_png,
)

from conftest import make_intrinsics


def _flat_scene(depth_value: float = 2.0, candidates=None) -> SceneObservation:
    """640x480 scene with constant depth and a uniform gray image."""
    intr = make_intrinsics()
    depth = np.full((intr.height, intr.width), depth_value, dtype=np.float32)
    rgb = np.full((intr.height, intr.width, 3), 128, dtype=np.uint8)
    return SceneObservation(
        scene_id="flat",
        rgb=rgb,
        depth=DepthMap(depth),
        intrinsics=intr,
        candidates=candidates or [],
    )


# ── backproject / project ────────────────────────────────────────────────


class TestBackproject:
    def test_right_of_center(self, intrinsics):
        # (820 - 320) * 2 / 500 = 2;  (240 - 240) * 2 / 500 = 0
        p = backproject(intrinsics, 820.0, 240.0, 2.0)
        np.testing.assert_allclose(p, [2.0, 0.0, 2.0], atol=1e-15)

    def test_below_center(self, intrinsics):
        # (740 - 240) * 0.5 / 500 = 0.5 along +y (down)
        p = backproject(intrinsics, 320.0, 740.0, 0.5)
        np.testing.assert_allclose(p, [0.0, 0.5, 0.5], atol=1e-15)

    def test_principal_point_is_optical_axis(self, intrinsics):
        p = backproject(intrinsics, 320.0, 240.0, 3.7)
        np.testing.assert_allclose(p, [0.0, 0.0, 3.7], atol=1e-15)

    def test_linear_in_depth(self, intrinsics):
        p1 = backproject(intrinsics, 400.0, 300.0, 1.0)
        p2 = backproject(intrinsics, 400.0, 300.0, 2.0)
        np.testing.assert_allclose(p2, 2.0 * p1, atol=1e-15)

    def test_rejects_zero_and_negative_depth(self, intrinsics):
        with pytest.raises(NonPositiveDepth):
            backproject(intrinsics, 320.0, 240.0, 0.0)
        with pytest.raises(NonPositiveDepth):
            backproject(intrinsics, 320.0, 240.0, -0.5)


class TestProject:
    def test_known_point(self, intrinsics):
        # u = 500 * 1 / 2 + 320 = 570;  v = 500 * 1 / 2 + 240 = 490
        u, v = project(intrinsics, np.array([1.0, 1.0, 2.0]))
        assert u == pytest.approx(570.0, abs=1e-12)
        assert v == pytest.approx(490.0, abs=1e-12)

    def test_rejects_nonpositive_depth(self, intrinsics):
        with pytest.raises(NonPositiveDepth):
            project(intrinsics, np.array([0.0, 0.0, 0.0]))

    def test_round_trip_seeded_draws(self, intrinsics):
        """project(backproject(u, v, z)) returns (u, v) to < 1e-6 px."""
        rng = np.random.default_rng(101)
        for _ in range(2000):
            u = float(rng.uniform(0, intrinsics.width))
            v = float(rng.uniform(0, intrinsics.height))
            z = float(rng.uniform(0.05, 8.0))
            u2, v2 = project(intrinsics, backproject(intrinsics, u, v, z))
            assert abs(u2 - u) < 1e-6
            assert abs(v2 - v) < 1e-6


# ── intrinsics / container validation ────────────────────────────────────


class TestValidation:
    def test_intrinsics_reject_bad_values(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=0.0, fy=500.0, cx=10.0, cy=10.0, width=64, height=64)
        with pytest.raises(ValueError):
            CameraIntrinsics(fx=500.0, fy=500.0, cx=64.0, cy=10.0, width=64, height=64)
        with pytest.raises(ValueError):
            CameraIntrinsics(
                fx=500.0, fy=500.0, cx=10.0, cy=10.0, width=64, height=64, depth_scale=0.0
            )

    def test_depth_map_rejects_bad_arrays(self):
        with pytest.raises(ValueError):
            DepthMap(np.zeros((4, 4, 3), dtype=np.float32))
        with pytest.raises(ValueError):
            DepthMap(np.full((4, 4), -1.0, dtype=np.float32))
        with pytest.raises(ValueError):
            DepthMap(np.full((4, 4), np.nan, dtype=np.float32))

    def test_candidate_bbox_must_be_ordered(self):
        with pytest.raises(ValueError):
            ObjectCandidate(label="block", bbox=(10, 0, 5, 5))
        with pytest.raises(ValueError):
            ObjectCandidate(label="block", bbox=(-1, 0, 5, 5))
        assert ObjectCandidate(label="block", bbox=(0, 0, 9, 19)).center == (4.5, 9.5)

    def test_scene_rejects_mismatched_shapes(self):
        intr = make_intrinsics()
        depth = DepthMap(np.full((480, 640), 1.0, dtype=np.float32))
        bad_rgb = np.zeros((480, 320, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            SceneObservation("s", bad_rgb, depth, intr, [])
        rgb = np.zeros((480, 640, 3), dtype=np.uint8)
        with pytest.raises(ValueError):
            SceneObservation(
                "s", rgb, depth, intr, [ObjectCandidate("block", (0, 0, 640, 10))]
            )


# ── robust depth ─────────────────────────────────────────────────────────


class TestRobustDepth:
    def test_median_skips_invalid_center(self):
        scene = _flat_scene(2.0)
        scene.depth.meters[240, 320] = 0.0  # the queried pixel itself is invalid
        assert robust_depth_at(scene.depth, 320, 240) == pytest.approx(2.0)

    def test_median_of_mixed_window(self):
        depth = DepthMap(np.zeros((5, 5), dtype=np.float32))
        depth.meters[0, 0] = 1.0
        depth.meters[0, 1] = 3.0
        # window at (0, 0) clips to rows/cols 0..2; valid = {1, 3} -> median 2
        assert robust_depth_at(depth, 0, 0, half_window=2) == pytest.approx(2.0)

    def test_all_invalid_raises(self):
        depth = DepthMap(np.zeros((5, 5), dtype=np.float32))
        with pytest.raises(NoValidDepth):
            robust_depth_at(depth, 2, 2, half_window=2)

    def test_out_of_image_query_rejected(self):
        depth = DepthMap(np.full((5, 5), 1.0, dtype=np.float32))
        with pytest.raises(ValueError):
            robust_depth_at(depth, 5, 0)


# ── bbox point clouds ────────────────────────────────────────────────────


class TestBboxPointCloud:
    def test_grid_count_stride_5(self):
        # 10x10 inclusive box at stride 5: u, v in {0, 5, 10} -> 3 x 3 = 9
        scene = _flat_scene(2.0)
        cloud = bbox_point_cloud(scene, (0, 0, 10, 10), stride=5)
        assert cloud.shape == (9, 3)
        # first grid point is pixel (0, 0): ((0-320)*2/500, (0-240)*2/500, 2)
        np.testing.assert_allclose(cloud[0], [-1.28, -0.96, 2.0], atol=1e-12)

    def test_stride_1_full_grid(self):
        scene = _flat_scene(1.0)
        cloud = bbox_point_cloud(scene, (100, 100, 110, 110), stride=1)
        assert cloud.shape == (121, 3)

    def test_stride_4_grid_is_subset_of_stride_1(self):
        scene = _flat_scene(1.5)
        c4 = bbox_point_cloud(scene, (40, 60, 60, 80), stride=4)
        c1 = bbox_point_cloud(scene, (40, 60, 60, 80), stride=1)
        as_rows = {tuple(row) for row in c1}
        assert all(tuple(row) in as_rows for row in c4)

    def test_invalid_depth_pixels_dropped(self):
        scene = _flat_scene(2.0)
        scene.depth.meters[0:11, 0:11] = 0.0
        scene.depth.meters[5, 5] = 1.0  # only one valid grid pixel remains
        cloud = bbox_point_cloud(scene, (0, 0, 10, 10), stride=5)
        assert cloud.shape == (1, 3)
        assert cloud[0, 2] == pytest.approx(1.0)

    def test_all_depths_positive(self, demo_scene):
        for cand in demo_scene.candidates:
            cloud = bbox_point_cloud(demo_scene, cand.bbox, stride=4)
            assert len(cloud) > 0
            assert (cloud[:, 2] > 0).all()

    def test_bad_stride_rejected(self):
        scene = _flat_scene(1.0)
        with pytest.raises(ValueError):
            bbox_point_cloud(scene, (0, 0, 10, 10), stride=0)


# ── PNG and scene-directory I/O ──────────────────────────────────────────


class TestSceneIO:
    def test_rgb_png_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        rgb = rng.integers(0, 256, size=(32, 48, 3), dtype=np.uint8)
        write_rgb_png(tmp_path / "x.png", rgb)
        np.testing.assert_array_equal(read_rgb_png(tmp_path / "x.png"), rgb)

    def test_depth_png_round_trip_at_mm_resolution(self, tmp_path):
        # 0.5 m at depth_scale 0.001 stores as exactly 500 units
        depth = np.full((8, 8), 0.5, dtype=np.float32)
        depth[0, 0] = 1.234
        write_depth_png(tmp_path / "d.png", depth, 0.001)
        back = read_depth_png(tmp_path / "d.png", 0.001)
        assert back.meters[4, 4] == pytest.approx(0.5, abs=1e-9)
        assert back.meters[0, 0] == pytest.approx(1.234, abs=5e-4)

    def test_depth_out_of_range_rejected(self, tmp_path):
        depth = np.full((4, 4), 70.0, dtype=np.float32)  # 70000 mm > uint16 max
        with pytest.raises(SceneFormatError):
            write_depth_png(tmp_path / "d.png", depth, 0.001)

    def test_scene_directory_round_trip(self, scenes_dir):
        scene = load_scene(scenes_dir / "scene_000")
        assert scene.scene_id == "scene_000"
        assert scene.rgb.shape == (480, 640, 3)
        assert scene.depth.meters.shape == (480, 640)
        assert scene.intrinsics.fx == pytest.approx(525.0)
        labels = {c.label for c in scene.candidates}
        assert labels == {"block", "plate"}

    def test_missing_camera_json(self, tmp_path):
        (tmp_path / "scene_bad").mkdir()
        with pytest.raises(SceneFormatError):
            load_scene(tmp_path / "scene_bad")

    def test_corrupt_objects_json(self, scenes_dir, tmp_path):
        import shutil

        bad = tmp_path / "scene_000"
        shutil.copytree(scenes_dir / "scene_000", bad)
        (bad / "objects.json").write_text("[{]")
        with pytest.raises(SceneFormatError):
            load_scene(bad)

    def test_camera_json_missing_key(self, scenes_dir, tmp_path):
        import shutil

        bad = tmp_path / "scene_000"
        shutil.copytree(scenes_dir / "scene_000", bad)
        cam = json.loads((bad / "camera.json").read_text())
        del cam["fx"]
        (bad / "camera.json").write_text(json.dumps(cam))
        with pytest.raises(SceneFormatError):
            load_scene(bad)

    def test_load_scenes_sorted_and_nonempty(self, scenes_dir, tmp_path):
        scenes = load_scenes(scenes_dir)
        assert [s.scene_id for s in scenes] == ["scene_000", "scene_001", "scene_002"]
        with pytest.raises(SceneFormatError):
            load_scenes(tmp_path)  # no scene directories underneath
