import filecmp

import numpy as np
import pytest

from terramesh.synth import (DatasetConfig, TerrainSpec, TrajectorySpec, build_dataset, generate_terrain,
                             generate_trajectory, keyframes, load_manifest, load_scene, read_sparse_json,
                             render_scene, sample_sparse_depth, write_sparse_json)
from terramesh.geometry import DepthImage

FLAT = TerrainSpec(extent=200.0, n_bumps=0, n_buildings=0)
SINGLE = TrajectorySpec(rows=1, per_row=1)


def one_view(spec, tspec=SINGLE):
    terrain = generate_terrain(spec)
    cam = generate_trajectory(terrain, tspec)[0]
    return terrain, cam, *render_scene(terrain, cam)


def test_flat_ground_depth_is_altitude():
    _, _, rgb, gt = one_view(FLAT)
    assert gt.shape == (128, 128) and gt.mask.all()
    assert np.abs(gt.depth - 100.0).max() < 1e-9
    assert rgb.shape == (128, 128, 3) and rgb.min() >= 0 and rgb.max() <= 1
    np.testing.assert_array_equal(np.round(rgb * 255), rgb * 255)


def test_bumps_only_field_is_smooth_and_below_altitude():
    _, _, _, gt = one_view(TerrainSpec(n_buildings=0, seed=5))
    assert gt.depth.max() <= 100.0 + 1e-9 and gt.depth.min() > 80.0
    assert np.abs(np.diff(gt.depth, axis=1)).max() < 2.0


def test_single_building_step_and_roof_depth():
    spec = TerrainSpec(extent=120.0, n_bumps=0, n_buildings=1, building_height=(30.0, 30.0),
                       building_size=(30.0, 30.0), seed=2)
    terrain, cam, _, gt = one_view(spec)
    assert gt.depth.max() - gt.depth.min() == pytest.approx(30.0, abs=1e-9)
    # pixel whose ray hits the roof centre region
    cx, cy = terrain.boxes[0, :2]
    rel = np.array([cx, cy, 30.0]) - cam.p
    pc = cam.R.T @ rel
    col, row = int(cam.fx * pc[0] / pc[2] + cam.cx), int(cam.fy * pc[1] / pc[2] + cam.cy)
    if 0 <= row < 128 and 0 <= col < 128:
        assert gt.depth[row, col] == pytest.approx(70.0, abs=1e-9)
    assert (np.abs(gt.depth - 70.0) < 1e-9).sum() > 20


def test_terrain_is_deterministic_and_seed_dependent():
    a, b = generate_terrain(TerrainSpec(seed=7)), generate_terrain(TerrainSpec(seed=7))
    np.testing.assert_array_equal(a.boxes, b.boxes)
    np.testing.assert_array_equal(a.bumps, b.bumps)
    assert not np.array_equal(a.boxes, generate_terrain(TerrainSpec(seed=8)).boxes)


def ground_corners(cam):
    """Ground-plane (z = 0) footprint of the view as (xmin, xmax, ymin, ymax)."""
    pts = []
    for u, v in [(0, 0), (cam.width, 0), (0, cam.height), (cam.width, cam.height)]:
        ray = cam.R @ cam.rays(np.array(u, float), np.array(v, float))
        pts.append(cam.p + ray * (-cam.p[2] / ray[2]))
    pts = np.array(pts)
    return pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()


def test_trajectory_grid_spacing_and_overlap():
    tspec = TrajectorySpec(rows=2, per_row=3)
    cams = generate_trajectory(generate_terrain(TerrainSpec()), tspec)
    assert len(cams) == 6
    w = tspec.footprint()
    pos = np.array([c.p for c in cams])
    assert np.allclose(pos[:, 2], 100.0)
    assert pos[1, 0] - pos[0, 0] == pytest.approx(0.2 * w)
    assert pos[3, 1] - pos[0, 1] == pytest.approx(0.25 * w)
    a, b, c = ground_corners(cams[0]), ground_corners(cams[1]), ground_corners(cams[3])
    assert a[1] - a[0] == pytest.approx(w)
    assert (a[1] - b[0]) / w == pytest.approx(0.80)
    assert (min(a[3], c[3]) - max(a[2], c[2])) / w == pytest.approx(0.75)


def test_infeasible_trajectories_rejected():
    terrain = generate_terrain(TerrainSpec(extent=150.0))
    with pytest.raises(ValueError, match="col_overlap"):
        generate_trajectory(terrain, TrajectorySpec(col_overlap=1.0))
    with pytest.raises(ValueError, match="footprint"):
        generate_trajectory(terrain, TrajectorySpec(per_row=4, col_overlap=0.5))
    with pytest.raises(ValueError, match="not above"):
        one_view(TerrainSpec(extent=200.0, n_bumps=0, n_buildings=3, building_height=(120.0, 130.0)))


def test_sparse_sampling_counts_and_noise():
    _, _, rgb, gt = one_view(TerrainSpec(seed=3))
    clean = sample_sparse_depth(gt, rgb, 1000, noise=False, seed=11)
    noisy = sample_sparse_depth(gt, rgb, 1000, noise=True, seed=11)
    assert clean.mask.sum() == 1000
    np.testing.assert_array_equal(clean.mask, noisy.mask)
    np.testing.assert_array_equal(clean.depth[clean.mask], gt.depth[clean.mask])
    rel = noisy.depth[noisy.mask] / gt.depth[noisy.mask] - 1
    assert 0.008 <= rel.std() <= 0.012
    with pytest.raises(ValueError):
        sample_sparse_depth(gt, rgb, 128 * 128 + 1)


def test_sparse_json_round_trip(tmp_path):
    sp = DepthImage.from_points((5, 7), [0, 4, 2], [6, 0, 3], [1.5, 2.25, 3.125])
    write_sparse_json(tmp_path / "s.json", sp)
    back = read_sparse_json(tmp_path / "s.json")
    np.testing.assert_array_equal(back.depth, sp.depth)


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    cfg = DatasetConfig(n_sequences=3, split_counts=(1, 1, 1), sparsity_levels=(500,), seed=4)
    return root, cfg, build_dataset(root, cfg)


def test_dataset_manifest_and_loading(tiny_dataset):
    root, cfg, manifest = tiny_dataset
    assert load_manifest(root) == manifest
    assert DatasetConfig.from_json(manifest["config"]) == cfg
    splits = {s: keyframes(manifest, s) for s in ("train", "val", "test")}
    assert [len(v) for v in splits.values()] == [2, 2, 2]
    assert not set(splits["train"]) & set(splits["test"])
    scene = load_scene(root, splits["test"][0], 500, noise=True)
    assert scene.sparse.mask.sum() == 500 and scene.gt.mask.all()
    assert scene.scene_id.endswith("s500_noisy")
    with pytest.raises(FileNotFoundError):
        load_scene(root, splits["test"][0], 1000)


def test_dataset_build_is_deterministic(tiny_dataset, tmp_path):
    root, cfg, _ = tiny_dataset
    build_dataset(tmp_path, cfg)
    for kf in keyframes(load_manifest(root), "val"):
        for name in ("rgb.ppm", "gt_depth.pfm", "camera.json", "s500_clean/sparse_depth.json",
                     "s500_noisy/sparse_depth.json"):
            assert filecmp.cmp(root / kf / name, tmp_path / kf / name, shallow=False)


def test_default_split_is_14_2_4():
    cfg = DatasetConfig()
    assert cfg.split_counts == (14, 2, 4) and cfg.n_sequences == 20
    with pytest.raises(ValueError):
        DatasetConfig(n_sequences=5)
