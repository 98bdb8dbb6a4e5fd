import json
import math

import numpy as np
import pytest
from shapely.geometry import LineString

from lanekit import Scene, SceneConfig, TopViewGrid, generate_dataset, generate_scene, scene_to_labels
from lanekit.camera import CameraModel
from lanekit.geometry import polylines_intersect
from lanekit.scenes import delimiter_offsets, item_seed

from oracles import supercover

FLAT = dict(
    lane_count_range=(3, 3),
    curvature_range=(0.0, 0.0),
    heading_range=(0.0, 0.0),
    ego_offset_range=(0.0, 0.0),
    camera_height_range=(1.5, 1.5),
    camera_pitch_range=(0.05, 0.05),
    camera_yaw_range=(0.0, 0.0),
)


def _bytes(scene):
    return json.dumps(scene.to_record("x"), sort_keys=True).encode()


def test_same_seed_same_bytes():
    assert _bytes(generate_scene(42)) == _bytes(generate_scene(42))
    assert _bytes(generate_scene(42)) != _bytes(generate_scene(43))


def test_degenerate_ranges_give_straight_parallel_delimiters():
    s = generate_scene(5, SceneConfig(**FLAT))
    assert len(s.lanes) == 4
    xs = []
    for lane in s.lanes:
        pts = lane.points
        assert np.ptp(pts[:, 0]) < 1e-9
        assert pts[0, 1] == pytest.approx(-5.0) and pts[-1, 1] == pytest.approx(100.0)
        assert np.allclose(np.diff(pts[:, 1]), 0.5)
        xs.append(pts[0, 0])
    assert np.all(np.diff(xs) >= 3.0 - 1e-9)
    # outer delimiters are solid, inner ones dashed
    assert [l.dash is None for l in s.lanes] == [True, False, False, True]
    assert s.camera.height == 1.5 and s.camera.yaw == 0.0


def test_corpus_histogram_and_gaps():
    counts = set()
    min_gap = math.inf
    for i in range(1000):
        s = generate_scene(item_seed(1, i))
        counts.add(len(s.lanes) - 1)
        for a, b in zip(s.lanes[:-1], s.lanes[1:]):
            min_gap = min(min_gap, LineString(a.points).distance(LineString(b.points)))
    assert counts == {2, 3, 4, 5}
    assert min_gap >= 1.0


def test_sampled_scalars_within_ranges():
    cfg = SceneConfig()
    for i in range(10_000):
        p = generate_scene(item_seed(99, i), cfg).params
        assert cfg.lane_count_range[0] <= p["lane_count"] <= cfg.lane_count_range[1]
        assert all(cfg.lane_width_range[0] <= w <= cfg.lane_width_range[1] for w in p["lane_widths"])
        assert cfg.curvature_range[0] <= p["curvature"] <= cfg.curvature_range[1]
        assert cfg.heading_range[0] <= p["heading"] <= cfg.heading_range[1]
        assert cfg.ego_offset_range[0] <= p["ego_offset"] <= cfg.ego_offset_range[1]
        assert 0 <= p["ego_lane"] < p["lane_count"]
        assert cfg.camera_height_range[0] <= p["camera_height"] <= cfg.camera_height_range[1]
        assert cfg.camera_pitch_range[0] <= p["camera_pitch"] <= cfg.camera_pitch_range[1]
        assert cfg.camera_yaw_range[0] <= p["camera_yaw"] <= cfg.camera_yaw_range[1]
        for on, gap in p["dashes"]:
            assert cfg.dash_on_range[0] <= on <= cfg.dash_on_range[1]
            assert cfg.dash_gap_range[0] <= gap <= cfg.dash_gap_range[1]


def test_delimiters_simple_and_disjoint():
    for i in range(150):
        s = generate_scene(item_seed(3, i))
        for k, a in enumerate(s.lanes):
            assert LineString(a.points).is_simple
            for b in s.lanes[k + 1:]:
                assert not polylines_intersect(a.points, b.points)
                assert not LineString(a.points).intersects(LineString(b.points))


def test_curvature_realized():
    # after the clothoid ramp the reference heading changes at the drawn curvature
    cfg = SceneConfig(lane_count_range=(2, 2), curvature_range=(0.015, 0.015), heading_range=(0.0, 0.0),
                      ego_offset_range=(0.0, 0.0))
    s = generate_scene(11, cfg)
    offsets = delimiter_offsets(s.params["lane_widths"], s.params["ego_lane"], 0.0)
    for lane, r in zip(s.lanes, offsets):
        d = np.diff(lane.points, axis=0)
        phi = np.unwrap(np.arctan2(d[:, 0], d[:, 1]))
        arc = np.cumsum(np.hypot(*d.T))
        late = arc > 40
        # a right-turning curve: delimiters offset to the right (r > 0) lie on the inside
        k_eff = np.polyfit(arc[late], phi[late], 1)[0]
        assert k_eff == pytest.approx(0.015 / (1 - 0.015 * r), rel=1e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        SceneConfig(lane_count_range=(3, 2))
    with pytest.raises(ValueError):
        SceneConfig(lane_count_range=(0, 2))
    with pytest.raises(ValueError, match="closer"):
        SceneConfig(lane_width_range=(0.8, 3.0))
    with pytest.raises(ValueError, match="folds"):
        SceneConfig(curvature_range=(-0.1, 0.1))
    with pytest.raises(ValueError):
        SceneConfig.from_json({"lane_count": 3})
    cfg = SceneConfig(lane_count_range=[2, 3])
    assert SceneConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg


def test_straight_three_lanes_four_tile_columns():
    grid = TopViewGrid()
    s = generate_scene(8, SceneConfig(**FLAT))
    tiles, img = scene_to_labels(s, grid)
    assert len({e.col for e in tiles}) == 4
    assert len(tiles) == 4 * grid.tile_rows
    assert img.shape == grid.shape and img.max() > 0.5


def test_empty_scene_empty_labels():
    grid = TopViewGrid()
    s = Scene(0, (), CameraModel(1000, 1000, 640, 360, 1.5, 0.05))
    tiles, img = scene_to_labels(s, grid)
    assert len(tiles) == 0 and not img.any()


def test_curved_scene_tiles_match_supercover():
    grid = TopViewGrid()
    for seed in (2, 17):
        s = generate_scene(seed, SceneConfig(curvature_range=(0.012, 0.02)))
        tiles, _ = scene_to_labels(s, grid)
        assert {(e.row, e.col) for e in tiles} == supercover([l.points for l in s.lanes], grid)


def test_record_round_trip():
    s = generate_scene(77)
    back = Scene.from_record(json.loads(json.dumps(s.to_record("000001"))))
    assert back.camera == s.camera
    assert [l.dash for l in back.lanes] == [l.dash for l in s.lanes]
    for a, b in zip(back.lanes, s.lanes):
        np.testing.assert_array_equal(a.points, b.points)


def test_dataset_independent_of_threads():
    grid = TopViewGrid()
    a = list(generate_dataset(5, 40, None, grid, threads=1))
    b = list(generate_dataset(5, 40, None, grid, threads=6, chunk=7))
    assert [x.id for x in a] == [f"{i:06d}" for i in range(40)]
    assert [_bytes(x.scene) for x in a] == [_bytes(x.scene) for x in b]
    assert [x.tiles for x in a] == [x.tiles for x in b]
    assert len({item_seed(5, i) for i in range(1000)}) == 1000


def test_dataset_errors_name_item():
    class Bad(SceneConfig):
        def validate(self):
            raise ValueError("broken")

    with pytest.raises(RuntimeError, match="item 0"):
        list(generate_dataset(1, 2, Bad.__new__(Bad), TopViewGrid()))
