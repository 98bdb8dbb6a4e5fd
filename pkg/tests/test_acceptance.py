"""Acceptance criteria 1-11, one test each; every test prints a PASS/FAIL line."""
import json
import math
import time

import numpy as np
from shapely.geometry import LineString, box

from lanekit import (
    CameraModel, PerturbSpec, ScoredSegment, Segment, SceneConfig, TileMap, TopViewGrid, average_precision,
    build_ipm, cluster_tiles, cmd, decode_tiles, encode_tiles, generate_scene, ground_to_image, hungarian,
    image_to_ground, map_eval, perturb_predictions, pr_curve, seg_dist,
)
from lanekit import io
from lanekit.cli import main
from lanekit.pipeline import run_pipeline
from lanekit.scenes import item_seed
from lanekit.segment_eval import THRESHOLDS, Matching

from conftest import record
from oracles import brute_assignment, brute_cmd
from test_clustering import _gap_fixture, visible_delimiters
from test_tiles import arc_deviation


def _gt_segments(n, seed):
    grid = TopViewGrid()
    gt = {}
    for i in range(n):
        tm = encode_tiles(generate_scene(item_seed(seed, i)).lanes, grid)
        gt[i] = tm
    return grid, gt


def test_c1_perfect_prediction_identity():
    _, gt = _gt_segments(100, 1)
    segs = {k: decode_tiles(v, 0.5) for k, v in gt.items()}
    t0 = time.perf_counter()
    rep = map_eval(segs, segs)
    dt = time.perf_counter() - t0
    ok = all(rep.ap[t] == 1.0 for t in THRESHOLDS) and rep.map == 1.0 and dt < 10
    record(1, "perfect-prediction identity", ok, f"AP={[rep.ap[t] for t in THRESHOLDS]} in {dt:.2f} s")
    assert ok


def test_c2_hungarian_oracle():
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(1000):
        n, m = rng.integers(1, 8, 2)
        c = rng.random((n, m))
        c[rng.random((n, m)) < 0.3] = math.inf
        pairs = hungarian(c)
        k, best = brute_assignment(c)
        bad += not (len(pairs) == k and math.fsum(c[i, j] for i, j in pairs) == best)
    record(2, "Hungarian equals exhaustive enumeration", bad == 0, f"{bad} mismatches in 1000")
    assert bad == 0


def test_c3_seg_dist_properties():
    rng = np.random.default_rng(3)
    worst = 0.0
    inf_mismatch = 0
    for _ in range(10_000):
        p = rng.uniform(-3, 3, 2)
        a = rng.uniform(-math.pi, math.pi)
        L = rng.uniform(0.2, 3)
        s1 = Segment(tuple(p), tuple(p + L * np.array([math.cos(a), math.sin(a)])))
        d = rng.normal(0, 0.3, 4)
        s2 = Segment((s1.p1[0] + d[0], s1.p1[1] + d[1]), (s1.p2[0] + d[2], s1.p2[1] + d[3]))
        th = rng.uniform(-math.pi, math.pi)
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        t = rng.uniform(-50, 50, 2)
        mv = lambda s: Segment(tuple(R @ s.p1 + t), tuple(R @ s.p2 + t))  # noqa: E731
        base = seg_dist(s1, s2)
        for other in (seg_dist(s2, s1), seg_dist(mv(s1), mv(s2))):
            if math.isinf(base) or math.isinf(other):
                inf_mismatch += math.isinf(base) != math.isinf(other)
            else:
                worst = max(worst, abs(other - base))
    u = Segment((0, 0), (0, 1))
    examples = (
        seg_dist(u, u) == 0.0,
        abs(seg_dist(u, Segment((0.3, 0), (0.3, 1))) - 0.3) <= 1e-15,
        seg_dist(u, Segment((0.3, 5), (0.3, 6))) == math.inf,
    )
    ok = worst < 1e-9 and inf_mismatch == 0 and all(examples)
    record(3, "seg_dist symmetry, rigid invariance, worked examples", ok,
           f"max diff {worst:.1e}, inf mismatches {inf_mismatch}, examples {examples}")
    assert ok


def test_c4_ap_hand_cases():
    def one(flags):
        m = Matching([(i, 0, 0.0) for i, f in enumerate(flags) if f], [i for i, f in enumerate(flags) if not f], [])
        return average_precision(pr_curve([m], [[0.9, 0.8]]))

    a, b = one([True, False]), one([False, True])
    ok = a == 1.0 and b == 0.5
    record(4, "AP hand cases", ok, f"{a}, {b}")
    assert ok


def test_c5_codec_round_trip():
    grid = TopViewGrid()
    cfg = SceneConfig(curvature_range=(0.0, 0.0))
    worst = 0.0
    for i in range(50):
        lanes = generate_scene(item_seed(5, i), cfg).lanes
        for lane in lanes:
            ls = LineString(lane.points)
            for s in decode_tiles(encode_tiles([lane], grid), 0.5):
                x0, x1, y0, y1 = grid.tile_bounds(s.row, s.col)
                piece = ls.intersection(box(x0, y0, x1, y1))
                ends = np.array(piece.coords)[[0, -1]]
                got = np.array([s.p1, s.p2])
                worst = max(worst, min(np.abs(got - ends).max(), np.abs(got[::-1] - ends).max()))
    arc = max(arc_deviation(30.0, x0, side, grid)[:, 0].max() for x0 in (-6.0, -1.3, 2.2, 7.0) for side in (1, -1))
    ok = worst < 1e-6 and arc < 0.05
    record(5, "tile codec round trip", ok, f"straight {worst:.1e} m, R=30 arc {arc:.4f} m")
    assert ok


def test_c6_ipm_round_trip():
    grid = TopViewGrid()
    cam = CameraModel(1000.0, 1000.0, 640.0, 360.0, height=1.5, pitch=0.1)
    h = build_ipm(cam, grid)
    rng = np.random.default_rng(6)
    pts = np.stack([rng.uniform(-16, 16, 10_000), rng.uniform(1, 80, 10_000)], 1)
    err = np.abs(image_to_ground(h, ground_to_image(h, pts)) - pts).max()
    g = image_to_ground(h, [640.0, 360.0])
    closed = math.hypot(g[0], g[1] - 1.5 / math.tan(0.1))
    ok = err < 1e-9 and closed < 1e-6
    record(6, "IPM round trip and closed form", ok, f"round trip {err:.1e} m, principal point off by {closed:.1e} m")
    assert ok


def test_c7_cmd():
    rng = np.random.default_rng(7)
    z = rng.random((60, 5))
    worst = 0.0
    for _ in range(40):
        n, m, C, K = rng.integers(1, 101), rng.integers(1, 101), rng.integers(1, 9), int(rng.integers(1, 6))
        xs, xt = rng.random((n, C)), rng.random((m, C))
        worst = max(worst, abs(cmd(xs, xt, K) - brute_cmd(xs, xt, K, 0.0, 1.0)))
    ex = cmd(np.array([[0.0], [1.0]]), np.array([[0.5], [0.5]]), 2, (0, 1))
    ok = cmd(z, z) == 0.0 and worst < 1e-12 and ex == 0.25
    record(7, "CMD zero, brute force, worked example", ok, f"brute-force diff {worst:.1e}, example {ex}")
    assert ok


def test_c8_clustering_recovery():
    grid = TopViewGrid()
    hit = raw = 0
    for i in range(500):
        s = generate_scene(item_seed(8, i))
        tm = encode_tiles(s.lanes, grid)
        n = len(cluster_tiles(tm))
        hit += n == visible_delimiters(s, tm)
        raw += n == len(s.lanes)
    gap = len(cluster_tiles(_gap_fixture(grid)))
    ok = hit >= 475 and gap == 1
    record(8, "clustering recovery", ok,
           f"{hit}/500 match visible delimiters ({raw}/500 match all delimiters), gap fixture -> {gap} cluster")
    assert ok


def test_c9_monotone_degradation():
    grid, gt = _gt_segments(150, 9)
    gt_segs = {k: decode_tiles(v, 0.5) for k, v in gt.items()}
    maps = []
    non_monotone = 0
    for sigma in (0.0, 0.05, 0.15, 0.30):
        pred = perturb_predictions(gt, PerturbSpec(lateral_sigma=sigma, conf_sigma=0.1, seed=9))
        rep = map_eval({k: decode_tiles(v, 0.0) for k, v in pred.items()}, gt_segs)
        maps.append(rep.map)
        aps = [rep.ap[t] for t in THRESHOLDS]
        non_monotone += any(b < a for a, b in zip(aps, aps[1:]))
    decreasing = all(b < a for a, b in zip(maps, maps[1:]))
    ok = decreasing and non_monotone == 0
    record(9, "monotone degradation", ok, "mAP " + ", ".join(f"{m:.4f}" for m in maps) + f"; non-monotone AP curves {non_monotone}")
    assert ok


def test_c10_determinism(tmp_path):
    cfg = {"seed": 21, "count": 30,
           "perturb": {"lateral_sigma": 0.1, "conf_sigma": 0.2, "dropout": 0.05, "spurious_rate": 1.0, "seed": 2}}
    reports = []
    for k, threads in enumerate((1, 1, 8)):
        res = run_pipeline(cfg, tmp_path / f"r{k}", threads=threads)
        assert res.code == 0, res.message
        reports.append(tuple((tmp_path / f"r{k}" / n).read_bytes() for n in ("seg_report.json", "lane_report.json")))
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    rc = main(["pipeline", "--config", str(tmp_path / "cfg.json"), "--threads", "8", "--out", str(tmp_path / "cli")])
    reports.append(tuple((tmp_path / "cli" / n).read_bytes() for n in ("seg_report.json", "lane_report.json")))
    ok = rc == 0 and len(set(reports)) == 1
    record(10, "pipeline determinism", ok, f"{len(set(reports))} distinct report set(s) over 4 runs")
    assert ok


def test_c11_throughput(tmp_path, capsys):
    rng = np.random.default_rng(11)
    gt_rows, pred_rows = [], []
    for i in range(1000):
        n = int(rng.integers(1, 51))
        xy = rng.uniform([-16, 0], [16, 78.4], (n, 2))
        ang = rng.uniform(0.3, math.pi - 0.3, n)
        end = xy + 1.6 * np.stack([np.cos(ang), np.sin(ang)], 1)
        gt = [ScoredSegment(tuple(a), tuple(b)) for a, b in zip(xy, end)]
        noise = rng.normal(0, 0.15, (n, 4))
        pred = [ScoredSegment((a[0] + d[0], a[1] + d[1]), (b[0] + d[2], b[1] + d[3]), float(c))
                for a, b, d, c in zip(xy, end, noise, rng.random(n))]
        gt_rows.append(io.segments_to_record(gt, i))
        pred_rows.append(io.segments_to_record(pred, i))
    io.write_jsonl(tmp_path / "gt.jsonl", gt_rows)
    io.write_jsonl(tmp_path / "pred.jsonl", pred_rows)
    t0 = time.perf_counter()
    rc = main(["eval-seg", "--pred", str(tmp_path / "pred.jsonl"), "--gt", str(tmp_path / "gt.jsonl"), "--threads", "1"])
    dt = time.perf_counter() - t0
    capsys.readouterr()
    ok = rc == 0 and dt < 5.0
    record(11, "eval-seg throughput (soft)", ok, f"1000 images x <=50 segments in {dt:.2f} s")
    assert ok
