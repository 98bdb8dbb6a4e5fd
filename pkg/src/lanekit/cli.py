"""``lanekit`` command line interface."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import io
from .camera import TopViewGrid, make_oriented_view
from .clustering import cluster_tiles, lane_point_counts
from .image_ops import reconstruction_mask
from .moments import cmd
from .perturb import PerturbSpec, perturb_predictions
from .pipeline import EXIT_INVALID, EXIT_IO, EXIT_OK, run_pipeline
from .scenes import Scene, SceneConfig, generate_dataset
from .segment_eval import THRESHOLDS, map_eval
from .tiles import decode_tiles, encode_tiles, render_lane_image


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("LANEKIT_THREADS")
    return max(1, int(env)) if env else 1


def _grid(path) -> TopViewGrid:
    return io.read_grid(path) if path else TopViewGrid()


def _out(args, default=None) -> Path:
    if args.out is None and default is None:
        raise ValueError("--out is required")
    return Path(args.out if args.out is not None else default)


def cmd_generate(args):
    cfg = SceneConfig.from_json(io.read_json(args.config)) if args.config else SceneConfig()
    grid = _grid(args.grid)
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    items = list(generate_dataset(args.seed, args.count, cfg, grid, threads=_threads(args),
                                  lane_images=args.lane_images))
    io.write_jsonl(out / "scenes.jsonl", (it.scene.to_record(it.id) for it in items))
    io.write_jsonl(out / "tiles.jsonl", (io.tilemap_to_record(it.tiles, it.id) for it in items))
    if args.lane_images:
        (out / "lane_images").mkdir(exist_ok=True)
        for it in items:
            io.write_image(out / "lane_images" / f"{it.id}.png", it.lane_image)
    print(f"wrote {len(items)} scenes to {out}")


def _scenes(path) -> list:
    return [(rec["id"], Scene.from_record(rec)) for rec in io.read_jsonl(path, io.SCENE_SCHEMA)]


def cmd_encode(args):
    grid = _grid(args.grid)
    recs = (io.tilemap_to_record(encode_tiles(s.lanes, grid), i) for i, s in _scenes(args.scenes))
    n = io.write_jsonl(_out(args), recs)
    print(f"encoded {n} scenes")


def cmd_decode(args):
    maps = io.read_tilemaps(args.tiles)
    n = io.write_jsonl(_out(args), (io.segments_to_record(decode_tiles(m, args.threshold), i) for i, m in maps.items()))
    print(f"decoded {n} tile maps")


def cmd_render(args):
    grid = _grid(args.grid)
    out = _out(args)
    scenes = _scenes(args.scenes)
    if args.id is not None:
        scenes = [(i, s) for i, s in scenes if str(i) == args.id]
        if not scenes:
            raise ValueError(f"no scene with id {args.id!r} in {args.scenes}")
    if len(scenes) == 1 and out.suffix:
        io.write_image(out, render_lane_image(scenes[0][1].lanes, grid, args.width, args.divisor, args.dashes))
        return
    out.mkdir(parents=True, exist_ok=True)
    for i, s in scenes:
        io.write_image(out / f"{i}.png", render_lane_image(s.lanes, grid, args.width, args.divisor, args.dashes))


def cmd_mask(args):
    img = io.read_image(args.lane_image)
    if img.ndim == 3:
        img = img.mean(axis=2)
    boxes = io.read_json(args.boxes, io.BOXES_SCHEMA) if args.boxes else []
    mask = reconstruction_mask(img, boxes, args.threshold, args.dilation, args.px_per_meter)
    io.write_image(_out(args, "mask.png"), mask.astype(float))
    print(f"mask keeps {int(mask.sum())} of {mask.size} pixels")


def cmd_views(args):
    image = io.read_image(args.image)
    camera = io.read_camera(args.camera)
    grid = _grid(args.grid)
    crop = tuple(float(v) for v in args.crop.split(",")) if args.crop else None
    out = _out(args)
    out.mkdir(parents=True, exist_ok=True)
    for o in ("left", "center", "right"):
        view, label = make_oriented_view(image, camera, grid, o, args.pan, crop)
        io.write_image(out / f"view_{label}.png", np.clip(view, 0.0, 1.0))


def cmd_cmd(args):
    a, b = (float(v) for v in args.range.split(","))
    value = cmd(io.read_samples_csv(args.a), io.read_samples_csv(args.b), args.order, (a, b))
    print(repr(value))


def cmd_perturb(args):
    spec = PerturbSpec(args.lateral_sigma, args.conf_sigma, args.dropout, args.spurious_rate, args.seed)
    maps = io.read_tilemaps(args.gt)
    pred = perturb_predictions(maps, spec)
    n = io.write_jsonl(_out(args), (io.tilemap_to_record(m, i) for i, m in pred.items()))
    print(f"perturbed {n} tile maps")


def cmd_eval_seg(args):
    gts = io.read_segment_sets(args.gt, args.gt_threshold)
    preds = io.read_segment_sets(args.pred, 0.0)
    thresholds = tuple(float(t) for t in args.thresholds.split(",")) if args.thresholds else THRESHOLDS
    report = map_eval(preds, gts, thresholds, literal=args.literal_overlap, threads=_threads(args))
    rep = report.to_json()
    if args.out:
        io.write_json(args.out, rep)
    if args.pr_csv:
        for t, curve in report.curves.items():
            Path(f"{args.pr_csv}_{t:.2f}.csv").write_text(curve.to_csv())
    print(io.dumps(rep))


def cmd_cluster(args):
    maps = io.read_tilemaps(args.pred)
    recs = (io.lanes_to_record(cluster_tiles(m, args.threshold), i, m.grid) for i, m in maps.items())
    n = io.write_jsonl(_out(args), recs)
    print(f"clustered {n} tile maps")


def cmd_eval_lane(args):
    gt = dict(_scenes(args.gt))
    hits = total = 0
    seen = set()
    for lineno, rec in io.iter_jsonl(args.pred, io.LANES_SCHEMA):
        img_id = rec["image_id"]
        if img_id not in gt:
            raise io.DataError(f"{args.pred}:{lineno}: no ground-truth scene with id {img_id!r}")
        seen.add(img_id)
        grid = TopViewGrid.from_json(rec["grid"]) if "grid" in rec else (io.read_grid(args.grid) if args.grid else None)
        h, t = lane_point_counts([l["points"] for l in rec["lanes"]], gt[img_id].lanes, args.tol, grid)
        hits += h
        total += t
    missing = sorted(set(gt) - seen, key=str)
    if missing:
        raise io.DataError(f"no predicted lanes for scenes {missing}")
    if total == 0:
        raise io.DataError("ground truth has no anchor points")
    rep = {"accuracy": hits / total, "hits": hits, "points": total, "tol": args.tol, "images": len(seen)}
    if args.out:
        io.write_json(args.out, rep)
    print(io.dumps(rep))


def cmd_pipeline(args):
    res = run_pipeline(args.config, _out(args), threads=_threads(args))
    print(res.message, file=sys.stderr if res.code else sys.stdout)
    return res.code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads (env LANEKIT_THREADS)")
    common.add_argument("--out", default=None, help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lanekit", description=__doc__, parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", parents=[common], help="generate random lane scenes and tile labels")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--config", help="scene config JSON")
    s.add_argument("--grid", help="grid JSON")
    s.add_argument("--lane-images", action="store_true", help="also write ground-truth lane images")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("encode", parents=[common], help="encode scene lanes into tile maps")
    s.add_argument("--scenes", required=True)
    s.add_argument("--grid")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", parents=[common], help="decode tile maps into segments")
    s.add_argument("--tiles", required=True)
    s.add_argument("--threshold", type=float, default=0.5)
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("render-lane-image", parents=[common], help="rasterize ground-truth lane images")
    s.add_argument("--scenes", required=True)
    s.add_argument("--grid")
    s.add_argument("--id", help="render only this scene id")
    s.add_argument("--width", type=float, default=0.2, help="stroke width in meters")
    s.add_argument("--divisor", type=int, default=1, help="resolution divisor")
    s.add_argument("--dashes", action="store_true", help="paint dashed delimiters as dashes")
    s.set_defaults(func=cmd_render)

    s = sub.add_parser("mask", parents=[common], help="reconstruction ignore mask from a lane image")
    s.add_argument("--lane-image", required=True)
    s.add_argument("--boxes", help="vehicle boxes JSON")
    s.add_argument("--dilation", type=float, default=2.0, help="hull dilation in meters")
    s.add_argument("--threshold", type=float, default=0.5)
    s.add_argument("--px-per-meter", type=float, default=4.0)
    s.set_defaults(func=cmd_mask)

    s = sub.add_parser("views", parents=[common], help="left/center/right panned top-view crops")
    s.add_argument("--image", required=True)
    s.add_argument("--camera", required=True)
    s.add_argument("--grid")
    s.add_argument("--pan", type=float, default=5.0, help="pan angle in degrees")
    s.add_argument("--crop", help="x0,x1,y0,y1 in meters")
    s.set_defaults(func=cmd_views)

    s = sub.add_parser("cmd", parents=[common], help="central moment discrepancy of two CSV sample sets")
    s.add_argument("--a", required=True)
    s.add_argument("--b", required=True)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--range", default="0,1", help="a,b value range")
    s.set_defaults(func=cmd_cmd)

    s = sub.add_parser("perturb", parents=[common], help="corrupt ground-truth tiles into predictions")
    s.add_argument("--gt", required=True)
    s.add_argument("--lateral-sigma", type=float, default=0.0)
    s.add_argument("--conf-sigma", type=float, default=0.0)
    s.add_argument("--dropout", type=float, default=0.0)
    s.add_argument("--spurious-rate", type=float, default=0.0)
    s.set_defaults(func=cmd_perturb)

    s = sub.add_parser("eval-seg", parents=[common], help="segment-based AP / mAP")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--literal-overlap", "--paper-literal-overlap", dest="literal_overlap", action="store_true",
                   help="reject pairs whose projected length exceeds half the opposite segment")
    s.add_argument("--thresholds", help="comma separated seg_dist_max values (m)")
    s.add_argument("--gt-threshold", type=float, default=0.5, help="confidence cut for gt tile maps")
    s.add_argument("--pr-csv", help="write PR curves to PREFIX_<threshold>.csv")
    s.set_defaults(func=cmd_eval_seg)

    s = sub.add_parser("cluster", parents=[common], help="cluster tile maps into lanes")
    s.add_argument("--pred", required=True)
    s.add_argument("--threshold", type=float, default=0.0)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("eval-lane", parents=[common], help="lane-based point accuracy")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True, help="scenes JSONL")
    s.add_argument("--grid", help="grid JSON when the lanes file carries none")
    s.add_argument("--tol", type=float, default=0.5)
    s.set_defaults(func=cmd_eval_lane)

    s = sub.add_parser("pipeline", parents=[common], help="generate, perturb and evaluate from one config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        code = args.func(args)
    except jsonschema.ValidationError as exc:
        print(f"lanekit {args.command}: {exc.message}", file=sys.stderr)
        return EXIT_INVALID
    except (io.DataError, ValueError, KeyError) as exc:
        print(f"lanekit {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"lanekit {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
