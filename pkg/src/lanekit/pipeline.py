"""End-to-end generate -> label -> perturb -> evaluate runs driven by one config."""
from __future__ import annotations

import contextlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from . import io
from .camera import TopViewGrid
from .clustering import cluster_tiles, lane_point_counts
from .perturb import PerturbSpec, perturb_predictions
from .scenes import SceneConfig, generate_dataset
from .segment_eval import THRESHOLDS, map_eval
from .tiles import decode_tiles

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["seed", "count"],
    "additionalProperties": False,
    "properties": {
        "seed": {"type": "integer"},
        "count": {"type": "integer", "minimum": 1},
        "grid": io.GRID_SCHEMA,
        "scene": {"type": "object"},
        "perturb": {"type": "object"},
        "eval": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "thresholds": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "literal_overlap": {"type": "boolean"},
                "gt_conf_threshold": {"type": "number"},
                "lane_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"stage '{stage}': {exc}")
        self.stage = stage
        self.cause = exc


@contextlib.contextmanager
def _stage(name: str):
    log.info("pipeline stage %s", name)
    try:
        yield
    except StageError:
        raise
    except jsonschema.ValidationError as exc:
        where = "/".join(str(k) for k in exc.absolute_path) or "<root>"
        raise StageError(name, ValueError(f"{where}: {exc.message}")) from exc
    except (ValueError, KeyError, TypeError, OSError, RuntimeError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class PipelineResult:
    code: int
    files: list = field(default_factory=list)
    message: str = ""
    seg_report: dict | None = None
    lane_report: dict | None = None


def _map_ordered(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_pipeline(config, out_dir, threads: int = 1) -> PipelineResult:
    """Run every stage and write datasets and reports into ``out_dir``.

    ``config`` is a dict or a path to a JSON file. Returns exit code 0 on
    success, 1 for invalid configuration or data, 2 for I/O failures; the
    message names the failing stage.
    """
    out = Path(out_dir)
    files: list = []
    try:
        with _stage("config"):
            cfg = io.read_json(config) if isinstance(config, (str, Path)) else config
            jsonschema.validate(cfg, CONFIG_SCHEMA)
            grid = TopViewGrid.from_json(cfg["grid"]) if "grid" in cfg else TopViewGrid()
            scene_cfg = SceneConfig.from_json(cfg.get("scene", {}))
            spec = PerturbSpec.from_json(cfg.get("perturb", {}))
            ev = cfg.get("eval", {})
            thresholds = tuple(ev.get("thresholds", THRESHOLDS))
            literal = bool(ev.get("literal_overlap", False))
            gt_thr = float(ev.get("gt_conf_threshold", 0.5))
            lane_tol = float(ev.get("lane_tol", 0.5))
            out.mkdir(parents=True, exist_ok=True)

        with _stage("generate"):
            items = list(generate_dataset(cfg["seed"], cfg["count"], scene_cfg, grid, threads=threads))
            ids = [it.id for it in items]
            files.append(out / "scenes.jsonl")
            io.write_jsonl(files[-1], (it.scene.to_record(it.id) for it in items))
            gt_maps = {it.id: it.tiles for it in items}
            files.append(out / "gt_tiles.jsonl")
            io.write_jsonl(files[-1], (io.tilemap_to_record(gt_maps[i], i) for i in ids))

        with _stage("perturb"):
            pred_maps = perturb_predictions(gt_maps, spec)
            files.append(out / "pred_tiles.jsonl")
            io.write_jsonl(files[-1], (io.tilemap_to_record(pred_maps[i], i) for i in ids))

        with _stage("eval-seg"):
            gts = {i: list(decode_tiles(gt_maps[i], gt_thr)) for i in ids}
            preds = {i: list(decode_tiles(pred_maps[i], 0.0)) for i in ids}
            report = map_eval(preds, gts, thresholds, literal=literal, threads=threads)
            seg_json = report.to_json()
            files.append(out / "seg_report.json")
            io.write_json(files[-1], seg_json)
            for t, curve in report.curves.items():
                files.append(out / f"pr_{t:.2f}.csv")
                files[-1].write_text(curve.to_csv())

        with _stage("cluster"):
            clusters = _map_ordered(lambda i: cluster_tiles(pred_maps[i]), ids, threads)
            files.append(out / "lanes.jsonl")
            io.write_jsonl(files[-1], (io.lanes_to_record(c, i, grid) for i, c in zip(ids, clusters)))

        with _stage("eval-lane"):
            hits = total = 0
            for it, cl in zip(items, clusters):
                h, t = lane_point_counts([c.polyline() for c in cl], it.scene.lanes, lane_tol, grid)
                hits += h
                total += t
            lane_json = {"accuracy": hits / total if total else 0.0, "hits": hits, "points": total,
                         "tol": lane_tol, "images": len(ids)}
            files.append(out / "lane_report.json")
            io.write_json(files[-1], lane_json)
    except StageError as err:
        code = EXIT_IO if isinstance(err.cause, OSError) else EXIT_INVALID
        return PipelineResult(code, files, str(err))
    return PipelineResult(EXIT_OK, files, "ok", seg_json, lane_json)
