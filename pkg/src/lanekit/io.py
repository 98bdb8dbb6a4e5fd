"""JSON/JSONL records, schema validation and raster file I/O."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import fastjsonschema
import jsonschema
import numpy as np

from .camera import CameraModel, TopViewGrid
from .geometry import ScoredSegment
from .tiles import N_RESERVED, TileEntry, TileMap


class DataError(ValueError):
    """Malformed input data; the message names the file and line."""


_num = {"type": "number"}
_point = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}

GRID_SCHEMA = {
    "type": "object",
    "required": ["x_min", "x_max", "y_min", "y_max"],
    "properties": {k: _num for k in ("x_min", "x_max", "y_min", "y_max", "px_per_meter", "tile_size")},
}
CAMERA_SCHEMA = {
    "type": "object",
    "required": ["fx", "fy", "cx", "cy", "height_m", "pitch_rad"],
    "properties": {k: _num for k in ("fx", "fy", "cx", "cy", "height_m", "pitch_rad", "yaw_rad")},
}
TILE_SCHEMA = {
    "type": "object",
    "required": ["image_id", "grid", "tiles"],
    "properties": {
        "image_id": {"type": ["string", "integer"]},
        "grid": GRID_SCHEMA,
        "tiles": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["row", "col", "conf", "dx", "dy", "theta"],
                "properties": {
                    "row": {"type": "integer", "minimum": 0},
                    "col": {"type": "integer", "minimum": 0},
                    "conf": {"type": "number", "minimum": 0, "maximum": 1},
                    "dx": _num,
                    "dy": _num,
                    "theta": _num,
                    "reserved": {"type": "array", "items": _num, "minItems": N_RESERVED, "maxItems": N_RESERVED},
                },
            },
        },
    },
}
SCENE_SCHEMA = {
    "type": "object",
    "required": ["id", "camera", "lanes"],
    "properties": {
        "id": {"type": ["string", "integer"]},
        "seed": {"type": "integer"},
        "camera": CAMERA_SCHEMA,
        "lanes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["points"],
                "properties": {"points": {"type": "array", "items": _point, "minItems": 2}},
            },
        },
    },
}
SEGMENT_SCHEMA = {
    "type": "object",
    "required": ["image_id", "segments"],
    "properties": {
        "image_id": {"type": ["string", "integer"]},
        "segments": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["x1", "y1", "x2", "y2"],
                "properties": {
                    **{k: _num for k in ("x1", "y1", "x2", "y2")},
                    "conf": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
    },
}
LANES_SCHEMA = {
    "type": "object",
    "required": ["image_id", "lanes"],
    "properties": {
        "image_id": {"type": ["string", "integer"]},
        "lanes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["points"],
                "properties": {"points": {"type": "array", "items": _point}, "b_max": _num},
            },
        },
    },
}
BOXES_SCHEMA = {
    "type": "array",
    "items": {"type": "object", "required": ["x0", "y0", "x1", "y1"],
              "properties": {k: _num for k in ("x0", "y0", "x1", "y1")}},
}


def dumps(rec) -> str:
    return json.dumps(rec, allow_nan=False)


def write_jsonl(path, records) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(dumps(rec))
            fh.write("\n")
            n += 1
    return n


_VALIDATORS: dict = {}


def _first_error(rec, schema) -> str | None:
    """``"path: message"`` of the first schema violation, or None."""
    # compiled check for the common valid case; jsonschema only to explain a failure
    v = _VALIDATORS.get(id(schema))
    if v is None:
        fast = fastjsonschema.compile(schema, use_default=False)
        v = _VALIDATORS[id(schema)] = (fast, jsonschema.Draft7Validator(schema), schema)
    try:
        v[0](rec)
        return None
    except fastjsonschema.JsonSchemaValueException as exc:
        fallback = f"<record>: {exc.message}"
    err = next(iter(v[1].iter_errors(rec)), None)
    if err is None:
        return fallback
    if err is None:
        return None
    where = "/".join(str(p) for p in err.absolute_path) or "<record>"
    return f"{where}: {err.message}"


def iter_jsonl(path, schema=None):
    """Yield ``(line_number, record)``; blank lines are skipped."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if schema is not None:
                err = _first_error(rec, schema)
                if err is not None:
                    raise DataError(f"{path}:{lineno}: {err}")
            yield lineno, rec


def read_jsonl(path, schema=None) -> list:
    return [rec for _, rec in iter_jsonl(path, schema)]


def read_json(path, schema=None):
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
    if schema is not None:
        err = _first_error(obj, schema)
        if err is not None:
            raise DataError(f"{path}: {err}")
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def tilemap_to_record(tmap: TileMap, image_id) -> dict:
    tiles = []
    for e in tmap.entries:
        t = {"row": e.row, "col": e.col, "conf": e.conf, "dx": e.dx, "dy": e.dy, "theta": e.theta}
        if any(e.reserved):
            t["reserved"] = list(e.reserved)
        tiles.append(t)
    return {"image_id": image_id, "grid": tmap.grid.to_json(), "tiles": tiles}


def tilemap_from_record(rec: dict) -> TileMap:
    grid = TopViewGrid.from_json(rec["grid"])
    entries = [
        TileEntry(int(t["row"]), int(t["col"]), float(t["conf"]), float(t["dx"]), float(t["dy"]),
                  float(t["theta"]), tuple(t.get("reserved", (0.0,) * N_RESERVED)))
        for t in rec["tiles"]
    ]
    return TileMap(grid, tuple(entries))


def read_tilemaps(path) -> dict:
    """``image_id -> TileMap`` from a tile JSONL file."""
    out = {}
    for lineno, rec in iter_jsonl(path, TILE_SCHEMA):
        try:
            out[rec["image_id"]] = tilemap_from_record(rec)
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def segments_to_record(segs, image_id) -> dict:
    return {
        "image_id": image_id,
        "segments": [{"x1": s.p1[0], "y1": s.p1[1], "x2": s.p2[0], "y2": s.p2[1], "conf": s.conf} for s in segs],
    }


def segments_from_record(rec: dict) -> list:
    return [
        ScoredSegment((s["x1"], s["y1"]), (s["x2"], s["y2"]), conf=float(s.get("conf", 1.0)))
        for s in rec["segments"]
    ]


def read_segment_sets(path, conf_threshold: float = 0.0) -> dict:
    """``image_id -> [ScoredSegment]`` from tile JSONL or raw segment JSONL (detected per line)."""
    from .tiles import decode_tiles

    out = {}
    for lineno, rec in iter_jsonl(path):
        tiled = "tiles" in rec
        err = _first_error(rec, TILE_SCHEMA if tiled else SEGMENT_SCHEMA)
        if err is not None:
            raise DataError(f"{path}:{lineno}: {err}")
        try:
            if tiled:
                out[rec["image_id"]] = list(decode_tiles(tilemap_from_record(rec), conf_threshold))
            else:
                out[rec["image_id"]] = segments_from_record(rec)
        except (ValueError, KeyError) as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    return out


def lanes_to_record(clusters, image_id, grid: TopViewGrid | None = None) -> dict:
    rec = {"image_id": image_id,
           "lanes": [{"points": c.polyline().tolist(), "b_max": c.b_max} for c in clusters]}
    if grid is not None:
        rec["grid"] = grid.to_json()
    return rec


def read_camera(path) -> CameraModel:
    return CameraModel.from_json(read_json(path, CAMERA_SCHEMA))


def read_grid(path) -> TopViewGrid:
    return TopViewGrid.from_json(read_json(path, GRID_SCHEMA))


def read_samples_csv(path) -> np.ndarray:
    """One sample per row; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip():
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise DataError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if not rows:
        raise DataError(f"{path}: no samples")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: rows have differing numbers of columns")
    return np.array(rows, dtype=float)


def read_image(path) -> np.ndarray:
    """Gray or RGB raster as floats in [0, 1] (``.npy`` files are returned as stored)."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.uint16:
        return arr.astype(float) / 65535.0
    arr = arr.astype(float) / 255.0
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., :3]
    return arr


def write_image(path, arr: np.ndarray):
    """Write a [0, 1] float raster as 8-bit PNG, or as ``.npy`` when the suffix says so."""
    path = Path(path)
    if path.suffix == ".npy":
        np.save(path, arr)
        return
    from PIL import Image

    img = np.clip(np.rint(np.asarray(arr, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(img).save(path)
