"""Procedural top-view lane scenes with ground-truth labels.

A scene is a bundle of parallel lane delimiters following one reference curve
whose curvature is constant, optionally ramped in linearly from zero over a
clothoid section. Every random draw comes from a generator seeded by the
scene seed, so scenes are reproducible bit for bit.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .camera import CameraModel, TopViewGrid
from .geometry import LanePolyline
from .tiles import TileMap, encode_tiles, render_lane_image

MIN_DELIMITER_GAP = 1.0
_SUBSTEPS = 8


def _check_range(name, rng, lo_bound=None):
    lo, hi = rng
    if not lo <= hi:
        raise ValueError(f"{name}: range {tuple(rng)} is not ordered")
    if lo_bound is not None and lo < lo_bound:
        raise ValueError(f"{name}: lower bound {lo} < {lo_bound}")


@dataclass(frozen=True)
class SceneConfig:
    lane_count_range: tuple[int, int] = (2, 5)
    lane_width_range: tuple[float, float] = (3.0, 4.2)
    curvature_range: tuple[float, float] = (-0.02, 0.02)
    clothoid_blend: bool = True
    clothoid_length: float = 20.0
    heading_range: tuple[float, float] = (-0.03, 0.03)
    ego_offset_range: tuple[float, float] = (-0.6, 0.6)
    camera_height_range: tuple[float, float] = (1.3, 1.7)
    camera_pitch_range: tuple[float, float] = (0.03, 0.08)
    camera_yaw_range: tuple[float, float] = (-0.02, 0.02)
    intrinsics: tuple[float, float, float, float] = (1000.0, 1000.0, 640.0, 360.0)
    dash_on_range: tuple[float, float] = (2.0, 4.0)
    dash_gap_range: tuple[float, float] = (4.0, 9.0)
    scene_length: float = 100.0
    start_y: float = -5.0
    sample_step: float = 0.5

    def __post_init__(self):
        # JSON round trips hand us lists
        for f in self.__dataclass_fields__:
            v = getattr(self, f)
            if isinstance(v, list):
                object.__setattr__(self, f, tuple(v))
        self.validate()

    def validate(self):
        _check_range("lane_count_range", self.lane_count_range, 1)
        _check_range("lane_width_range", self.lane_width_range)
        if self.lane_width_range[0] < MIN_DELIMITER_GAP:
            raise ValueError(
                f"lane_width_range {self.lane_width_range} allows delimiters closer than {MIN_DELIMITER_GAP} m"
            )
        for name in ("curvature_range", "heading_range", "ego_offset_range", "camera_yaw_range",
                     "dash_on_range", "dash_gap_range"):
            _check_range(name, getattr(self, name))
        _check_range("camera_height_range", self.camera_height_range)
        if self.camera_height_range[0] <= 0:
            raise ValueError("camera heights must be > 0")
        _check_range("camera_pitch_range", self.camera_pitch_range)
        if max(abs(p) for p in self.camera_pitch_range) >= math.pi / 2:
            raise ValueError("camera pitch must stay inside (-pi/2, pi/2)")
        if self.dash_on_range[0] <= 0 or self.dash_gap_range[0] < 0:
            raise ValueError("dash lengths must be positive")
        if not (self.scene_length > 0 and self.sample_step > 0 and self.clothoid_length > 0):
            raise ValueError("scene_length, sample_step and clothoid_length must be > 0")
        kmax = max(abs(k) for k in self.curvature_range)
        span = self.lane_count_range[1] * self.lane_width_range[1] + max(abs(o) for o in self.ego_offset_range)
        # offset curves fold over once |offset * curvature| reaches 1
        if kmax * span >= 1.0:
            raise ValueError(
                f"curvature up to {kmax} 1/m with delimiter offsets up to {span:.2f} m folds the outer delimiters"
            )
        if kmax * (self.scene_length - self.start_y) >= math.pi:
            raise ValueError("curvature range lets a delimiter turn by pi or more within the scene")

    def to_json(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, d: dict) -> "SceneConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scene config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class Scene:
    seed: int
    lanes: tuple
    camera: CameraModel
    params: dict = field(default_factory=dict, compare=False)

    def to_record(self, scene_id) -> dict:
        lanes = []
        for lane in self.lanes:
            rec = {"points": lane.points.tolist()}
            if lane.dash is not None:
                rec["dash"] = list(lane.dash)
            lanes.append(rec)
        return {"id": scene_id, "seed": self.seed, "camera": self.camera.to_json(), "lanes": lanes,
                "params": self.params}

    @classmethod
    def from_record(cls, rec: dict) -> "Scene":
        lanes = tuple(
            LanePolyline(np.asarray(l["points"], dtype=float), tuple(l["dash"]) if l.get("dash") else None)
            for l in rec["lanes"]
        )
        return cls(int(rec.get("seed", 0)), lanes, CameraModel.from_json(rec["camera"]), rec.get("params", {}))


def _heading(s: np.ndarray, kappa: float, heading0: float, ramp: float | None) -> np.ndarray:
    if ramp is None:
        return heading0 + kappa * s
    inside = s <= ramp
    return heading0 + np.where(inside, 0.5 * kappa * s * s / ramp, kappa * (0.5 * ramp + (s - ramp)))


def _resample(pts: np.ndarray, step: float) -> np.ndarray:
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    n = int(math.floor(arc[-1] / step + 1e-9))
    s = np.arange(n + 1) * step
    if arc[-1] - s[-1] > 1e-9:
        s = np.append(s, arc[-1])
    return np.stack([np.interp(s, arc, pts[:, 0]), np.interp(s, arc, pts[:, 1])], axis=1)


def delimiter_offsets(widths, ego_lane: int, ego_offset: float) -> np.ndarray:
    """Lateral positions of the n+1 delimiters relative to the camera, left to right."""
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    ego_center = edges[ego_lane] + 0.5 * widths[ego_lane]
    return edges - ego_center - ego_offset


def generate_scene(seed: int, config: SceneConfig | None = None) -> Scene:
    """Draw one random scene; identical ``(seed, config)`` give identical scenes."""
    cfg = config or SceneConfig()
    cfg.validate()
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    rng = np.random.default_rng(seed)

    n = int(rng.integers(cfg.lane_count_range[0], cfg.lane_count_range[1] + 1))
    widths = rng.uniform(*cfg.lane_width_range, size=n)
    kappa = float(rng.uniform(*cfg.curvature_range))
    heading0 = float(rng.uniform(*cfg.heading_range))
    ego_lane = int(rng.integers(0, n))
    ego_offset = float(rng.uniform(*cfg.ego_offset_range))
    height = float(rng.uniform(*cfg.camera_height_range))
    pitch = float(rng.uniform(*cfg.camera_pitch_range))
    yaw = float(rng.uniform(*cfg.camera_yaw_range))
    dashes = [(float(rng.uniform(*cfg.dash_on_range)), float(rng.uniform(*cfg.dash_gap_range)))
              for _ in range(max(n - 1, 0))]

    total = cfg.scene_length - cfg.start_y
    h = cfg.sample_step / _SUBSTEPS
    s = np.arange(int(math.ceil(total / h)) + 1) * h
    ramp = cfg.clothoid_length if cfg.clothoid_blend else None
    phi = _heading(s, kappa, heading0, ramp)
    # heading is measured from +y towards +x; midpoint rule per substep
    mid = _heading(0.5 * (s[:-1] + s[1:]), kappa, heading0, ramp)
    ref = np.zeros((len(s), 2))
    ref[1:, 0] = np.cumsum(h * np.sin(mid))
    ref[1:, 1] = np.cumsum(h * np.cos(mid))
    ref[:, 1] += cfg.start_y
    normal = np.stack([np.cos(phi), -np.sin(phi)], axis=1)

    offsets = delimiter_offsets(widths, ego_lane, ego_offset)
    lanes = []
    for k, off in enumerate(offsets):
        pts = _resample(ref + off * normal, cfg.sample_step)
        dash = dashes[k - 1] if 0 < k < n else None
        lanes.append(LanePolyline(pts, dash))

    camera = CameraModel(*cfg.intrinsics, height=height, pitch=pitch, yaw=yaw)
    params = {
        "lane_count": n,
        "lane_widths": widths.tolist(),
        "curvature": kappa,
        "heading": heading0,
        "ego_lane": ego_lane,
        "ego_offset": ego_offset,
        "camera_height": height,
        "camera_pitch": pitch,
        "camera_yaw": yaw,
        "dashes": [list(d) for d in dashes],
    }
    return Scene(seed, tuple(lanes), camera, params)


def scene_to_labels(scene: Scene, grid: TopViewGrid, line_width_m: float = 0.2,
                    resolution_divisor: int = 1) -> tuple[TileMap, np.ndarray]:
    """Tile map and ground-truth lane image of a scene."""
    return (
        encode_tiles(scene.lanes, grid),
        render_lane_image(scene.lanes, grid, line_width_m, resolution_divisor),
    )


def item_seed(seed: int, index: int) -> int:
    """Per-item 64-bit seed derived from the master seed and the item index."""
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return (int(hi) << 32) | int(lo)


@dataclass
class DatasetItem:
    index: int
    id: str
    scene: Scene
    tiles: TileMap
    lane_image: np.ndarray | None = None


def generate_dataset(seed: int, count: int, config: SceneConfig | None, grid: TopViewGrid,
                     threads: int = 1, lane_images: bool = False, chunk: int = 64):
    """Yield ``count`` dataset items in index order.

    Items are independent, so ``threads > 1`` fans out generation without
    changing any output.
    """
    cfg = config or SceneConfig()

    def make(i):
        try:
            scene = generate_scene(item_seed(seed, i), cfg)
            tiles = encode_tiles(scene.lanes, grid)
            img = render_lane_image(scene.lanes, grid) if lane_images else None
        except Exception as exc:
            raise RuntimeError(f"dataset item {i}: {exc}") from exc
        return DatasetItem(i, f"{i:06d}", scene, tiles, img)

    if threads <= 1:
        for i in range(count):
            yield make(i)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, count, chunk):
            yield from pool.map(make, range(start, min(count, start + chunk)))
