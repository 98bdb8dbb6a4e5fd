"""Semi-local tile representation of top-view lanes.

Each tile of the grid optionally carries a confidence ``conf`` and a local
line: ``(dx, dy)`` is the foot of the perpendicular from the tile center to the
line, ``theta`` the line direction in the ground frame. Six reserved parameter
slots pad the parameter vector to width 9 so a dense map has 10 channels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import TopViewGrid
from .geometry import ScoredSegment, as_points, clip_line, clip_segment, point_segment_distance

N_PARAMS = 9
N_RESERVED = 6
MIN_TILE_LENGTH = 1e-3


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    t = math.remainder(theta, 2.0 * math.pi)
    return math.pi if t <= -math.pi else t


@dataclass(frozen=True)
class TileEntry:
    row: int
    col: int
    conf: float
    dx: float
    dy: float
    theta: float
    reserved: tuple = (0.0,) * N_RESERVED

    def __post_init__(self):
        if not 0.0 <= self.conf <= 1.0:
            raise ValueError(f"tile ({self.row}, {self.col}): conf {self.conf} outside [0, 1]")
        if len(self.reserved) != N_RESERVED:
            raise ValueError(f"tile ({self.row}, {self.col}): expected {N_RESERVED} reserved values")
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))
        object.__setattr__(self, "reserved", tuple(float(r) for r in self.reserved))

    @property
    def params(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.theta, *self.reserved])

    def replace(self, **kw) -> "TileEntry":
        d = dict(row=self.row, col=self.col, conf=self.conf, dx=self.dx, dy=self.dy, theta=self.theta, reserved=self.reserved)
        d.update(kw)
        return TileEntry(**d)


@dataclass(frozen=True)
class TileMap:
    """Sparse tile map; absent tiles have ``conf = 0``. Entries are kept sorted by (row, col)."""

    grid: TopViewGrid
    entries: tuple = field(default=())

    def __post_init__(self):
        ents = tuple(sorted(self.entries, key=lambda e: (e.row, e.col)))
        ts = self.grid.tile_size
        seen = set()
        for e in ents:
            if not (0 <= e.row < self.grid.tile_rows and 0 <= e.col < self.grid.tile_cols):
                raise ValueError(f"tile ({e.row}, {e.col}) outside {self.grid.tile_rows}x{self.grid.tile_cols} grid")
            if (e.row, e.col) in seen:
                raise ValueError(f"duplicate tile ({e.row}, {e.col})")
            if abs(e.dx) > ts or abs(e.dy) > ts:
                raise ValueError(f"tile ({e.row}, {e.col}): offset ({e.dx}, {e.dy}) exceeds tile size {ts}")
            seen.add((e.row, e.col))
        object.__setattr__(self, "entries", ents)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def get(self, row: int, col: int) -> TileEntry | None:
        for e in self.entries:
            if e.row == row and e.col == col:
                return e
        return None

    def to_dense(self) -> np.ndarray:
        """Dense ``(1 + 9, H, W)`` array: confidence channel followed by the parameters."""
        out = np.zeros((1 + N_PARAMS, self.grid.tile_rows, self.grid.tile_cols))
        for e in self.entries:
            out[0, e.row, e.col] = e.conf
            out[1:, e.row, e.col] = e.params
        return out


def _tile_range(lo: float, hi: float, origin: float, size: float, n: int) -> range:
    a = max(0, int(math.floor((lo - origin) / size)))
    b = min(n - 1, int(math.floor((hi - origin) / size)))
    return range(a, b + 1)


def _accumulate(pts: np.ndarray, grid: TopViewGrid) -> dict:
    """Per-tile length, first/second moments and travel direction of the clipped polyline.

    Moments are taken relative to each tile's center: ``[L, Sx, Sy, Sxx, Sxy, Syy, tx, ty]``.
    """
    ts = grid.tile_size
    nr, nc = grid.tile_rows, grid.tile_cols
    acc: dict = {}
    pl = pts.tolist()
    for (ax, ay), (bx, by) in zip(pl[:-1], pl[1:]):
        dx = bx - ax
        dy = by - ay
        seg_len = math.hypot(dx, dy)
        if seg_len == 0.0:
            continue
        cols = _tile_range(min(ax, bx), max(ax, bx), grid.x_min, ts, nc)
        # rows count downward from y_max
        rows = _tile_range(grid.y_max - max(ay, by), grid.y_max - min(ay, by), 0.0, ts, nr)
        for r in rows:
            for c in cols:
                box = grid.tile_bounds(r, c)
                hit = clip_segment((ax, ay), (bx, by), box)
                if hit is None:
                    continue
                t0, t1 = hit
                if t1 <= t0:
                    continue
                pax, pay = ax + t0 * dx, ay + t0 * dy
                pbx, pby = ax + t1 * dx, ay + t1 * dy
                # half-open tiles: a piece lying on the right or top edge belongs to the neighbour
                if (pax == box[1] and pbx == box[1]) or (pay == box[3] and pby == box[3]):
                    continue
                cx = 0.5 * (box[0] + box[1])
                cy = 0.5 * (box[2] + box[3])
                ux, uy = pax - cx, pay - cy
                vx, vy = pbx - cx, pby - cy
                L = (t1 - t0) * seg_len
                m = acc.get((r, c))
                if m is None:
                    m = acc[(r, c)] = [0.0] * 8
                k = L / 3.0
                m[0] += L
                m[1] += 0.5 * L * (ux + vx)
                m[2] += 0.5 * L * (uy + vy)
                m[3] += k * (ux * ux + ux * vx + vx * vx)
                m[4] += k * (ux * uy + 0.5 * (ux * vy + vx * uy) + vx * vy)
                m[5] += k * (uy * uy + uy * vy + vy * vy)
                m[6] += pbx - pax
                m[7] += pby - pay
    return acc


def fit_tile_line(m) -> tuple[float, float, float]:
    """Total-least-squares line through a continuous curve given its moments.

    ``m`` is an accumulator from ``_accumulate``; returns ``(dx, dy, theta)``.
    """
    L, sx, sy, sxx, sxy, syy, tx, ty = m
    cx, cy = sx / L, sy / L
    vxx = sxx / L - cx * cx
    vxy = sxy / L - cx * cy
    vyy = syy / L - cy * cy
    # major axis of the 2x2 covariance
    phi = 0.5 * math.atan2(2.0 * vxy, vxx - vyy)
    ux, uy = math.cos(phi), math.sin(phi)
    if ux * tx + uy * ty < 0:
        ux, uy = -ux, -uy
    proj = cx * ux + cy * uy
    return cx - proj * ux, cy - proj * uy, wrap_angle(math.atan2(uy, ux))


def encode_tiles(lanes, grid: TopViewGrid, min_length: float = MIN_TILE_LENGTH) -> TileMap:
    """Encode ground-plane lane polylines into a tile map with ``conf = 1`` tiles.

    A tile is occupied when a lane runs at least ``min_length`` meters through
    it. When several lanes cross one tile the longest portion wins (first lane
    on ties).
    """
    best: dict = {}
    for lane in lanes:
        pts = as_points(lane)
        for key, m in _accumulate(pts, grid).items():
            if m[0] < min_length:
                continue
            if key not in best or m[0] > best[key][0]:
                best[key] = m
    entries = []
    for (r, c), m in best.items():
        dx, dy, theta = fit_tile_line(m)
        entries.append(TileEntry(r, c, 1.0, dx, dy, theta))
    return TileMap(grid, tuple(entries))


class SegmentList(list):
    """List of decoded segments; ``skipped`` counts entries whose line missed their tile."""

    skipped: int = 0


def decode_entry(entry: TileEntry, grid: TopViewGrid):
    """Clip one entry's local line to its tile; ``None`` when it misses."""
    cx, cy = grid.tile_center(entry.row, entry.col)
    u = (math.cos(entry.theta), math.sin(entry.theta))
    clipped = clip_line((float(cx) + entry.dx, float(cy) + entry.dy), u, grid.tile_bounds(entry.row, entry.col))
    if clipped is None:
        return None
    p1, p2 = clipped
    if math.hypot(p2[0] - p1[0], p2[1] - p1[1]) <= 1e-6:
        return None
    return p1, p2


def decode_tiles(tmap: TileMap, conf_threshold: float = 0.5) -> SegmentList:
    """Turn every entry with ``conf >= conf_threshold`` into a segment clipped to its tile."""
    out = SegmentList()
    for e in tmap.entries:
        if e.conf < conf_threshold:
            continue
        seg = decode_entry(e, tmap.grid)
        if seg is None:
            out.skipped += 1
            continue
        out.append(ScoredSegment(seg[0], seg[1], conf=e.conf, row=e.row, col=e.col))
    return out


def _dash_pieces(pts: np.ndarray, on: float, gap: float) -> list:
    """Split a polyline into painted pieces of an on/gap dash pattern."""
    seg = np.hypot(*np.diff(pts, axis=0).T)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    period = on + gap
    pieces = []
    start = 0.0
    while start < s[-1]:
        stop = min(start + on, s[-1])
        grid_s = np.concatenate([[start], s[(s > start) & (s < stop)], [stop]])
        x = np.interp(grid_s, s, pts[:, 0])
        y = np.interp(grid_s, s, pts[:, 1])
        if stop > start:
            pieces.append(np.stack([x, y], axis=1))
        start += period
    return pieces


def render_lane_image(
    lanes,
    grid: TopViewGrid,
    line_width_m: float = 0.2,
    resolution_divisor: int = 1,
    respect_dashes: bool = False,
) -> np.ndarray:
    """Rasterize anti-aliased lane strokes into a gray-scale top-view image.

    A pixel's value is ``clip(w/2 + 0.5 - d, 0, 1)`` with ``d`` the distance in
    pixels from its center to the nearest polyline and ``w`` the stroke width
    in pixels, so strokes have a one pixel soft edge.
    """
    if not line_width_m > 0:
        raise ValueError(f"line_width_m must be > 0, got {line_width_m}")
    div = int(resolution_divisor)
    if div < 1 or grid.height_px % div or grid.width_px % div:
        raise ValueError(f"resolution_divisor {resolution_divisor} must divide the raster {grid.shape}")
    h, w = grid.height_px // div, grid.width_px // div
    img = np.zeros((h, w))
    half = 0.5 * line_width_m * grid.px_per_meter / div
    reach = half + 0.5
    for lane in lanes:
        pts = as_points(lane)
        polys = [pts]
        if respect_dashes and isinstance(getattr(lane, "dash", None), tuple):
            polys = _dash_pieces(pts, *lane.dash)
        for poly in polys:
            u, v = grid.ground_to_pixel(poly[:, 0], poly[:, 1], divisor=div)
            for k in range(len(poly) - 1):
                seg = (u[k], v[k], u[k + 1], v[k + 1])
                c0 = max(0, int(math.floor(min(u[k], u[k + 1]) - reach)))
                c1 = min(w, int(math.ceil(max(u[k], u[k + 1]) + reach)) + 1)
                r0 = max(0, int(math.floor(min(v[k], v[k + 1]) - reach)))
                r1 = min(h, int(math.ceil(max(v[k], v[k + 1]) + reach)) + 1)
                if c0 >= c1 or r0 >= r1:
                    continue
                jj, ii = np.meshgrid(np.arange(c0, c1) + 0.5, np.arange(r0, r1) + 0.5)
                d = point_segment_distance(jj, ii, seg)
                val = np.clip(reach - d, 0.0, 1.0)
                np.maximum(img[r0:r1, c0:c1], val, out=img[r0:r1, c0:c1])
    return img
