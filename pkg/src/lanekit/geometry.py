"""Small planar geometry kernel: segments, clipping, hulls, polygon tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_SEGMENT_LENGTH = 1e-6


@dataclass(frozen=True)
class LanePolyline:
    """A lane delimiter in ground meters.

    ``dash`` is ``(on_length, gap_length)`` for painted dashes, or ``None``
    for a solid line. Geometry consumers ignore it; only rendering can use it.
    """

    points: np.ndarray
    dash: tuple[float, float] | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError(f"polyline needs >= 2 points of shape (N, 2), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def as_points(lane) -> np.ndarray:
    if isinstance(lane, LanePolyline):
        return lane.points
    pts = np.asarray(lane, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError(f"polyline needs >= 2 points of shape (N, 2), got {pts.shape}")
    return pts


@dataclass(frozen=True)
class Segment:
    p1: tuple[float, float]
    p2: tuple[float, float]

    def __post_init__(self):
        p1 = (float(self.p1[0]), float(self.p1[1]))
        p2 = (float(self.p2[0]), float(self.p2[1]))
        if math.hypot(p2[0] - p1[0], p2[1] - p1[1]) <= MIN_SEGMENT_LENGTH:
            raise ValueError(f"degenerate segment {p1} -> {p2}")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    @property
    def midpoint(self) -> tuple[float, float]:
        return 0.5 * (self.p1[0] + self.p2[0]), 0.5 * (self.p1[1] + self.p2[1])

    @property
    def angle(self) -> float:
        return math.atan2(self.p2[1] - self.p1[1], self.p2[0] - self.p1[0])

    def as_array(self) -> np.ndarray:
        return np.array([*self.p1, *self.p2])


@dataclass(frozen=True)
class ScoredSegment(Segment):
    """A segment with a detection confidence; ``row``/``col`` name its source tile, if any."""

    conf: float = 1.0
    row: int | None = None
    col: int | None = None

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 <= self.conf <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.conf}")


def segments_to_array(segs) -> np.ndarray:
    """Stack segments into an (N, 4) array of ``x1, y1, x2, y2``."""
    if isinstance(segs, np.ndarray):
        return segs.reshape(-1, 4).astype(float)
    if len(segs) == 0:
        return np.zeros((0, 4))
    return np.array([[*s.p1, *s.p2] for s in segs], dtype=float)


def clip_segment(p, q, box, eps: float = 0.0):
    """Liang-Barsky clip of segment p->q to ``box = (x0, x1, y0, y1)``.

    Returns the parameter interval ``(t0, t1)`` of the part inside the box, or
    ``None`` when the segment misses it.
    """
    x0, x1, y0, y1 = box
    dx = q[0] - p[0]
    dy = q[1] - p[1]
    t0, t1 = 0.0, 1.0
    for den, num in ((-dx, p[0] - x0), (dx, x1 - p[0]), (-dy, p[1] - y0), (dy, y1 - p[1])):
        if den == 0.0:
            if num < -eps:
                return None
            continue
        t = num / den
        if den < 0:
            if t > t1:
                return None
            t0 = max(t0, t)
        else:
            if t < t0:
                return None
            t1 = min(t1, t)
    if t1 < t0:
        return None
    return t0, t1


def clip_line(point, direction, box):
    """Clip the infinite line ``point + t*direction`` to a box; ``None`` if it misses."""
    x0, x1, y0, y1 = box
    px, py = point
    dx, dy = direction
    lo, hi = -math.inf, math.inf
    for d, p, a, b in ((dx, px, x0, x1), (dy, py, y0, y1)):
        if d == 0.0:
            if p < a or p > b:
                return None
            continue
        ta = (a - p) / d
        tb = (b - p) / d
        if ta > tb:
            ta, tb = tb, ta
        lo = max(lo, ta)
        hi = min(hi, tb)
    if hi < lo:
        return None
    return (px + lo * dx, py + lo * dy), (px + hi * dx, py + hi * dy)


def point_segment_distance(px, py, seg) -> np.ndarray:
    """Euclidean distance from points to one segment ``(x1, y1, x2, y2)``."""
    x1, y1, x2, y2 = seg
    vx, vy = x2 - x1, y2 - y1
    ll = vx * vx + vy * vy
    wx = np.asarray(px, dtype=float) - x1
    wy = np.asarray(py, dtype=float) - y1
    if ll == 0.0:
        return np.hypot(wx, wy)
    t = np.clip((wx * vx + wy * vy) / ll, 0.0, 1.0)
    return np.hypot(wx - t * vx, wy - t * vy)


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; counter-clockwise hull without repeated endpoint.

    Collinear points are dropped. Degenerate inputs return 1 or 2 vertices.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 2:
        return pts[[0, -1]]
    return hull


def dilate_polygon(hull: np.ndarray, radius: float, sides: int = 16) -> np.ndarray:
    """Minkowski sum of a convex polygon with a regular ``sides``-gon inscribed in a disc."""
    if radius <= 0:
        return np.asarray(hull, dtype=float)
    ang = 2.0 * np.pi * np.arange(sides) / sides
    disc = radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    pts = (np.asarray(hull, dtype=float)[:, None, :] + disc[None, :, :]).reshape(-1, 2)
    return convex_hull(pts)


def points_in_convex_polygon(px, py, poly: np.ndarray, eps: float = 1e-9) -> np.ndarray:
    """Boundary-inclusive containment test against a CCW convex polygon.

    One- and two-vertex polygons degrade to point and segment membership.
    """
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    poly = np.asarray(poly, dtype=float)
    if len(poly) == 0:
        return np.zeros(px.shape, dtype=bool)
    if len(poly) == 1:
        return np.hypot(px - poly[0, 0], py - poly[0, 1]) <= eps
    if len(poly) == 2:
        return point_segment_distance(px, py, poly.reshape(-1)) <= eps
    inside = np.ones(px.shape, dtype=bool)
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        ex, ey = b - a
        norm = math.hypot(ex, ey)
        cross = ex * (py - a[1]) - ey * (px - a[0])
        inside &= cross >= -eps * norm
    return inside


def segments_intersect(a, b) -> bool:
    """Closed-segment intersection test for ``(x1, y1, x2, y2)`` tuples."""

    def orient(p, q, r):
        v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_seg(p, q, r):
        return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])

    p1, p2 = (a[0], a[1]), (a[2], a[3])
    q1, q2 = (b[0], b[1]), (b[2], b[3])
    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return (
        (o1 == 0 and on_seg(p1, p2, q1))
        or (o2 == 0 and on_seg(p1, p2, q2))
        or (o3 == 0 and on_seg(q1, q2, p1))
        or (o4 == 0 and on_seg(q1, q2, p2))
    )


def polylines_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    """True when any edge of polyline ``a`` touches any edge of ``b``."""
    ea = np.hstack([a[:-1], a[1:]])
    eb = np.hstack([b[:-1], b[1:]])
    # bounding-box prefilter keeps the pairwise test cheap
    amin = np.minimum(ea[:, :2], ea[:, 2:])
    amax = np.maximum(ea[:, :2], ea[:, 2:])
    bmin = np.minimum(eb[:, :2], eb[:, 2:])
    bmax = np.maximum(eb[:, :2], eb[:, 2:])
    overlap = (
        (amin[:, None, 0] <= bmax[None, :, 0])
        & (bmin[None, :, 0] <= amax[:, None, 0])
        & (amin[:, None, 1] <= bmax[None, :, 1])
        & (bmin[None, :, 1] <= amax[:, None, 1])
    )
    for i, j in zip(*np.nonzero(overlap)):
        if segments_intersect(ea[i], eb[j]):
            return True
    return False
