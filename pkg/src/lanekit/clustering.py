"""Heuristic grouping of tile segments into lanes and a lane-level point metric.

Segments are suppressed per tile row with a 1-D NMS, linked bottom-up to the
best of their three nearest neighbours in the row below, filtered, and
finally clusters that continue each other are merged.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ScoredSegment, as_points
from .segment_eval import hungarian
from .tiles import TileMap, decode_tiles

AFFINITY_RANGE_M = 8.0
MAX_ANGLE_DEG = 45.0


def _lateral_position(seg: ScoredSegment, y_ref: float | None, mode: str) -> float:
    mx, my = seg.midpoint
    if mode == "midpoint" or y_ref is None:
        return mx
    dx = seg.p2[0] - seg.p1[0]
    dy = seg.p2[1] - seg.p1[1]
    # a line running along the row has no crossing; fall back to its midpoint
    if abs(dy) < 1e-9 * max(1.0, abs(dx)):
        return mx
    return seg.p1[0] + (y_ref - seg.p1[1]) * dx / dy


def row_nms(segments, kernel_m: float = 0.2, position: str = "midpoint", y_ref: float | None = None):
    """1-D non-maximum suppression of the segments of one tile row.

    A segment is suppressed when a higher-confidence survivor lies less than
    ``kernel_m`` away laterally. ``position`` selects the lateral coordinate:
    the segment midpoint, or where the segment's line crosses ``y = y_ref``
    (``"crossing"``). Equal confidences keep the earlier segment. Survivors
    are returned in input order.
    """
    segs = list(segments)
    if len(segs) <= 1:
        return segs
    xs = [_lateral_position(s, y_ref, position) for s in segs]
    order = sorted(range(len(segs)), key=lambda i: (-segs[i].conf, i))
    kept: list[int] = []
    for i in order:
        if all(abs(xs[i] - xs[k]) >= kernel_m for k in kept):
            kept.append(i)
    return [segs[i] for i in sorted(kept)]


def orientation_difference_deg(a: ScoredSegment, b: ScoredSegment) -> float:
    """Angle between the two segments' lines, in degrees within [0, 90]."""
    ax, ay = a.p2[0] - a.p1[0], a.p2[1] - a.p1[1]
    bx, by = b.p2[0] - b.p1[0], b.p2[1] - b.p1[1]
    c = abs(ax * bx + ay * by) / (math.hypot(ax, ay) * math.hypot(bx, by))
    return math.degrees(math.acos(min(1.0, c)))


def min_endpoint_distance(a: ScoredSegment, b: ScoredSegment) -> float:
    return min(math.hypot(p[0] - q[0], p[1] - q[1]) for p in (a.p1, a.p2) for q in (b.p1, b.p2))


def affinity(curr: ScoredSegment, prev: ScoredSegment) -> float:
    """Likelihood that two segments in consecutive rows belong to the same lane.

    ``b_curr * b_prev * cos(theta) * (8 - d_min) / 8``, zero when the
    orientation difference exceeds 45 degrees or the nearest endpoints are
    8 m or more apart; clamped to [0, 1].
    """
    theta = orientation_difference_deg(curr, prev)
    if theta > MAX_ANGLE_DEG:
        return 0.0
    d_min = min_endpoint_distance(curr, prev)
    a = curr.conf * prev.conf * math.cos(math.radians(theta)) * max(0.0, (AFFINITY_RANGE_M - d_min) / AFFINITY_RANGE_M)
    return min(1.0, max(0.0, a))


@dataclass(frozen=True)
class LaneCluster:
    """Member segments ordered bottom row to top row (one per row)."""

    members: tuple

    @property
    def b_max(self) -> float:
        return max(m.conf for m in self.members)

    @property
    def first_row(self) -> int:
        return self.members[0].row

    @property
    def last_row(self) -> int:
        return self.members[-1].row

    def __len__(self):
        return len(self.members)

    def polyline(self) -> np.ndarray:
        """Member endpoints chained bottom to top, each member oriented forward (+y)."""
        pts = []
        for m in self.members:
            a, b = m.p1, m.p2
            if (b[1], b[0]) < (a[1], a[0]):
                a, b = b, a
            pts += [a, b]
        return np.array(pts, dtype=float)


def _mergeable(low: LaneCluster, high: LaneCluster, max_row_gap: int) -> bool:
    """``high`` starts where ``low`` ends, on a horizontally adjacent tile."""
    top = low.members[-1]
    bottom = high.members[0]
    rise = top.row - bottom.row  # rows count downward
    dcol = abs(top.col - bottom.col)
    if rise == 0:
        return dcol == 1
    return 1 <= rise <= max_row_gap + 1 and dcol <= 1


def _merge(low: LaneCluster, high: LaneCluster) -> LaneCluster:
    a = list(low.members)
    b = list(high.members)
    if a[-1].row == b[0].row:
        # both own a tile in the shared row; keep the stronger one
        if b[0].conf > a[-1].conf:
            a.pop()
        else:
            b.pop(0)
    return LaneCluster(tuple(a + b))


def cluster_tiles(
    tmap: TileMap,
    conf_threshold: float = 0.0,
    nms_kernel_m: float = 0.2,
    nms_position: str = "crossing",
    n_neighbors: int = 3,
    min_members: int = 4,
    min_b_max: float = 1e-2,
    max_row_gap: int = 1,
) -> list[LaneCluster]:
    """Cluster the decoded segments of a tile map into lanes.

    Rows are visited from the bottom (nearest) to the top. Each segment is
    compared with the ``n_neighbors`` segments of the row below whose tiles
    are laterally closest and joins the cluster of its highest-affinity
    neighbour; when two segments claim the same neighbour the higher affinity
    wins and the other starts a new cluster. Clusters shorter than
    ``min_members`` or weaker than ``min_b_max`` are dropped, then clusters
    are merged pairwise while one starts on (or within ``max_row_gap`` empty
    rows above) the row where another ends, on a horizontally adjacent tile.
    """
    grid = tmap.grid
    by_row: dict = {}
    for s in decode_tiles(tmap, conf_threshold):
        by_row.setdefault(s.row, []).append(s)

    clusters: list[list] = []
    prev_row: list = []  # (segment, cluster index) of the row below
    prev_index = None
    for r in range(grid.tile_rows - 1, -1, -1):
        row_segs = by_row.get(r, [])
        if not row_segs:
            prev_row, prev_index = [], None
            continue
        _, y_ref = grid.tile_center(r, 0)
        curr = row_nms(sorted(row_segs, key=lambda s: s.col), nms_kernel_m, nms_position, float(y_ref))
        links = []
        if prev_row and prev_index == r + 1:
            for ci, c in enumerate(curr):
                cand = sorted(range(len(prev_row)), key=lambda k: (abs(prev_row[k][0].col - c.col), prev_row[k][0].col))
                best, best_a = None, 0.0
                for k in cand[:n_neighbors]:
                    a = affinity(c, prev_row[k][0])
                    if a > best_a:
                        best, best_a = k, a
                if best is not None:
                    links.append((-best_a, ci, best))
        links.sort()
        taken: set = set()
        owner: dict = {}
        for _, ci, k in links:
            if k not in taken:
                taken.add(k)
                owner[ci] = prev_row[k][1]
        new_row = []
        for ci, c in enumerate(curr):
            if ci in owner:
                idx = owner[ci]
                clusters[idx].append(c)
            else:
                idx = len(clusters)
                clusters.append([c])
            new_row.append((c, idx))
        prev_row, prev_index = new_row, r

    kept = [
        LaneCluster(tuple(m))
        for m in clusters
        if len(m) >= min_members and max(s.conf for s in m) >= min_b_max
    ]

    merged = True
    while merged:
        merged = False
        kept.sort(key=lambda c: (-c.first_row, c.members[0].col))
        for i, low in enumerate(kept):
            for j, high in enumerate(kept):
                if i != j and _mergeable(low, high, max_row_gap):
                    kept = [c for k, c in enumerate(kept) if k not in (i, j)] + [_merge(low, high)]
                    merged = True
                    break
            if merged:
                break
    kept.sort(key=lambda c: (-c.first_row, c.members[0].col))
    return kept


def _crossings(pts: np.ndarray, y: float) -> np.ndarray:
    """x coordinates where a polyline meets the horizontal line at ``y``."""
    y0, y1 = pts[:-1, 1], pts[1:, 1]
    lo, hi = np.minimum(y0, y1), np.maximum(y0, y1)
    hit = (lo <= y) & (y <= hi) & (hi > lo)
    if not hit.any():
        return np.zeros(0)
    t = (y - y0[hit]) / (y1[hit] - y0[hit])
    return pts[:-1, 0][hit] + t * (pts[1:, 0][hit] - pts[:-1, 0][hit])


def lane_point_counts(pred_lanes, gt_lanes, lateral_tol_m: float = 0.5, grid=None,
                      anchor_step: float = 1.0) -> tuple[int, int]:
    """(hits, total) ground-truth anchor points for one image.

    Ground-truth lanes are sampled at horizontal anchor lines every
    ``anchor_step`` meters (inside ``grid`` when given). Each gt lane is
    assigned at most one predicted lane by Hungarian matching on the mean
    clipped lateral distance; a gt point is a hit when its assigned lane
    crosses the same anchor line within ``lateral_tol_m``.
    """
    if not lateral_tol_m > 0:
        raise ValueError(f"lateral_tol_m must be > 0, got {lateral_tol_m}")
    gts = [as_points(g) for g in gt_lanes]
    if not gts:
        raise ValueError("no ground-truth lanes")
    preds = [np.asarray(p, dtype=float).reshape(-1, 2) for p in pred_lanes]
    preds = [p for p in preds if len(p) >= 2]
    if grid is not None:
        y_lo, y_hi = grid.y_min, grid.y_max
    else:
        ys = np.concatenate([g[:, 1] for g in gts])
        y_lo, y_hi = float(ys.min()), float(ys.max())
    anchors = np.arange(math.ceil(y_lo / anchor_step) * anchor_step, y_hi + 1e-9, anchor_step)

    gt_points = []  # per gt lane: list of (y, x)
    for g in gts:
        pts = []
        for y in anchors:
            xs = _crossings(g, y)
            if len(xs) == 0:
                continue
            x = xs[0]
            if grid is not None and not (grid.x_min <= x <= grid.x_max):
                continue
            pts.append((y, x))
        gt_points.append(pts)
    total = sum(len(p) for p in gt_points)
    if total == 0 or not preds:
        return 0, total

    cap = 10.0 * lateral_tol_m
    dists = []  # dists[i][j] -> array over gt_i's points
    cost = np.full((len(gts), len(preds)), np.inf)
    for i, pts in enumerate(gt_points):
        row = []
        for j, p in enumerate(preds):
            d = np.array([
                np.min(np.abs(xs - x)) if len(xs := _crossings(p, y)) else np.inf
                for y, x in pts
            ])
            row.append(d)
            if len(d):
                c = float(np.mean(np.minimum(d, cap)))
                if c < cap:
                    cost[i, j] = c
        dists.append(row)
    hits = 0
    for i, j in hungarian(cost):
        hits += int(np.sum(dists[i][j] <= lateral_tol_m))
    return hits, total


def lane_point_metric(pred_lanes, gt_lanes, lateral_tol_m: float = 0.5, grid=None,
                      anchor_step: float = 1.0) -> float:
    """Fraction of ground-truth anchor points hit by their assigned predicted lane."""
    hits, total = lane_point_counts(pred_lanes, gt_lanes, lateral_tol_m, grid, anchor_step)
    if total == 0:
        raise ValueError("ground-truth lanes have no anchor points inside the evaluated area")
    return hits / total
