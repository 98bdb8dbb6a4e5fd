"""Independent reference implementations used as test oracles."""
import math
from collections import deque

import numpy as np
from shapely.geometry import LineString, box

from lanekit.tiles import MIN_TILE_LENGTH


def supercover(lanes, grid, min_len=MIN_TILE_LENGTH):
    """Tiles whose box a lane runs through for at least ``min_len`` (shapely oracle)."""
    out = set()
    for lane in lanes:
        ls = LineString(lane)
        for r in range(grid.tile_rows):
            for c in range(grid.tile_cols):
                x0, x1, y0, y1 = grid.tile_bounds(r, c)
                if ls.intersection(box(x0, y0, x1, y1)).length >= min_len:
                    out.add((r, c))
    return out


def components(mask):
    """4-connected component count by breadth-first flood fill."""
    seen = np.zeros(mask.shape, dtype=bool)
    n = 0
    for i, j in zip(*np.nonzero(mask)):
        if seen[i, j]:
            continue
        n += 1
        q = deque([(i, j)])
        seen[i, j] = True
        while q:
            a, b = q.popleft()
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                u, v = a + da, b + db
                if 0 <= u < mask.shape[0] and 0 <= v < mask.shape[1] and mask[u, v] and not seen[u, v]:
                    seen[u, v] = True
                    q.append((u, v))
    return n


def brute_assignment(cost):
    """Exhaustive search: (cardinality, total cost) of the best partial assignment on finite entries.

    Enumerates every way to give each row a free finite column or none,
    memoized on (row, used columns); larger cardinality wins, then lower cost.
    """
    c = np.asarray(cost, dtype=float)
    n, m = c.shape if c.ndim == 2 else (0, 0)
    memo = {}

    def best(i, used):
        if i == n:
            return (0, 0.0, ())
        key = (i, used)
        if key not in memo:
            cand = [best(i + 1, used)]
            for j in range(m):
                if not used >> j & 1 and math.isfinite(c[i, j]):
                    k, tot, pairs = best(i + 1, used | 1 << j)
                    cand.append((k + 1, tot + c[i, j], ((i, j),) + pairs))
            memo[key] = min(cand, key=lambda t: (-t[0], t[1]))
        return memo[key]

    k, _, pairs = best(0, 0)
    return k, math.fsum(c[i, j] for i, j in pairs)


def brute_cmd(xs, xt, order, a, b):
    """Central moment discrepancy by explicit loops over coordinates and samples."""
    xs = np.asarray(xs, dtype=float)
    xt = np.asarray(xt, dtype=float)
    C = xs.shape[1]

    def mean(x, j):
        return math.fsum(x[i, j] for i in range(len(x))) / len(x)

    def central(x, j, k):
        mu = mean(x, j)
        return math.fsum((x[i, j] - mu) ** k for i in range(len(x))) / len(x)

    total = math.sqrt(math.fsum((mean(xs, j) - mean(xt, j)) ** 2 for j in range(C))) / (b - a)
    for k in range(2, order + 1):
        total += math.sqrt(math.fsum((central(xs, j, k) - central(xt, j, k)) ** 2 for j in range(C))) / (b - a) ** k
    return total


def _project(p, a, b):
    """Signed position along a->b (meters) and distance of p from the line through a, b."""
    ax, ay = a
    ux, uy = b[0] - ax, b[1] - ay
    L = math.hypot(ux, uy)
    ux, uy = ux / L, uy / L
    wx, wy = p[0] - ax, p[1] - ay
    return wx * ux + wy * uy, abs(wx * uy - wy * ux), L


def seg_dist_ref(p, q, min_overlap=0.5):
    """Scalar seg_dist with interval-intersection overlap."""
    worst = 0.0
    for (s1, s2), (t1, t2) in (((p[0], p[1]), (q[0], q[1])), ((q[0], q[1]), (p[0], p[1]))):
        a, da, L = _project(s1, t1, t2)
        b, db, _ = _project(s2, t1, t2)
        inter = max(0.0, min(max(a, b), L) - max(min(a, b), 0.0))
        if inter / L < min_overlap:
            return math.inf
        worst = max(worst, da, db)
    return worst
