"""Segment-based lane evaluation: seg_dist, Hungarian matching, PR curves, AP and mAP."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import segments_to_array

THRESHOLDS = (0.10, 0.20, 0.30, 0.40, 0.50)
MIN_OVERLAP = 0.5


def _half_dist(P: np.ndarray, Q: np.ndarray, literal: bool):
    """Project the endpoints of every P onto the line of every Q.

    Returns the (n, m) perpendicular distance of the farther endpoint and a
    mask of pairs eliminated for insufficient overlap.
    """
    ex = (Q[:, 2] - Q[:, 0])[None, :]
    ey = (Q[:, 3] - Q[:, 1])[None, :]
    L = np.hypot(ex, ey)
    w1x = P[:, 0:1] - Q[None, :, 0]
    w1y = P[:, 1:2] - Q[None, :, 1]
    w2x = P[:, 2:3] - Q[None, :, 0]
    w2y = P[:, 3:4] - Q[None, :, 1]
    # unnormalized cross products keep d(p, p) exactly 0
    d1 = np.abs(ex * w1y - ey * w1x) / L
    d2 = np.abs(ex * w2y - ey * w2x) / L
    t1 = (ex * w1x + ey * w1y) / L
    t2 = (ex * w2x + ey * w2y) / L
    if literal:
        ratio = np.abs(t2 - t1) / L
        drop = ratio > MIN_OVERLAP
    else:
        lo = np.maximum(np.minimum(t1, t2), 0.0)
        hi = np.minimum(np.maximum(t1, t2), L)
        ratio = np.maximum(hi - lo, 0.0) / L
        drop = ratio < MIN_OVERLAP
    return np.maximum(d1, d2), drop


def seg_dist_matrix(preds, gts, literal: bool = False) -> np.ndarray:
    """Pairwise ``seg_dist`` between two segment collections, shape (n, m)."""
    P = segments_to_array(preds)[:, :4]
    Q = segments_to_array(gts)[:, :4]
    if len(P) == 0 or len(Q) == 0:
        return np.zeros((len(P), len(Q)))
    dpq, drop_pq = _half_dist(P, Q, literal)
    dqp, drop_qp = _half_dist(Q, P, literal)
    d = np.maximum(dpq, dqp.T)
    d[drop_pq | drop_qp.T] = np.inf
    return d


def seg_dist(p, q, literal: bool = False) -> float:
    """Symmetric distance between two segments.

    Each endpoint is projected onto the other segment's infinite line. The
    pair is rejected (``inf``) when, in either direction, the projected
    segment covers less than half of the opposite segment; otherwise the
    distance is the largest endpoint-to-projection distance. ``literal=True``
    instead rejects pairs whose projected length exceeds half of the
    opposite length, ignoring position.
    """
    return float(seg_dist_matrix([p], [q], literal)[0, 0])


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost partial assignment over a cost matrix with ``inf`` holes.

    Among all one-to-one assignments using only finite entries, returns one
    of maximum cardinality and, among those, minimum total cost.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.size == 0:
        return []
    finite = np.isfinite(c)
    if not finite.any():
        return []
    rows = np.nonzero(finite.any(axis=1))[0]
    cols = np.nonzero(finite.any(axis=0))[0]
    sub = c[np.ix_(rows, cols)]
    fin = np.isfinite(sub)
    # a forbidden pair costs more than any set of finite pairs could save
    big = 2.0 * np.abs(sub[fin]).sum() + 1.0
    r, k = linear_sum_assignment(np.where(fin, sub, big))
    keep = fin[r, k]
    return [(int(rows[i]), int(cols[j])) for i, j in zip(r[keep], k[keep])]


@dataclass
class Matching:
    pairs: list = field(default_factory=list)
    unmatched_pred: list = field(default_factory=list)
    unmatched_gt: list = field(default_factory=list)

    @property
    def n_pred(self) -> int:
        return len(self.pairs) + len(self.unmatched_pred)

    @property
    def n_gt(self) -> int:
        return len(self.pairs) + len(self.unmatched_gt)

    def tp_mask(self) -> np.ndarray:
        m = np.zeros(self.n_pred, dtype=bool)
        for i, _, _ in self.pairs:
            m[i] = True
        return m


def match_from_distances(d: np.ndarray, seg_dist_max: float) -> Matching:
    n, m = d.shape
    cost = np.where(d < seg_dist_max, d, np.inf)
    pairs = sorted(hungarian(cost))
    used_p = {i for i, _ in pairs}
    used_g = {j for _, j in pairs}
    return Matching(
        [(i, j, float(d[i, j])) for i, j in pairs],
        [i for i in range(n) if i not in used_p],
        [j for j in range(m) if j not in used_g],
    )


def match_segments(preds, gts, seg_dist_max: float, literal: bool = False) -> Matching:
    """Hungarian matching of predictions to ground truth under ``seg_dist < seg_dist_max``."""
    if not seg_dist_max > 0:
        raise ValueError(f"seg_dist_max must be > 0, got {seg_dist_max}")
    return match_from_distances(seg_dist_matrix(preds, gts, literal), seg_dist_max)


@dataclass
class PRCurve:
    """One point per detection, in descending-confidence order."""

    confidence: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    tp: int
    fp: int
    fn: int

    def __len__(self):
        return len(self.confidence)

    def points(self):
        return list(zip(self.confidence.tolist(), self.precision.tolist(), self.recall.tolist()))

    def to_csv(self) -> str:
        lines = ["confidence,precision,recall"]
        lines += [f"{c!r},{p!r},{r!r}" for c, p, r in self.points()]
        return "\n".join(lines) + "\n"


def pr_curve(matchings: Sequence[Matching], confidences: Sequence) -> PRCurve:
    """Aggregate per-image matchings into one precision-recall curve.

    Detections from all images are ranked together by confidence; ties keep
    the input order (image order, then detection order).
    """
    if len(matchings) != len(confidences):
        raise ValueError("need one confidence array per matching")
    n_gt = sum(m.n_gt for m in matchings)
    if n_gt == 0:
        raise ValueError("no ground-truth segments: recall is undefined")
    conf_parts, tp_parts = [], []
    for m, c in zip(matchings, confidences):
        c = np.asarray(c, dtype=float).reshape(-1)
        if len(c) != m.n_pred:
            raise ValueError(f"matching has {m.n_pred} detections but {len(c)} confidences")
        conf_parts.append(c)
        tp_parts.append(m.tp_mask())
    conf = np.concatenate(conf_parts) if conf_parts else np.zeros(0)
    tp = np.concatenate(tp_parts) if tp_parts else np.zeros(0, dtype=bool)
    order = np.argsort(-conf, kind="stable")
    conf = conf[order]
    tp = tp[order]
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    precision = ctp / np.maximum(ctp + cfp, 1)
    recall = ctp / n_gt
    total_tp = int(ctp[-1]) if len(ctp) else 0
    total_fp = int(cfp[-1]) if len(cfp) else 0
    return PRCurve(conf, precision.astype(float), recall.astype(float), total_tp, total_fp, n_gt - total_tp)


def average_precision(curve: PRCurve) -> float:
    """Area under the all-points interpolated precision envelope (0 for an empty curve)."""
    if len(curve) == 0:
        return 0.0
    n_gt = curve.tp + curve.fn
    if n_gt == 0:
        return 0.0
    p = np.maximum.accumulate(curve.precision[::-1])[::-1]
    # recall steps by exactly 1/n_gt at each true positive; summing the envelope
    # there (rather than float recall differences) keeps perfect curves at 1.0
    cum_tp = np.rint(curve.recall * n_gt)
    hit = np.diff(np.concatenate([[0.0], cum_tp])) > 0
    return math.fsum(p[hit].tolist()) / n_gt


@dataclass
class MapReport:
    ap: dict
    map: float
    curves: dict = field(default_factory=dict, repr=False)

    def to_json(self) -> dict:
        return {"ap": {f"{t:.2f}": v for t, v in self.ap.items()}, "map": self.map}


def _as_dets(segs) -> tuple[np.ndarray, np.ndarray]:
    """(n, 4) geometry and (n,) confidences from segments or an (n, 5) array."""
    if isinstance(segs, np.ndarray):
        a = np.asarray(segs, dtype=float)
        if a.size == 0:
            return np.zeros((0, 4)), np.zeros(0)
        a = a.reshape(-1, a.shape[-1])
        conf = a[:, 4] if a.shape[1] > 4 else np.ones(len(a))
        return a[:, :4], conf
    geo = segments_to_array(segs)
    conf = np.array([getattr(s, "conf", 1.0) for s in segs], dtype=float)
    return geo, conf


def map_eval(
    preds: Mapping,
    gts: Mapping,
    thresholds=THRESHOLDS,
    literal: bool = False,
    threads: int = 1,
) -> MapReport:
    """Mean AP over the ``seg_dist_max`` thresholds for a dataset of images.

    ``preds`` and ``gts`` map image ids to segment lists (or ``(n, 5)`` /
    ``(n, 4)`` arrays). Matching is recomputed independently per threshold.
    """
    missing = sorted(set(gts) - set(preds), key=str)
    extra = sorted(set(preds) - set(gts), key=str)
    if missing or extra:
        raise ValueError(f"image id mismatch: missing predictions for {missing}, no ground truth for {extra}")
    ids = list(gts)

    def per_image(img_id):
        pg, pc = _as_dets(preds[img_id])
        gg, _ = _as_dets(gts[img_id])
        d = seg_dist_matrix(pg, gg, literal)
        return pc, [match_from_distances(d, t) for t in thresholds]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(per_image, ids))
    else:
        results = [per_image(i) for i in ids]

    confs = [r[0] for r in results]
    ap, curves = {}, {}
    for k, t in enumerate(thresholds):
        curve = pr_curve([r[1][k] for r in results], confs)
        curves[t] = curve
        ap[t] = average_precision(curve)
    vals = list(ap.values())
    return MapReport(ap, math.fsum(vals) / len(vals), curves)
