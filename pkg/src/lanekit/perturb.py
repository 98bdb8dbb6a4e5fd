"""Controlled corruption of ground-truth tile maps into detector-like predictions."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .scenes import item_seed
from .tiles import TileEntry, TileMap


@dataclass(frozen=True)
class PerturbSpec:
    lateral_sigma: float = 0.0
    conf_sigma: float = 0.0
    dropout: float = 0.0
    spurious_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.lateral_sigma < 0 or self.conf_sigma < 0 or self.spurious_rate < 0:
            raise ValueError("noise levels and spurious_rate must be >= 0")
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError(f"dropout must lie in [0, 1], got {self.dropout}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "PerturbSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown perturb keys: {sorted(unknown)}")
        return cls(**d)


def perturb_tilemap(tmap: TileMap, spec: PerturbSpec, rng: np.random.Generator) -> TileMap:
    """Shift, re-score, drop and add tiles of one map.

    Every entry draws (dropout, lateral, confidence) in that order whatever the
    spec, so changing one noise level leaves the other streams untouched.
    Lateral noise moves the local line along its normal; a shift that pushes
    the line's foot point beyond the tile size removes the entry.
    """
    ts = tmap.grid.tile_size
    out = []
    for e in tmap.entries:
        u_drop = rng.random()
        shift = rng.normal(0.0, 1.0) * spec.lateral_sigma
        cnoise = abs(rng.normal(0.0, 1.0)) * spec.conf_sigma
        if u_drop < spec.dropout:
            continue
        dx = e.dx - math.sin(e.theta) * shift
        dy = e.dy + math.cos(e.theta) * shift
        if abs(dx) > ts or abs(dy) > ts:
            continue
        conf = min(1.0, max(0.0, e.conf - cnoise))
        out.append(e.replace(dx=dx, dy=dy, conf=conf))

    n_spurious = int(rng.poisson(spec.spurious_rate)) if spec.spurious_rate > 0 else 0
    if n_spurious:
        used = {(e.row, e.col) for e in out}
        free = [(r, c) for r in range(tmap.grid.tile_rows) for c in range(tmap.grid.tile_cols) if (r, c) not in used]
        picks = rng.choice(len(free), size=min(n_spurious, len(free)), replace=False)
        for k in sorted(int(p) for p in picks):
            r, c = free[k]
            dx, dy = rng.uniform(-0.5 * ts, 0.5 * ts, size=2)
            theta = rng.uniform(-math.pi, math.pi)
            out.append(TileEntry(r, c, float(rng.random()), float(dx), float(dy), float(theta)))
    return TileMap(tmap.grid, tuple(out))


def perturb_predictions(gt, spec: PerturbSpec):
    """Perturb a dataset of tile maps.

    ``gt`` is a sequence of maps or a mapping ``image_id -> map``; the result
    has the same shape. Item ``k`` uses its own generator seeded from
    ``(spec.seed, k)``, so results do not depend on processing order.
    """
    if isinstance(gt, dict):
        return {
            key: perturb_tilemap(m, spec, np.random.default_rng(item_seed(spec.seed, k)))
            for k, (key, m) in enumerate(gt.items())
        }
    return [perturb_tilemap(m, spec, np.random.default_rng(item_seed(spec.seed, k))) for k, m in enumerate(gt)]
