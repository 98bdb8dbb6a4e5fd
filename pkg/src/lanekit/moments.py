"""Central Moment Discrepancy between two sets of feature samples."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SampleSet:
    """``n x C`` samples whose entries are known to lie in ``value_range``."""

    samples: np.ndarray
    value_range: tuple[float, float] = (0.0, 1.0)
    enforce_range: bool = False

    def __post_init__(self):
        z = np.asarray(self.samples, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if z.ndim != 2 or z.shape[0] < 1:
            raise ValueError(f"need at least one sample of shape (n, C), got {z.shape}")
        a, b = self.value_range
        if not b > a:
            raise ValueError(f"value_range must satisfy b > a, got {self.value_range}")
        if self.enforce_range and (z.min() < a or z.max() > b):
            raise ValueError(f"samples span [{z.min()}, {z.max()}], outside value_range [{a}, {b}]")
        object.__setattr__(self, "samples", z)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


def flatten_feature_map(fmap: np.ndarray, value_range=(0.0, 1.0)) -> SampleSet:
    """Treat every spatial cell of a ``C x H x W`` map as one C-dimensional sample.

    Samples come out in row-major (H, then W) order.
    """
    f = np.asarray(fmap, dtype=float)
    if f.ndim != 3 or f.size == 0:
        raise ValueError(f"expected a nonempty C x H x W map, got shape {f.shape}")
    return SampleSet(f.reshape(f.shape[0], -1).T, value_range)


def _as_samples(z, value_range):
    if isinstance(z, SampleSet):
        return z.samples, z.value_range
    return SampleSet(z, value_range).samples, value_range


def cmd(zs, zt, order: int = 2, value_range=None) -> float:
    """Central moment discrepancy of order ``order``.

    ``||E zs - E zt|| / (b - a) + sum_{k=2..order} ||c_k(zs) - c_k(zt)|| / (b - a)^k``
    with ``c_k`` the coordinate-wise k-th central moment (1/n normalization).
    ``value_range`` defaults to the range carried by ``zs`` (or ``(0, 1)``).
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if value_range is None:
        value_range = zs.value_range if isinstance(zs, SampleSet) else (0.0, 1.0)
    xs, _ = _as_samples(zs, value_range)
    xt, _ = _as_samples(zt, value_range)
    if xs.shape[1] != xt.shape[1]:
        raise ValueError(f"dimension mismatch: {xs.shape[1]} vs {xt.shape[1]}")
    a, b = value_range
    span = float(b) - float(a)
    if not span > 0:
        raise ValueError(f"value_range must satisfy b > a, got {value_range}")
    ms = xs.mean(axis=0)
    mt = xt.mean(axis=0)
    total = float(np.linalg.norm(ms - mt)) / span
    cs = xs - ms
    ct = xt - mt
    for k in range(2, order + 1):
        total += float(np.linalg.norm((cs**k).mean(axis=0) - (ct**k).mean(axis=0))) / span**k
    return total
