"""Image-domain operators of the lane-image autoencoder: gradient target,
reconstruction ignore mask and the masked L1 distance."""
from __future__ import annotations

import numpy as np

from .geometry import convex_hull, dilate_polygon, points_in_convex_polygon


def grad(image: np.ndarray) -> np.ndarray:
    """L1 gradient magnitude ``|d/dx| + |d/dy|``.

    Central differences inside, one-sided differences on the border (the
    ``np.gradient`` scheme). Axes of length 1 contribute zero.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError(f"grad expects a single-channel 2-D raster, got shape {img.shape}")
    out = np.zeros_like(img)
    for axis in (0, 1):
        if img.shape[axis] > 1:
            out += np.abs(np.gradient(img, axis=axis))
    return out


def boxes_mask(shape: tuple[int, int], boxes) -> np.ndarray:
    """True on pixels whose centers fall inside any ``{x0, y0, x1, y1}`` box (inclusive)."""
    h, w = shape
    hit = np.zeros(shape, dtype=bool)
    cols = np.arange(w) + 0.5
    rows = np.arange(h) + 0.5
    for b in boxes:
        x0, y0, x1, y1 = (b["x0"], b["y0"], b["x1"], b["y1"]) if isinstance(b, dict) else b
        cs = (cols >= min(x0, x1)) & (cols <= max(x0, x1))
        rs = (rows >= min(y0, y1)) & (rows <= max(y0, y1))
        hit |= rs[:, None] & cs[None, :]
    return hit


def reconstruction_mask(
    lane_image: np.ndarray,
    vehicle_boxes=(),
    lane_threshold: float = 0.5,
    dilation_m: float = 2.0,
    px_per_meter: float = 4.0,
) -> np.ndarray:
    """Pixels counted by the reconstruction loss (1) versus ignored (0).

    Keeps the convex hull of lane pixels (``lane_image > lane_threshold``),
    grown by ``dilation_m`` meters using a 16-gon, and removes vehicle boxes.
    ``px_per_meter`` is the resolution of ``lane_image``.
    """
    if dilation_m < 0:
        raise ValueError(f"dilation_m must be >= 0, got {dilation_m}")
    img = np.asarray(lane_image, dtype=float)
    mask = np.zeros(img.shape, dtype=np.uint8)
    ii, jj = np.nonzero(img > lane_threshold)
    if len(ii) == 0:
        return mask
    hull = convex_hull(np.stack([jj + 0.5, ii + 0.5], axis=1))
    poly = dilate_polygon(hull, dilation_m * px_per_meter)
    # only pixels inside the polygon's bounding box can be inside it
    c0 = max(0, int(np.floor(poly[:, 0].min())))
    c1 = min(img.shape[1], int(np.ceil(poly[:, 0].max())) + 1)
    r0 = max(0, int(np.floor(poly[:, 1].min())))
    r1 = min(img.shape[0], int(np.ceil(poly[:, 1].max())) + 1)
    px, py = np.meshgrid(np.arange(c0, c1) + 0.5, np.arange(r0, r1) + 0.5)
    mask[r0:r1, c0:c1] = points_in_convex_polygon(px, py, poly)
    if len(vehicle_boxes):
        mask[boxes_mask(img.shape, vehicle_boxes)] = 0
    return mask


def masked_l1(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """Unnormalized L1 distance over the pixels where ``mask`` is nonzero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = np.asarray(mask)
    if a.shape != b.shape or a.shape[: m.ndim] != m.shape:
        raise ValueError(f"shape mismatch: {a.shape}, {b.shape}, mask {m.shape}")
    diff = np.abs(a - b)
    if diff.ndim > m.ndim:
        diff = diff.reshape(m.shape + (-1,)).sum(axis=-1)
    return float(np.sum(diff[m != 0]))
