"""Camera model, inverse perspective mapping and the top-view raster.

Axis convention shared by the whole package: the ground plane is z = 0, the
origin is the camera's ground projection, +x points right and +y points
forward (away from the camera). Top-view rasters store row 0 at ``y_max``
(far) and column 0 at ``x_min``, so a raster displayed as an image looks like
a bird's eye view with the car at the bottom.

Image pixel ``(i, j)`` covers the square ``[j, j+1) x [i, i+1)`` in continuous
``(u, v)`` coordinates, so its center is ``(j + 0.5, i + 0.5)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_W_EPS = 1e-12

ORIENTATIONS = {"left": "l", "center": "c", "right": "r", "l": "l", "c": "c", "r": "r"}


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera above a flat ground plane (no roll, no distortion).

    ``pitch`` is positive when the camera looks down, ``yaw`` is positive
    when it is panned to the right.
    """

    fx: float
    fy: float
    cx: float
    cy: float
    height: float
    pitch: float
    yaw: float = 0.0

    def __post_init__(self):
        if not self.height > 0:
            raise ValueError(f"camera height must be > 0, got {self.height}")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be > 0, got fx={self.fx}, fy={self.fy}")
        if not abs(self.pitch) < math.pi / 2:
            raise ValueError(f"|pitch| must be < pi/2, got {self.pitch}")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def rotation(self) -> np.ndarray:
        """World-to-camera rotation; rows are the camera axes in world coordinates."""
        sp, cp = math.sin(self.pitch), math.cos(self.pitch)
        sy, cy = math.sin(self.yaw), math.cos(self.yaw)
        right = (cy, -sy, 0.0)
        down = (-sp * sy, -sp * cy, -cp)
        forward = (cp * sy, cp * cy, -sp)
        return np.array([right, down, forward])

    def with_yaw(self, yaw: float) -> "CameraModel":
        return CameraModel(self.fx, self.fy, self.cx, self.cy, self.height, self.pitch, yaw)

    def to_json(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "height_m": self.height,
            "pitch_rad": self.pitch,
            "yaw_rad": self.yaw,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CameraModel":
        return cls(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            height=float(d["height_m"]),
            pitch=float(d["pitch_rad"]),
            yaw=float(d.get("yaw_rad", 0.0)),
        )


def _is_multiple(extent: float, step: float) -> bool:
    q = extent / step
    return abs(q - round(q)) < 1e-9 * max(1.0, abs(q))


@dataclass(frozen=True)
class TopViewGrid:
    """Metric extent of the top view, its raster resolution and the tile lattice."""

    x_min: float = -16.0
    x_max: float = 16.0
    y_min: float = 0.0
    y_max: float = 80.0
    px_per_meter: float = 4.0
    tile_size: float = 1.6

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max must exceed x_min ({self.x_min}, {self.x_max})")
        if not self.y_max > self.y_min:
            raise ValueError(f"y_max must exceed y_min ({self.y_min}, {self.y_max})")
        if not self.tile_size > 0:
            raise ValueError(f"tile_size must be > 0, got {self.tile_size}")
        if not self.px_per_meter > 0:
            raise ValueError(f"px_per_meter must be > 0, got {self.px_per_meter}")
        for name, ext in (("x", self.x_max - self.x_min), ("y", self.y_max - self.y_min)):
            if not _is_multiple(ext, self.tile_size):
                raise ValueError(f"{name} extent {ext} is not a multiple of tile_size {self.tile_size}")
            if not _is_multiple(ext * self.px_per_meter, 1.0):
                raise ValueError(f"{name} extent {ext} m is not a whole number of pixels at {self.px_per_meter} px/m")

    @property
    def tile_rows(self) -> int:
        return int(round((self.y_max - self.y_min) / self.tile_size))

    @property
    def tile_cols(self) -> int:
        return int(round((self.x_max - self.x_min) / self.tile_size))

    @property
    def height_px(self) -> int:
        return int(round((self.y_max - self.y_min) * self.px_per_meter))

    @property
    def width_px(self) -> int:
        return int(round((self.x_max - self.x_min) * self.px_per_meter))

    @property
    def shape(self) -> tuple[int, int]:
        return self.height_px, self.width_px

    def tile_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        """(x0, x1, y0, y1) of a tile; row 0 is the far row."""
        ts = self.tile_size
        x0 = self.x_min + col * ts
        y1 = self.y_max - row * ts
        return x0, x0 + ts, y1 - ts, y1

    def tile_center(self, row, col):
        ts = self.tile_size
        x = self.x_min + (np.asarray(col) + 0.5) * ts
        y = self.y_max - (np.asarray(row) + 0.5) * ts
        return x, y

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Ground (x, y) of every raster pixel center, each of shape (H', W')."""
        s = 1.0 / self.px_per_meter
        xs = self.x_min + (np.arange(self.width_px) + 0.5) * s
        ys = self.y_max - (np.arange(self.height_px) + 0.5) * s
        return np.meshgrid(xs, ys)

    def ground_to_pixel(self, x, y, divisor: float = 1.0):
        """Continuous raster coordinates (col, row) of ground points; pixel centers at +0.5."""
        ppm = self.px_per_meter / divisor
        return (np.asarray(x) - self.x_min) * ppm, (self.y_max - np.asarray(y)) * ppm

    def to_json(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "px_per_meter": self.px_per_meter,
            "tile_size": self.tile_size,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TopViewGrid":
        return cls(**{k: float(d[k]) for k in ("x_min", "x_max", "y_min", "y_max", "px_per_meter", "tile_size") if k in d})


@dataclass(frozen=True)
class Homography:
    """Image-to-ground homography with its cached inverse (ground-to-image)."""

    matrix: np.ndarray
    inverse: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if abs(np.linalg.det(m)) < 1e-300:
            raise ValueError("homography is singular")
        inv = np.linalg.inv(m) if self.inverse is None else np.array(self.inverse, dtype=float)
        m.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inverse", inv)

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))


def _apply(m: np.ndarray, pts, what: str) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 2)
    w = m[2, 0] * flat[:, 0] + m[2, 1] * flat[:, 1] + m[2, 2]
    bad = ~(w > _W_EPS)
    if bad.any():
        k = int(np.argmax(bad))
        raise ValueError(f"{what}: point {tuple(flat[k])} lies at or beyond the horizon (w={w[k]:.3g})")
    a = (m[0, 0] * flat[:, 0] + m[0, 1] * flat[:, 1] + m[0, 2]) / w
    b = (m[1, 0] * flat[:, 0] + m[1, 1] * flat[:, 1] + m[1, 2]) / w
    return np.stack([a, b], axis=-1).reshape(pts.shape)


def image_to_ground(h: Homography, pts) -> np.ndarray:
    """Map image points (u, v), shape (..., 2), to ground points (x, y) in meters."""
    return _apply(h.matrix, pts, "image_to_ground")


def ground_to_image(h: Homography, pts) -> np.ndarray:
    """Map ground points (x, y), shape (..., 2), to image points (u, v)."""
    return _apply(h.inverse, pts, "ground_to_image")


def build_ipm(camera: CameraModel, grid: TopViewGrid) -> Homography:
    """Build the inverse perspective mapping for ``camera`` over ``grid``.

    The ground-to-image matrix is ``K [r1 r2 -h*r3]`` (columns of the
    world-to-camera rotation), scaled so that its homogeneous coordinate is
    the depth along the optical axis. Raises ``ValueError`` naming the first
    raster row of the grid that lies at or behind the camera.
    """
    R = camera.rotation()
    g2i = camera.K @ np.column_stack([R[:, 0], R[:, 1], -camera.height * R[:, 2]])

    s = 1.0 / grid.px_per_meter
    ys = grid.y_max - (np.arange(grid.height_px) + 0.5) * s
    xs = np.array([grid.x_min + 0.5 * s, grid.x_max - 0.5 * s])
    # depth is affine in (x, y) so the two extreme columns bound each row
    depth = g2i[2, 0] * xs[None, :] + g2i[2, 1] * ys[:, None] + g2i[2, 2]
    bad = depth.min(axis=1) <= 1e-9
    if bad.any():
        r = int(np.argmax(bad))
        raise ValueError(
            f"degenerate pose: top-view row {r} (y={ys[r]:.3f} m) is at or behind the camera horizon "
            f"(height={camera.height}, pitch={camera.pitch}, yaw={camera.yaw})"
        )
    return Homography(np.linalg.inv(g2i), g2i)


def bilinear_sample(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Sample ``image`` at continuous pixel coordinates with zero padding.

    ``(u, v)`` use the pixel-center-at-+0.5 convention. Neighbours outside the
    image contribute 0, so a sample fades to 0 within half a pixel of the border.
    """
    img = np.asarray(image, dtype=float)
    h, w = img.shape[:2]
    x = np.asarray(u, dtype=float) - 0.5
    y = np.asarray(v, dtype=float) - 0.5
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    extra = img.shape[2:]
    out = np.zeros(x.shape + extra)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi = x0 + dx
            yi = y0 + dy
            ok = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            vals = np.zeros(x.shape + extra)
            vals[ok] = img[yi[ok], xi[ok]]
            wgt = wx * wy
            out += vals * wgt.reshape(wgt.shape + (1,) * len(extra))
    return out


def warp_to_topview(image: np.ndarray, h: Homography, grid: TopViewGrid) -> np.ndarray:
    """Resample a camera image into the (H', W') top-view raster of ``grid``."""
    image = np.asarray(image)
    if image.size == 0:
        raise ValueError("image is empty")
    gx, gy = grid.pixel_centers()
    uv = ground_to_image(h, np.stack([gx, gy], axis=-1))
    return bilinear_sample(image, uv[..., 0], uv[..., 1])


def crop_slices(grid: TopViewGrid, crop) -> tuple[slice, slice]:
    """Raster (row, col) slices of a metric crop rectangle ``(x0, x1, y0, y1)``."""
    x0, x1, y0, y1 = (float(c) for c in crop)
    tol = 1e-9
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"crop {crop} is empty or inverted")
    if x0 < grid.x_min - tol or x1 > grid.x_max + tol or y0 < grid.y_min - tol or y1 > grid.y_max + tol:
        raise ValueError(
            f"crop {crop} lies outside grid x=[{grid.x_min}, {grid.x_max}], y=[{grid.y_min}, {grid.y_max}]"
        )
    ppm = grid.px_per_meter
    c0 = int(round((x0 - grid.x_min) * ppm))
    c1 = int(round((x1 - grid.x_min) * ppm))
    r0 = int(round((grid.y_max - y1) * ppm))
    r1 = int(round((grid.y_max - y0) * ppm))
    return slice(r0, r1), slice(c0, c1)


def default_crop(grid: TopViewGrid) -> tuple[float, float, float, float]:
    """Central rectangle covering the middle half of the grid along each axis."""
    cx = 0.5 * (grid.x_min + grid.x_max)
    cy = 0.5 * (grid.y_min + grid.y_max)
    hx = 0.25 * (grid.x_max - grid.x_min)
    hy = 0.25 * (grid.y_max - grid.y_min)
    return cx - hx, cx + hx, cy - hy, cy + hy


def make_oriented_view(
    image: np.ndarray,
    camera: CameraModel,
    grid: TopViewGrid,
    orientation: str = "center",
    pan_deg: float = 5.0,
    crop=None,
) -> tuple[np.ndarray, str]:
    """Warp ``image`` as seen by a virtually panned camera and crop a fixed rectangle.

    Left pans the camera by ``-pan_deg``, right by ``+pan_deg``. Returns the
    cropped top view and the orientation label ``'l'``, ``'c'`` or ``'r'``.
    """
    try:
        label = ORIENTATIONS[orientation]
    except KeyError:
        raise ValueError(f"orientation must be one of left/center/right, got {orientation!r}") from None
    rows, cols = crop_slices(grid, default_crop(grid) if crop is None else crop)
    sign = {"l": -1.0, "c": 0.0, "r": 1.0}[label]
    cam = camera.with_yaw(camera.yaw + sign * math.radians(pan_deg)) if sign else camera
    top = warp_to_topview(image, build_ipm(cam, grid), grid)
    return top[rows, cols], label
