# Camera geometry: from a forward-facing camera to a metric top view.
from pathlib import Path
import math

import numpy as np

from lanekit import CameraModel, TopViewGrid, build_ipm, ground_to_image, image_to_ground
from lanekit import make_oriented_view, warp_to_topview
from lanekit.io import write_image

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

cam = CameraModel(fx=1000.0, fy=1000.0, cx=640.0, cy=360.0, height=1.5, pitch=0.1)
grid = TopViewGrid()
print(grid.tile_rows, "x", grid.tile_cols, "tiles,", grid.shape, "pixels")

h = build_ipm(cam, grid)

# the optical axis hits the road at height / tan(pitch)
print(image_to_ground(h, [640.0, 360.0]), 1.5 / math.tan(0.1))

# round trip over random ground points
rng = np.random.default_rng(0)
pts = np.stack([rng.uniform(-16, 16, 1000), rng.uniform(1, 80, 1000)], 1)
print("max round-trip error:", np.abs(image_to_ground(h, ground_to_image(h, pts)) - pts).max())

# paint two straight lane lines into a synthetic camera frame and warp it
vv, uu = np.mgrid[0:720, 0:1280] + 0.5
ok = vv > cam.cy - cam.fy * math.tan(cam.pitch) + 2
g = image_to_ground(h, np.stack([uu[ok], vv[ok]], 1))
frame = np.zeros((720, 1280))
frame[ok] = (np.min(np.abs(np.abs(g[:, 0])[:, None] - [1.75]), 1) < 0.2).astype(float)
top = warp_to_topview(frame, h, grid)
write_image(out / "frame.png", frame)
write_image(out / "topview.png", top)
print("lane pixels in the top view:", int((top > 0.5).sum()))

# the three panned views used for the view-classification task
far = TopViewGrid(y_min=8.0)
for o in ("left", "center", "right"):
    view, label = make_oriented_view(frame, cam, far, o)
    write_image(out / f"view_{label}.png", view)
    print(o, label, view.shape)
