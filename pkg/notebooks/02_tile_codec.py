# Tiles: encode lane polylines into per-tile line parameters and decode them back.
import math

import numpy as np

from lanekit import TopViewGrid, decode_tiles, encode_tiles

grid = TopViewGrid()

# a straight, slightly slanted lane
lane = np.array([[-1.0, -5.0], [3.0, 100.0]])
tm = encode_tiles([lane], grid)
print(len(tm), "tiles")
for e in list(tm)[:3]:
    print(e.row, e.col, round(e.dx, 3), round(e.dy, 3), round(math.degrees(e.theta), 2))

segs = decode_tiles(tm, conf_threshold=0.5)
print(segs[0].p1, segs[0].p2)

# a circular arc of radius 30 m: each tile keeps a straight chord
R = 30.0
s = np.linspace(0, 40, 2000)
arc = np.stack([R - R * np.cos(s / R), R * np.sin(s / R)], 1)
segs = decode_tiles(encode_tiles([arc], grid))
worst = 0.0
for sg in segs:
    t = np.linspace(0, 1, 50)[:, None]
    p = np.array(sg.p1) + t * (np.array(sg.p2) - np.array(sg.p1))
    worst = max(worst, np.abs(np.hypot(p[:, 0] - R, p[:, 1]) - R).max())
print(len(segs), "segments, worst distance to the circle %.3f m" % worst)

# the dense layout: (7, H, W) with b, dx, dy, theta and three reserved channels
dense = tm.to_dense()
print(dense.shape, dense[0].sum())
