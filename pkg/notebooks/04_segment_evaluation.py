# Segment-level evaluation: distances, matching, precision/recall and mAP.
import numpy as np

from lanekit import (PerturbSpec, ScoredSegment, Segment, TopViewGrid, decode_tiles, encode_tiles, generate_scene,
                     hungarian, map_eval, perturb_predictions, seg_dist)

a = Segment((0, 0), (0, 1))
print(seg_dist(a, Segment((0.3, 0), (0.3, 1))))   # 0.3
print(seg_dist(a, Segment((0.3, 5), (0.3, 6))))   # inf: no overlap

# infinite entries are forbidden pairs
cost = np.array([[1.0, np.inf], [0.5, 2.0]])
print(hungarian(cost))

grid = TopViewGrid()
gt = {i: encode_tiles(generate_scene(i).lanes, grid) for i in range(40)}
gt_segs = {k: decode_tiles(v) for k, v in gt.items()}
print("perfect:", map_eval(gt_segs, gt_segs).map)

for sigma in (0.0, 0.05, 0.15, 0.3):
    pred = perturb_predictions(gt, PerturbSpec(lateral_sigma=sigma, conf_sigma=0.1, seed=1))
    rep = map_eval({k: decode_tiles(v, 0.0) for k, v in pred.items()}, gt_segs)
    print(f"sigma={sigma:.2f}", {f"{t:.1f}": round(v, 3) for t, v in rep.ap.items()}, "mAP %.3f" % rep.map)

# plain arrays work too: rows are x1, y1, x2, y2[, conf]
print(map_eval({0: np.array([[0.05, 0, 0.05, 1.6, 0.9]])}, {0: np.array([[0, 0, 0, 1.6]])}).ap)
print(ScoredSegment((0, 0), (1, 1), 0.7))
