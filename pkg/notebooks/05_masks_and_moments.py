# Reconstruction masks, gradient images and central moment discrepancy.
import numpy as np

from lanekit import TopViewGrid, cmd, flatten_feature_map, generate_scene, grad, masked_l1, reconstruction_mask
from lanekit import scene_to_labels

grid = TopViewGrid()
_, lane = scene_to_labels(generate_scene(2), grid)

# the hull of the lane pixels, dilated by 2 m, minus a vehicle box
mask = reconstruction_mask(lane, [{"x0": 40, "y0": 150, "x1": 80, "y1": 200}], dilation_m=2.0)
print("mask covers %.1f%% of the raster" % (100 * mask.mean()))

g = grad(lane)
noisy = g + np.random.default_rng(0).normal(0, 0.05, g.shape)
print("masked L1:", masked_l1(noisy, g, mask), "unmasked:", np.abs(noisy - g).sum())

# CMD between two feature maps flattened to (H*W, C) samples in [0, 1]
rng = np.random.default_rng(1)
fs = flatten_feature_map(rng.random((8, 20, 20)))
ft = flatten_feature_map(rng.random((8, 20, 20)) ** 2)
print("same:", cmd(fs, fs), "shifted:", cmd(fs, ft, order=5))
print(cmd(np.array([[0.0], [1.0]]), np.array([[0.5], [0.5]]), 2, (0, 1)))
