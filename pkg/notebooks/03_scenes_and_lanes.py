# Synthetic roads, lane images and lane clustering.
from pathlib import Path

from lanekit import SceneConfig, TopViewGrid, cluster_tiles, generate_scene, lane_point_metric, scene_to_labels
from lanekit.io import write_image

out = Path(__file__).parent / "out"
out.mkdir(exist_ok=True)
grid = TopViewGrid()

scene = generate_scene(7)
print(scene.params["lane_count"], "lanes, curvature %.4f 1/m" % scene.params["curvature"])
tiles, img = scene_to_labels(scene, grid)
write_image(out / "lane_image.png", img)
print(len(tiles), "occupied tiles")

clusters = cluster_tiles(tiles)
print(len(clusters), "clusters for", len(scene.lanes), "delimiters")
for c in clusters:
    print(len(c), "tiles, rows", c.first_row, "->", c.last_row)

lanes = [c.polyline() for c in clusters]
print("point accuracy:", lane_point_metric(lanes, [l.points for l in scene.lanes], 0.5, grid))

# the ranges are configurable: a gentle curve with two lanes
cfg = SceneConfig(lane_count_range=(2, 2), curvature_range=(0.01, 0.012))
s2 = generate_scene(3, cfg)
print([len(l.points) for l in s2.lanes])
