"""lanekit: top-view lane geometry, tile codec, synthetic scenes and lane evaluation."""
from .camera import (
    CameraModel,
    Homography,
    TopViewGrid,
    build_ipm,
    ground_to_image,
    image_to_ground,
    make_oriented_view,
    warp_to_topview,
)
from .clustering import LaneCluster, affinity, cluster_tiles, lane_point_metric, row_nms
from .geometry import LanePolyline, ScoredSegment, Segment
from .image_ops import grad, masked_l1, reconstruction_mask
from .moments import SampleSet, cmd, flatten_feature_map
from .perturb import PerturbSpec, perturb_predictions
from .scenes import Scene, SceneConfig, generate_dataset, generate_scene, scene_to_labels
from .segment_eval import (
    MapReport,
    Matching,
    PRCurve,
    average_precision,
    hungarian,
    map_eval,
    match_segments,
    pr_curve,
    seg_dist,
)
from .tiles import TileEntry, TileMap, decode_tiles, encode_tiles, render_lane_image

__version__ = "0.1.0"
