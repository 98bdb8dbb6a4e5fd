# The whole loop: generate, perturb, evaluate, cluster, score lanes.
import json
import tempfile
from pathlib import Path

from lanekit.pipeline import run_pipeline

config = {
    "seed": 5,
    "count": 50,
    "perturb": {"lateral_sigma": 0.1, "conf_sigma": 0.2, "dropout": 0.05, "spurious_rate": 1.0, "seed": 1},
}

with tempfile.TemporaryDirectory() as d:
    res = run_pipeline(config, d, threads=4)
    print(res.code, res.message)
    print(sorted(p.name for p in res.files))
    print(json.loads((Path(d) / "seg_report.json").read_text()))
    print(json.loads((Path(d) / "lane_report.json").read_text()))

# a broken config fails in its stage, with exit code 1
print(run_pipeline({"seed": 1, "count": -3}, tempfile.mkdtemp()).message)
