"""Write a labeled CSV, then drive the experiment harness through the command line."""
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

from ocquant.cli import main

rng = np.random.default_rng(0)
work = Path(tempfile.mkdtemp(prefix="ocquant-demo-"))

with (work / "data.csv").open("w") as fh:
    fh.write("x1,x2,label,kind\n")
    for row in rng.normal(0.0, 1.0, (1000, 2)):
        fh.write(f"{row[0]:.6f},{row[1]:.6f},pos,\n")
    for i, row in enumerate(rng.normal(0.0, 1.0, (1000, 2))):
        kind, shift = ("near", 2.5) if i % 2 else ("far", 6.0)
        fh.write(f"{row[0] + shift:.6f},{row[1]:.6f},neg,{kind}\n")

config = {
    "dataset": {"path": "data.csv", "label": "label", "positive": "pos", "subclass": "kind"},
    "experiment": int(sys.argv[1]) if len(sys.argv) > 1 else 1,
    "algorithms": ["pat", "odin", "tice", "extice", "cc-fixed", "bft", "ensemble-min"],
    "repetitions": 1,
    "seed": 7,
    "workers": 1,
    "output_dir": "out",
}
(work / "run.json").write_text(json.dumps(config, indent=2))

main(["validate", str(work / "data.csv"), "--label", "label", "--positive", "pos", "--subclass", "kind"])
main(["bench", "--config", str(work / "run.json")])
print(sorted(p.name for p in (work / "out").iterdir()))
