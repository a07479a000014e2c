"""The same experiment driven entirely through the command-line surface.

Every stage exchanges files in one working directory: the phantom writer,
the retrospective sampler, the reconstruction, and the evaluator.  Useful
as a template for scripted parameter studies; `motioncs experiment` does
the full solver-by-rate sweep in one call.
"""

import csv
import tempfile
from pathlib import Path

from motioncs.cli import main

work = Path(tempfile.mkdtemp(prefix="motioncs_demo_"))
print(f"working directory: {work}\n")

steps = [
    ["phantom", "--out", str(work)],
    ["sample", "--out", str(work), "--rate", "8", "--seed", "16"],
    ["reconstruct", "--out", str(work), "--solver", "motion_tv", "--iters", "60"],
    ["evaluate", "--out", str(work)],
    ["export-pgm", str(work / "x_hat.csq"), "4", str(work / "x_hat_frame4.pgm")],
]
for argv in steps:
    print(f"$ motioncs {' '.join(argv)}")
    code = main(argv)
    if code != 0:
        raise SystemExit(f"step failed with exit code {code}")
    print()

with open(work / "report.csv") as f:
    rows = list(csv.reader(f))
print("report.csv:")
for row in rows:
    print("  " + ",".join(row))

print(f"\nfiles: {sorted(p.name for p in work.iterdir())}")
