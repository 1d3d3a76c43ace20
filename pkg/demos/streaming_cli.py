"""The command-line workflow on a CSV stream.

Writes 5000 rows of a two-cluster dataset, streams them through
``wcoresets build`` with a checkpoint, evaluates the result against the file,
replays the run from its manifest and checks that the artifacts match.

    python demos/streaming_cli.py [workdir]
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from wcoresets.io import read_json

work = Path(sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="wcoresets-"))
work.mkdir(parents=True, exist_ok=True)
rng = np.random.default_rng(0)
X = np.vstack([rng.normal(-3, 1, (2500, 2)), rng.normal(3, 0.5, (2500, 2))])[rng.permutation(5000)]
np.savetxt(work / "data.csv", X, delimiter=",")


def wcoresets(*args, stdin=None):
    cmd = [sys.executable, "-m", "wcoresets", *map(str, args)]
    print("$", " ".join(cmd[2:]))
    res = subprocess.run(cmd, stdin=stdin, capture_output=True, text=True)
    print(res.stdout.strip() or res.stderr.strip())
    return res.returncode


with open(work / "data.csv") as fh:
    wcoresets("build", "--metric", "w2", "--n", 20, "--input", "-", "--minibatch", 100, "--iters", 40,
              "--checkpoint", work / "state.json", "--out", work / "build", stdin=fh)
trace = read_json(work / "build/trace.json")
print(f"rows read from the stream: {trace['rows_consumed']} (budget {100 * 40 + 20})")

wcoresets("eval", "--coreset", work / "build/coreset.csv", "--input", work / "data.csv",
          "--samples", 20000, "--epsilon", 1.0, "--out", work / "eval")
wcoresets("check", "--coreset", work / "build/coreset.csv", "--input", work / "data.csv")

# replay needs the same stdin, so replay the eval run instead
wcoresets("replay", work / "eval/manifest.json", "--out", work / "eval2")
same = read_json(work / "eval/manifest.json")["files"] == read_json(work / "eval2/manifest.json")["files"]
print("replayed eval artifacts identical:", same)
