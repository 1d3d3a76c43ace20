"""With n = k the W2 coreset is a balanced k-means solution.

On an equal mixture of four well-separated Gaussians the sites settle on the
component means and every Voronoi cell holds a quarter of the mass. Minibatch
noise keeps the sites jittering at the scale of the sampling error of a cell
barycenter.

    python demos/balanced_kmeans.py [seed]
"""

import sys

import numpy as np

from wcoresets import SolverConfig, SyntheticSampler, assign, build_coreset, lloyd
from wcoresets.experiments import four_wells

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
spec = four_wells()
sampler = SyntheticSampler(spec, seed)
res = build_coreset(sampler, SolverConfig(n=4, seed=seed, keep_history=True))

print("sites:\n", np.round(res.points, 3))
test = sampler.spawn(99).draw(100_000)
print("cell masses:", np.round(assign(test, res.points, None, 2).fractions, 4))
path = res.trace.sites
moves = [np.abs(b - a).max() for a, b in zip(path, path[1:])]
print("largest site move, first and last iterations:", np.round(moves[:3], 4), np.round(moves[-3:], 6))

# single k-means++ starts of Lloyd for comparison
X = sampler.spawn(7).draw(4000)
split = 0
for s in range(20):
    centers = lloyd(X, 4, s, restarts=1)[0]
    split += np.abs(assign(test, centers, None, 2).fractions - 0.25).max() > 0.025
print(f"\nsingle-start Lloyd runs with a cell off by more than 10%: {split}/20")
