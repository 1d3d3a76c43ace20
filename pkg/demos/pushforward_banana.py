"""Coresets travel through maps.

A W2 coreset of the standard Gaussian, pushed through (x, y) -> (x, x^2 + y),
is compared with a coreset built directly on the banana-shaped image and with
a uniform sample of the banana. For the Lipschitz map x -> 3x the distance
scales by exactly 3, up to Monte Carlo error.

    python demos/pushforward_banana.py [n] [seeds]
"""

import sys

import numpy as np

from wcoresets import SiteSet, SolverConfig, SyntheticSampler, SyntheticSpec, build_coreset, stochastic_wp
from wcoresets.measures import PushforwardSampler, banana_map

n = int(sys.argv[1]) if len(sys.argv) > 1 else 50
seeds = range(int(sys.argv[2]) if len(sys.argv) > 2 else 5)
gauss, banana = SyntheticSpec.gaussian(np.zeros(2)), SyntheticSpec.banana()

rows = []
for seed in seeds:
    base = build_coreset(SyntheticSampler(gauss, seed), SolverConfig(n=n, seed=seed)).points
    direct = build_coreset(SyntheticSampler(banana, seed), SolverConfig(n=n, seed=seed)).points
    sample = SyntheticSampler(banana, seed, stream=5).draw(n)
    target = SyntheticSampler(banana, seed, stream=77)
    w = [stochastic_wp(target, SiteSet(S), 2, M=20_000).value for S in (banana_map(base), direct, sample)]

    w_base = stochastic_wp(SyntheticSampler(gauss, seed, stream=88), SiteSet(base), 2, M=20_000)
    tripled = PushforwardSampler(SyntheticSampler(gauss, seed, stream=89), lambda z: 3 * z)
    w_scaled = stochastic_wp(tripled, SiteSet(3 * base), 2, M=20_000)
    rows.append(w + [w_scaled.value / w_base.value])
    print(f"seed {seed}: mapped {w[0]:.4f}  direct {w[1]:.4f}  uniform {w[2]:.4f}  scaling ratio {rows[-1][3]:.4f}")

mean = np.mean(rows, axis=0)
print(f"\nmean W2 to the banana: mapped coreset {mean[0]:.4f}, direct coreset {mean[1]:.4f}, uniform {mean[2]:.4f}")
print(f"mean W2(3S, 3mu) / W2(S, mu) = {mean[3]:.4f}")
