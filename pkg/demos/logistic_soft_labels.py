"""Summarizing labelled data for a Bayesian logistic regression.

One coreset is built on the features. Each site carries the fraction of
positive labels among the rows in its cell; because the Bernoulli
log-likelihood is linear in the label, the site then stands in for the
average likelihood of its cell. The Laplace posterior from the summary,
with the likelihood scaled up to the full data size, is compared with the
full-data posterior by KL divergence.

    python demos/logistic_soft_labels.py [n] [seed]
"""

import sys

import numpy as np

from wcoresets.experiments import logreg_data, summarize
from wcoresets.tasks import gaussian_kl, laplace_posterior

n = int(sys.argv[1]) if len(sys.argv) > 1 else 30
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
data = logreg_data(seed)
mu, cov = laplace_posterior(data.X, data.labels.astype(float))
print(f"{data.X.shape[0]} rows, positive rate {data.labels.mean():.3f}, posterior mean {np.round(mu, 3)}")

for method in ("w1", "w2", "uniform", "herding"):
    S, soft = summarize(method, data.X, n, seed, data.labels, "soft")
    m, c = laplace_posterior(S, soft, scale=data.X.shape[0] / n)
    print(f"{method:>8}: KL {gaussian_kl(m, c, mu, cov):10.2f}   posterior mean {np.round(m, 3)}")
