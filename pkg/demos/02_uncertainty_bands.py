"""
How wide must the confidence band be?
=====================================

A GP fitted to noisy samples of a norm-10 target gives a band
``mu +- beta * sigma``.  The common choice beta = 2 is a heuristic; the
self-normalized bound gives a beta that is valid with probability
``1 - delta`` once the RKHS norm and noise level are known.
"""
import numpy as np

from safebo import BoundSpec, Domain, GPConfig, Kernel, beta, fit, sample_se_onb
from safebo.harness.bound_check import BoundCheckConfig, heuristic_bound_violation_experiment

ell = 0.2 / np.sqrt(2.0)
rng = np.random.default_rng(3)
f = sample_se_onb(ell, Domain.interval(-2.0, 2.0), 40, 10.0, rng)

# 100 noisy samples on [0, 1]; the band is checked on the whole of [-2, 2]
x = rng.uniform(0.0, 1.0, (100, 1))
y = f(x) + rng.normal(0.0, 0.1, 100)
post = fit(GPConfig(Kernel("se", ell), 0.01), x, y)
grid = np.linspace(-2, 2, 1000)[:, None]
mu, sd = post.predict(grid, return_std=True)
err = np.abs(f(grid) - mu)

rigorous = beta(BoundSpec("abbasi_yadkori", B=10.0, R=0.1, delta=0.01), post)
for name, b in (("heuristic", 2.0), ("rigorous", rigorous)):
    miss = err > b * sd
    print(f"{name:9s} beta = {b:7.2f}: target outside the band at {miss.mean():6.1%} of the grid")

# where it fails: inside the data, or away from it?
inside = (grid[:, 0] >= 0) & (grid[:, 0] <= 1)
print("misses of beta=2 inside [0, 1]:", int((err > 2 * sd)[inside].sum()),
      " outside:", int((err > 2 * sd)[~inside].sum()))

# repeated over functions and data sets (reduced scale)
cfg = BoundCheckConfig(num_functions=4, num_datasets=20, seed=1)
res = heuristic_bound_violation_experiment(cfg)
print(f"data sets whose band misses the target somewhere: {res.fraction:.0%} "
      f"(per function {res.per_function_counts.tolist()} of {cfg.num_datasets})")
