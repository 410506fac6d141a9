"""
Kernels and target functions with a known RKHS norm
===================================================

Draw a few targets from the squared-exponential RKHS, check their norm and
look at how steep they are.  The steepness decides how far a single safe
observation can certify its neighbourhood later on.
"""
import numpy as np

from safebo import Domain, Kernel, sample_pre_rkhs, sample_se_onb
from safebo.harness.problem import compute_threshold, estimate_lipschitz

ell = 0.2 / np.sqrt(2.0)
domain = Domain.interval(-2.0, 2.0)
rng = np.random.default_rng(0)

# kernel values fall off with distance; the Matern kernel has heavier tails
r = np.array([0.0, 0.5, 1.0, 2.0]) * ell
for family in ("se", "matern32"):
    k = Kernel(family, ell)
    print(f"{family:9s}", np.round(k.from_distance(r), 4))

# targets built from the orthonormal basis: the norm is exact by construction
f = sample_se_onb(ell, domain, num_terms=40, target_norm=10.0, rng_seed=rng)
print("ONB target, RKHS norm:", f.rkhs_norm)

# pre-RKHS targets: finite kernel expansions, norm from the Gram matrix
g = sample_pre_rkhs(Kernel("matern32", ell), domain, num_centers=30, target_norm=10.0, rng_seed=rng)
print("pre-RKHS target, RKHS norm:", round(g.rkhs_norm, 12))

# the minimum-norm interpolant of f on a grid can never have a larger norm
x = domain.grid(200)
K = Kernel("se", ell)(x) + 1e-10 * np.eye(len(x))
y = f(x)
print("interpolant norm:", round(float(np.sqrt(y @ np.linalg.solve(K, y))), 4), "<=", f.rkhs_norm)

# Lipschitz bound (1.1 x max slope on a fine grid) and safety threshold
for name, target in (("ONB", f), ("pre-RKHS", g)):
    L = estimate_lipschitz(target, domain)
    h = compute_threshold(target, domain)
    print(f"{name:9s} L = {L:7.2f}  h = {h:6.3f}  range = [{target(x).min():.2f}, {target(x).max():.2f}]")
