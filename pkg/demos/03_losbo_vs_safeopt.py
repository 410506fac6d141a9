"""
Safety from Lipschitz cones instead of confidence bands
=======================================================

SafeOpt certifies new inputs through the lower confidence bound, so its
safety is only as good as its beta.  LoSBO certifies them through the
observation itself, ``y - E - L d(x, x') >= h``, and keeps the GP only for
choosing where to look.  We follow one run of each, then a small campaign
that includes a SafeOpt whose norm bound is too small.
"""
import numpy as np

from safebo import LOSBO, SAFEOPT, BoundSpec, GPConfig, GridProblem, GridSafeBO, Kernel
from safebo.harness.campaign import build_instances, run_campaign
from safebo.harness.config import config_from_dict
from safebo.harness.problem import initial_interval

cfg = config_from_dict(dict(
    name="demo", seed=0, repetitions=20, iterations=20, functions=dict(count=4),
    algorithms=[
        {"type": "losbo"},
        {"type": "safeopt", "label": "real_beta",
         "bound": {"strategy": "abbasi_yadkori", "B": "true_norm", "R": "noise", "delta": 0.01}},
        {"type": "safeopt", "label": "norm_too_small",
         "bound": {"strategy": "abbasi_yadkori", "B": 2.5, "R": "noise", "delta": 0.01}},
    ],
))
inst = build_instances(cfg)[0]
print(f"target 0: h = {inst.threshold:.3f}, L = {inst.lipschitz:.1f}, f* = {inst.f_star:.3f}")

# one run of each variant with the same noise stream, from two starts in the
# interval around the peak where f >= h + E; at its edge f is barely above
# h + E, no neighbour can be certified and the run never starts
lo, hi = initial_interval(inst.grid_values, inst.threshold + inst.noise_margin)
for start in (lo, (lo + hi) // 2):
    print(f"start x0 = {inst.grid[start, 0]:.3f}, f(x0) - h = {inst.grid_values[start] - inst.threshold:.3f}")
    for variant, bound in ((LOSBO, BoundSpec("fixed", 2.0)),
                           (SAFEOPT, BoundSpec("abbasi_yadkori", B=10.0, R=0.01, delta=0.01))):
        noise = np.random.default_rng(7)
        oracle = lambda x: float(inst.target(np.atleast_2d(x))[0]) + noise.uniform(-0.01, 0.01)
        problem = GridProblem(inst.grid, oracle, inst.threshold, inst.lipschitz, (start,), inst.noise_margin)
        algo = GridSafeBO(problem, variant, bound,
                          GPConfig(Kernel("se", inst.target.kernel.length_scale), 0.01))
        sizes = []
        for _ in range(20):
            if algo.step() is None:
                break
            sizes.append(int(algo.safe.sum()))
        print(f"  {variant:8s} safe-set size per step: {sizes}")

# the campaign: only the misspecified SafeOpt may query unsafe inputs
result = run_campaign(cfg)
print(f"\n{'algorithm':15s} {'not started':>12s} {'violations':>11s} {'worst fn':>9s} {'final':>7s}")
for row in result.summary:
    print(f"{row['algorithm']:15s} {row['not_started_pct']:11.1f}% {row['violation_pct']:10.2f}% "
          f"{row['worst_case_violation_pct']:8.1f}% {row['final_performance_pct']:6.1f}%")
