"""
Safe optimization without a grid
================================

LoS-GP-UCB keeps a union of balls around past queries, each with radius
``(y - E - h) / L``, and maximizes ``mu + beta * sigma`` over that union by
projected gradient ascent.  The baseline samples uniformly from the same
certified region.  Both start from the same point and see the same noise.
"""
import numpy as np

from safebo.harness.benchmarks import gaussian10
from safebo.harness.campaign import per_step_statistics, run_campaign
from safebo.harness.config import config_from_dict

for name, steps in (("camelback2", 40), ("gaussian10", 40)):
    cfg = config_from_dict(dict(
        name=name, seed=0, repetitions=3, iterations=steps,
        functions=dict(source="benchmark", benchmark=name, count=1),
        algorithms=[{"type": "los_gp_ucb"}, {"type": "random_search"}],
    ))
    result = run_campaign(cfg)
    print(f"{name}: best value found (rescaled to [0, 1]) after k steps, mean of 3 runs")
    for label in ("los_gp_ucb", "random_search"):
        mean, _ = per_step_statistics(result.records, label)
        marks = [mean[k - 1] for k in (1, 10, 20, steps)]
        unsafe = sum(r.safety_violation_count for r in result.records if r.algorithm == label)
        print(f"  {label:14s} k=1: {marks[0]:.3f}  k=10: {marks[1]:.3f}  k=20: {marks[2]:.3f}  "
              f"k={steps}: {marks[3]:.3f}   unsafe queries: {unsafe}")

# the Gaussian10 start lies on the level set f = 0.4; the peak is at the origin
x0 = np.full(10, np.sqrt(-np.log(0.4) / 4) / np.sqrt(10))
print("\ngaussian10 at a start point:", round(float(gaussian10(x0)), 3), " at the origin:", gaussian10(np.zeros(10)))
