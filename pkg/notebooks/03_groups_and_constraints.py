"""
Tree groups and sampled constraints
===================================

Two ways to make the weight problem smaller: average trees within
contiguous groups and learn one weight per group, or keep only a random
subset of the comparison pairs. Both are run through the sweep helper with
a few repetitions on Veteran.
"""

import statistics

from wrsf.benchmark import ExperimentConfig, run_sweep

cfg = ExperimentConfig(trees=100, lambdas=(0.01, 1.0), reps=5, seed=0)


def show(axis, values):
    rows, _ = run_sweep(cfg, axis, values)
    print(f"\n{axis:>11s}   mean C RSF   mean C WRSF")
    for v in values:
        key = "all" if v == "all" else int(v)
        sel = [r for r in rows if r["value"] == key]
        rsf = statistics.fmean(r["c_rsf"] for r in sel)
        wrsf = statistics.fmean(r["c_wrsf"] for r in sel)
        print(f"{v:>11}   {rsf:10.4f}   {wrsf:11.4f}")


# G groups of Q/G trees; G=100 is the ungrouped forest
show("groups", ["5", "20", "50", "100"])

# K random training pairs; "all" is the full problem
show("constraints", ["50", "200", "1000", "all"])
