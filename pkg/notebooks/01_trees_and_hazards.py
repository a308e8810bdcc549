"""
Survival trees and cumulative hazards
=====================================

A tour of the building blocks: the Nelson-Aalen estimate stored in each
leaf, the log-rank split statistic, and one grown tree.
"""

import numpy as np

from wrsf import grow_tree, load_veteran
from wrsf.tree import log_rank_statistic, nelson_aalen

# three patients: deaths at t=1 and t=2, the third censored at t=3
est = nelson_aalen([1.0, 2.0, 3.0], [True, True, False])
print("H(1) =", est.chf(1.0), " H(2) =", est.chf(2.0))
print("S(2) =", est.chf.survival(2.0))

# the log-rank statistic of a split that separates early from late deaths
t = [1.0, 2.0, 3.0, 4.0]
e = [True] * 4
x = [0.0, 0.0, 1.0, 1.0]
print("L(x, 0.5) =", log_rank_statistic(t, e, x, 0.5), "=", 7 / np.sqrt(17))

# %%
# A tree on the Veteran lung cancer data. Karnofsky score is usually the
# first split: low scores go left and carry a much higher hazard.
ds = load_veteran()
tree = grow_tree(ds, seed=0, mtry=ds.m)
print(f"\n{tree.node_count} nodes, {tree.leaf_count} leaves")
root = tree.feature[0]
print(f"root split: {ds.feature_names[root]} <= {tree.threshold[0]}")

leaves = tree.apply_leaves(ds.X)
goes_left = ds.X[:, root] <= tree.threshold[0]
for name, rows in (("left", goes_left), ("right", ~goes_left)):
    mean_h = np.mean([tree.leaves[leaf].chf(100.0) for leaf in leaves[rows]])
    print(f"  {name:5s} daughter: {rows.sum():3d} patients, mean H(100 days) = {mean_h:.2f}")
