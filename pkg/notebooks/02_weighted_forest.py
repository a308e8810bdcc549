"""
Training tree weights on Veteran
================================

Fit a forest on three quarters of the data, train simplex weights on the
training pairs, and compare test concordance of the plain and the weighted
forest. Then look at how the weights spread over trees.
"""

import numpy as np

from wrsf import admissible_pairs, fit_forest, load_veteran, train_test_split
from wrsf.metrics import c_index
from wrsf.weights import build_pair_differences, combine_values, optimize_weights_qp, source_matrix

ds = load_veteran()
train, test = train_test_split(ds, 0.75, seed=1)
forest = fit_forest(train, n_trees=100, seed=1)
print(f"train {train.n} / test {test.n} patients, {forest.n_trees} trees")

# V[i, q] is tree q's cumulative hazard for patient i at the patient's own time
V_train = source_matrix(forest, train)
V_test = source_matrix(forest, test)
pairs = admissible_pairs(train)
D = build_pair_differences(forest, train, pairs, values=V_train)
print(f"{len(pairs)} admissible training pairs")

c_rsf = c_index(combine_values(V_test), test).c_index
print(f"\nRSF   test C = {c_rsf:.4f}")
for lam in (0.001, 0.01, 0.1, 1.0, 10.0):
    sol = optimize_weights_qp(D, lam)
    c = c_index(combine_values(V_test, sol.weights), test).c_index
    nonzero = np.sum(sol.weights > 1e-6)
    print(f"WRSF  test C = {c:.4f}  lambda={lam:<6} objective={sol.objective:9.3f}  trees used={nonzero}")

# %%
# Weights sorted in decreasing order. The hinge term sums over thousands of
# pairs, so the lambdas above hardly move the solution; the ridge term only
# pulls the weights towards uniform once lambda is of the order of the pair
# count.
for lam in (0.01, 1e3, 1e5):
    sol = optimize_weights_qp(D, lam)
    w = np.sort(sol.weights)[::-1]
    c = c_index(combine_values(V_test, sol.weights), test).c_index
    print(f"\nlambda={lam:g}: top weights {np.round(w[:6], 3)}  max/uniform={w[0] * forest.n_trees:.1f}  test C={c:.4f}")
