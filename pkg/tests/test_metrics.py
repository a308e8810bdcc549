import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import c_index_oracle, random_dataset
from wrsf import StepFunction, SurvivalDataset, c_index, c_index_of_weights, ensemble_chf, fit_forest
from wrsf.metrics import event_grid


def test_hand_example():
    # pairs (0,1) (0,2) (0,3) (2,3); values tie on (0,1)
    ds = SurvivalDataset(np.zeros((4, 1)), [1, 2, 2, 3], [1, 0, 1, 1])
    r = c_index(np.array([0.5, 0.5, 1.0, 0.9]), ds)
    assert (r.concordant, r.admissible) == (2, 4)
    assert r.c_index == 0.5
    assert r.pair_policy == "strict"


def test_step_function_predictions_use_own_time():
    ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 3.0], [1, 0])
    f = StepFunction([2.0], [1.0])
    # H(1)=0 for the early death and H(3)=1 for the later sample
    r = c_index([f, f], ds)
    assert r.concordant == 1


def test_grid_policy_sums_over_grid():
    ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 3.0], [1, 0])
    low = StepFunction([1.0], [0.1])
    high = StepFunction([1.0], [0.5])
    r = c_index([low, high], ds, policy="grid", grid=[1.0, 2.0])
    assert r.concordant == 1
    assert r.time_policy == "grid"
    with pytest.raises(ValueError, match="grid"):
        c_index([low, high], ds, policy="grid")


def test_no_pairs():
    ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 1.0], [1, 1])
    with pytest.raises(ValueError, match="no admissible pairs"):
        c_index(np.array([0.0, 1.0]), ds)


def test_unknown_policy():
    ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 2.0], [1, 1])
    with pytest.raises(ValueError, match="time policy"):
        c_index([StepFunction.zero()] * 2, ds, policy="median")


def test_length_mismatch():
    ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 2.0], [1, 1])
    with pytest.raises(ValueError):
        c_index(np.zeros(3), ds)


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 20)
    values = rng.integers(0, 5, size=20).astype(float)
    r = c_index(values, ds)
    conc, M = c_index_oracle(values.tolist(), ds.time.tolist(), ds.event.tolist())
    assert (r.concordant, r.admissible) == (conc, M)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_perfect_and_reversed_rankings(data):
    n = data.draw(st.integers(3, 15))
    t = data.draw(st.lists(st.floats(0.1, 10), min_size=n, max_size=n, unique=True))
    e = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    if not any(e[i] and t[i] < max(t) for i in range(n)):
        e[int(np.argmin(t))] = True
    ds = SurvivalDataset(np.zeros((n, 1)), t, e)
    # hazard increasing in time puts every early death below the later sample
    assert c_index(np.array(t), ds).c_index == 1.0
    assert c_index(-np.array(t), ds).c_index == 0.0


def test_forest_predictions_beat_chance_on_simulated_data():
    from wrsf.dataset import simulate_proportional_hazards, train_test_split

    ds = simulate_proportional_hazards(n=300, m=3, seed=2)
    train, test = train_test_split(ds, 0.75, seed=0)
    f = fit_forest(train, n_trees=20, seed=0)
    preds = [ensemble_chf(f, x) for x in test.X]
    # the sample policy with literal orientation, and the grid policy
    # giving one minus the usual risk-score concordance
    grid = event_grid(train)
    grid_c = c_index(preds, test, policy="grid", grid=grid).c_index
    assert grid_c < 0.35
    risk = np.array([float(np.sum(p(grid))) for p in preds])
    usual, M = c_index_oracle((-risk).tolist(), test.time.tolist(), test.event.tolist())
    assert grid_c == pytest.approx(1 - usual / M)
    assert c_index(preds, test).c_index > 0.5


def test_c_index_of_weights():
    D = np.array([[-1.0, 1.0], [2.0, -3.0], [-1.0, -1.0]])
    # D @ w = (0, -0.5, -1): the zero row is a tie and counts nothing
    assert c_index_of_weights(D, [0.5, 0.5]) == pytest.approx(2 / 3)
    assert c_index_of_weights(D, [1.0, 0.0]) == pytest.approx(2 / 3)
    assert c_index_of_weights(D, [0.1, 0.9]) == pytest.approx(2 / 3)
    assert c_index_of_weights(D[:2], [0.5, 0.5]) == pytest.approx(1 / 2)


def test_uniform_weights_match_ensemble_c_index():
    from wrsf import admissible_pairs
    from wrsf.dataset import simulate_proportional_hazards
    from wrsf.weights import build_pair_differences, uniform_weights

    ds = simulate_proportional_hazards(n=40, m=3, seed=8)
    f = fit_forest(ds, n_trees=6, seed=0)
    D = build_pair_differences(f, ds, admissible_pairs(ds)).matrix
    preds = [ensemble_chf(f, x) for x in ds.X]
    assert c_index_of_weights(D, uniform_weights(6)) == pytest.approx(c_index(preds, ds).c_index, abs=1e-12)


def test_c_index_of_weights_edge_and_loop():
    assert c_index_of_weights(np.zeros((4, 3)), [0.2, 0.3, 0.5]) == 0.0
    rng = np.random.default_rng(1)
    D = rng.normal(size=(25, 4))
    w = rng.dirichlet(np.ones(4))
    count = 0
    for row in D:
        s = 0.0
        for d, wq in zip(row, w):
            s += wq * -d
        count += s > 0
    assert c_index_of_weights(D, w) == count / 25


def test_forest_predictions_match_double_loop():
    from oracles import evaluate_tree_oracle

    rng = np.random.default_rng(12)
    ds = random_dataset(rng, 20, ties=False)
    f = fit_forest(ds, n_trees=5, seed=1, min_unique_deaths=1)
    preds = [ensemble_chf(f, x) for x in ds.X]
    values = [np.mean([evaluate_tree_oracle(t, x, T) for t in f.trees]) for x, T in zip(ds.X, ds.time)]
    conc, M = c_index_oracle(values, ds.time.tolist(), ds.event.tolist())
    r = c_index(preds, ds)
    assert (r.concordant, r.admissible) == (conc, M)
