import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrsf import StepFunction
from wrsf import stepfunction


def test_right_continuous_evaluation():
    f = StepFunction([1.0, 3.0], [0.5, 2.0])
    assert f(0.999) == 0.0
    assert f(1.0) == 0.5
    assert f(2.9) == 0.5
    assert f(3.0) == 2.0
    assert f(100.0) == 2.0
    assert f([0.0, 1.0, 3.0]).tolist() == [0.0, 0.5, 2.0]


def test_zero_function():
    z = StepFunction.zero()
    assert z(5.0) == 0.0
    assert len(z) == 0


def test_survival():
    f = StepFunction([1.0], [np.log(2.0)])
    assert f.survival(1.0) == pytest.approx(0.5)


@pytest.mark.parametrize(
    "knots, values",
    [([1, 1], [0, 1]), ([2, 1], [0, 1]), ([1, 2], [1, 0]), ([1], [-1]), ([1, 2], [1])],
)
def test_validation(knots, values):
    with pytest.raises(ValueError):
        StepFunction(knots, values)


def test_combine_on_union_knots():
    f = StepFunction([1.0, 3.0], [1.0, 2.0])
    g = StepFunction([2.0], [4.0])
    h = stepfunction.combine([f, g], [0.25, 0.75])
    assert h.knots.tolist() == [1.0, 2.0, 3.0]
    assert h.values.tolist() == [0.25, 0.25 + 3.0, 0.5 + 3.0]


def test_mean_matches_pointwise_average():
    f = StepFunction([1.0, 3.0], [1.0, 2.0])
    g = StepFunction([2.0], [4.0])
    m = stepfunction.mean([f, g])
    for t in [0.5, 1.0, 2.0, 2.5, 3.0, 9.0]:
        assert m(t) == pytest.approx((f(t) + g(t)) / 2)


@st.composite
def step_functions(draw):
    k = draw(st.integers(0, 6))
    knots = sorted(draw(st.sets(st.integers(0, 20), min_size=k, max_size=k)))
    inc = draw(st.lists(st.floats(0, 3), min_size=len(knots), max_size=len(knots)))
    return StepFunction(knots, np.cumsum(inc))


@settings(max_examples=60, deadline=None)
@given(st.lists(step_functions(), min_size=1, max_size=5))
def test_mean_is_nondecreasing_and_bounded(fs):
    m = stepfunction.mean(fs)
    assert np.all(np.diff(m.values) >= -1e-12)
    grid = np.linspace(-1, 21, 45)
    lo = np.min([f(grid) for f in fs], axis=0)
    hi = np.max([f(grid) for f in fs], axis=0)
    assert np.all(m(grid) >= lo - 1e-12) and np.all(m(grid) <= hi + 1e-12)
