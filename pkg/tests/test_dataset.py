import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrsf import SurvivalDataset, admissible_pairs, bootstrap_sample, load_csv, train_test_split
from wrsf.dataset import SchemaError, simulate_proportional_hazards, split_indices


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadCsv:
    def test_veteran_shape(self, veteran):
        assert veteran.n == 137
        assert veteran.m == 6
        assert int(veteran.event.sum()) == 128
        assert veteran.feature_names == ("trt", "celltype", "karno", "diagtime", "age", "prior")
        kinds = dict(zip(veteran.feature_names, veteran.feature_kinds))
        assert kinds["celltype"] == "encoded-categorical"
        assert kinds["karno"] == "numeric"
        assert len(veteran.categories["celltype"]) == 4

    def test_categorical_codes_follow_first_appearance(self, tmp_path):
        p = write(tmp_path, "time,status,g\n1,1,b\n2,0,a\n3,1,b\n")
        ds = load_csv(p)
        assert ds.X[:, 0].tolist() == [0.0, 1.0, 0.0]
        assert ds.categories["g"] == ("b", "a")

    def test_event_spellings(self, tmp_path):
        p = write(tmp_path, "time,status,x\n1,true,0\n2,F,1\n3,yes,2\n4,0,3\n")
        assert load_csv(p).event.tolist() == [True, False, True, False]

    def test_feature_selection(self, tmp_path):
        p = write(tmp_path, "t,e,a,b\n1,1,5,6\n2,0,7,8\n")
        ds = load_csv(p, time="t", event="e", features=["b"])
        assert ds.feature_names == ("b",)
        assert ds.X[:, 0].tolist() == [6.0, 8.0]

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.csv"):
            load_csv(tmp_path / "nope.csv")

    def test_missing_column(self, tmp_path):
        p = write(tmp_path, "time,x\n1,2\n")
        with pytest.raises(SchemaError, match="status"):
            load_csv(p)

    def test_missing_cell_reports_row_and_column(self, tmp_path):
        p = write(tmp_path, "time,status,x\n1,1,2\n2,,3\n")
        with pytest.raises(SchemaError, match=r"row 3, column 'status'"):
            load_csv(p)

    def test_bad_event_value(self, tmp_path):
        p = write(tmp_path, "time,status,x\n1,2,2\n")
        with pytest.raises(SchemaError, match="event indicator"):
            load_csv(p)

    def test_unparsable_time(self, tmp_path):
        p = write(tmp_path, "time,status,x\nabc,1,2\n")
        with pytest.raises(SchemaError, match="cannot parse"):
            load_csv(p)

    def test_negative_time(self, tmp_path):
        p = write(tmp_path, "time,status,x\n1,1,2\n-1,0,3\n")
        with pytest.raises(ValueError, match="negative time"):
            load_csv(p)


class TestDataset:
    def test_arrays_are_read_only(self, small_ds):
        with pytest.raises(ValueError):
            small_ds.time[0] = 1.0

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            SurvivalDataset(np.zeros((3, 2)), [1, 2], [1, 0, 1])

    def test_rejects_bad_events(self):
        with pytest.raises(ValueError):
            SurvivalDataset(np.zeros((2, 1)), [1, 2], [1, 2])

    def test_subset_keeps_metadata(self, veteran):
        sub = veteran.subset([0, 5, 9])
        assert sub.n == 3
        assert sub.feature_names == veteran.feature_names
        assert sub.time.tolist() == [veteran.time[0], veteran.time[5], veteran.time[9]]

    def test_sample_access(self, small_ds):
        s = small_ds[4]
        assert s.time == small_ds.time[4]
        assert s.event == small_ds.event[4]
        assert len(small_ds.samples) == small_ds.n


class TestSplits:
    def test_split_sizes_and_disjointness(self):
        tr, te = split_indices(137, 0.75, seed=5)
        assert tr.size == 103 and te.size == 34
        assert np.intersect1d(tr, te).size == 0
        assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(137))

    def test_split_is_seeded(self):
        a = split_indices(50, 0.75, seed=1)
        b = split_indices(50, 0.75, seed=1)
        c = split_indices(50, 0.75, seed=2)
        assert np.array_equal(a[0], b[0])
        assert not np.array_equal(a[0], c[0])

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            split_indices(10, 1.0)
        with pytest.raises(ValueError):
            split_indices(3, 0.9)

    def test_train_test_split_datasets(self, veteran):
        train, test = train_test_split(veteran, 0.75, seed=0)
        assert train.n + test.n == veteran.n


class TestBootstrap:
    def test_in_bag_and_oob_partition(self):
        in_bag, oob = bootstrap_sample(100, seed=4)
        assert in_bag.size == 100
        assert np.all(np.diff(in_bag) >= 0)
        assert np.intersect1d(np.unique(in_bag), oob).size == 0
        assert np.unique(in_bag).size + oob.size == 100

    def test_accepts_dataset(self, small_ds):
        in_bag, _ = bootstrap_sample(small_ds, seed=0)
        assert in_bag.size == small_ds.n

    def test_empty(self):
        with pytest.raises(ValueError):
            bootstrap_sample(0)


class TestPairs:
    def test_hand_example(self):
        # times 1(e) 2(c) 2(e) 3(e): (0,1) (0,2) (0,3) (2,3); ties never compare
        ds = SurvivalDataset(np.zeros((4, 1)), [1, 2, 2, 3], [1, 0, 1, 1])
        pairs = admissible_pairs(ds)
        assert pairs.pairs.tolist() == [[0, 1], [0, 2], [0, 3], [2, 3]]
        assert pairs.total == 4

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 5), st.booleans()), min_size=1, max_size=15))
    def test_pair_definition(self, rows):
        t = [r[0] for r in rows]
        e = [r[1] for r in rows]
        ds = SurvivalDataset(np.zeros((len(rows), 1)), t, e)
        got = {tuple(p) for p in admissible_pairs(ds).pairs.tolist()}
        want = {(i, j) for i in range(len(t)) for j in range(len(t)) if e[i] and t[i] < t[j]}
        assert got == want


def test_simulator_censoring_rate_and_ordering():
    ds = simulate_proportional_hazards(n=4000, m=3, censoring_rate=0.3, seed=1)
    assert 0.25 < 1 - ds.event.mean() < 0.35
    # higher first feature means shorter times
    assert np.corrcoef(ds.X[:, 0], np.log(ds.time))[0, 1] < -0.3


class TestSmallCases:
    def test_three_row_file(self, tmp_path):
        p = write(tmp_path, "age,time,status\n61,5,1\n70,8,0\n55,9,1\n")
        ds = load_csv(p)
        assert (ds.n, ds.m) == (3, 1)
        assert ds.event.tolist() == [True, False, True]

    def test_split_of_100(self):
        tr, te = split_indices(100, 0.75, seed=9)
        assert (tr.size, te.size) == (75, 25)

    def test_split_of_4_repeats(self):
        a = split_indices(4, 0.5, seed=3)
        b = split_indices(4, 0.5, seed=3)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_split_with_empty_test_part(self):
        with pytest.raises(ValueError):
            split_indices(2, 0.999)

    def test_bootstrap_of_one(self):
        in_bag, oob = bootstrap_sample(1, seed=12)
        assert in_bag.tolist() == [0] and oob.size == 0

    def test_bootstrap_repeats(self):
        assert np.array_equal(bootstrap_sample(30, seed=2)[0], bootstrap_sample(30, seed=2)[0])

    @pytest.mark.parametrize(
        "event, expected",
        [([1, 0], [[0, 1]]), ([0, 1], []), ([0, 0], [])],
    )
    def test_two_sample_pairs(self, event, expected):
        ds = SurvivalDataset(np.zeros((2, 1)), [1.0, 2.0], event)
        assert admissible_pairs(ds).pairs.tolist() == expected
