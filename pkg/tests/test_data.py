import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimn import Bag, Dataset, DataFormatError, MimnError, SynthParams, kfold_split
from mimn import parse_mil_csv, synthesize, write_mil_csv
from mimn.data import kfold_indices


class TestParse:
    def test_two_rows_one_bag(self):
        ds = parse_mil_csv("b1,1,0.5,0.2\nb1,1,0.1,0.9\n")
        assert len(ds) == 1
        bag = ds.bags[0]
        assert bag.id == "b1" and bag.label == 1
        np.testing.assert_array_equal(bag.instances, [[0.5, 0.2], [0.1, 0.9]])

    def test_inconsistent_label(self):
        with pytest.raises(DataFormatError, match="inconsistent bag label at line 2"):
            parse_mil_csv("b1,1,0.5\nb1,-1,0.3\n")

    def test_header_skipped(self):
        ds = parse_mil_csv("bag_id,label,f1,f2\nb,-1,1,2\n")
        assert ds.dim == 2 and ds.bags[0].label == -1

    def test_interleaved_bags_keep_first_seen_order(self):
        ds = parse_mil_csv("a,1,1\nb,-1,2\na,1,3\n")
        assert [b.id for b in ds] == ["a", "b"]
        np.testing.assert_array_equal(ds.bags[0].instances.ravel(), [1, 3])

    def test_crlf(self):
        assert len(parse_mil_csv("a,1,1\r\nb,-1,2\r\n")) == 2

    @pytest.mark.parametrize("text,msg", [
        ("", "empty"),
        ("a,1,1\n\nb,-1,2\n", "blank line at line 2"),
        ("a,1,1,2\na,1,3\n", "ragged row"),
        ("a,0,1\n", "label must be -1 or 1"),
        ("a,yes,1\n", "not a number at line 1"),
        ("a,1,1\na,1,x\n", "non-numeric feature at line 2"),
        ("a,1,nan\n", "non-finite"),
        ("a,1\n", "expected bag_id,label,features at line 1"),
    ])
    def test_errors(self, text, msg):
        with pytest.raises(DataFormatError, match=msg):
            parse_mil_csv(text)

    def test_round_trip(self):
        ds = synthesize(SynthParams(3, 4, 5, 3), seed=9)
        back = parse_mil_csv(write_mil_csv(ds))
        assert [b.id for b in back] == [b.id for b in ds]
        for a, b in zip(ds, back):
            assert a.label == b.label
            np.testing.assert_array_equal(a.instances, b.instances)

    def test_round_trip_with_header(self):
        ds = synthesize(SynthParams(2, 2, 3, 2), seed=1)
        text = write_mil_csv(ds, header=True)
        assert text.startswith("bag_id,label,f1,f2\n")
        assert len(parse_mil_csv(text)) == 4

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
    def test_float_round_trip_exact(self, values):
        ds = Dataset((Bag("x", 1, [values]),))
        np.testing.assert_array_equal(parse_mil_csv(write_mil_csv(ds)).bags[0].instances,
                                      ds.bags[0].instances)


class TestDataset:
    def test_duplicate_ids(self):
        with pytest.raises(MimnError):
            Dataset((Bag("a", 1, [[1.0]]), Bag("a", -1, [[2.0]])))

    def test_dimension_mismatch(self):
        with pytest.raises(MimnError):
            Dataset((Bag("a", 1, [[1.0]]), Bag("b", -1, [[2.0, 3.0]])))


class TestSynthesize:
    def test_witness_count(self):
        ds = synthesize(SynthParams(20, 20, 10, 20, 0.3), seed=1)
        for b in ds:
            want = 3 if b.label == 1 else 0
            assert int(np.sum(b.instance_labels == 1)) == want

    def test_contamination(self):
        ds = synthesize(SynthParams(5, 5, 10, 4, 0.5, 0.1), seed=0)
        for b in ds:
            if b.label == -1:
                assert int(np.sum(b.instance_labels == 1)) == 1

    def test_shape(self):
        ds = synthesize(SynthParams(100, 100, 10, 20, 0.3), seed=1)
        assert len(ds) == 200 and ds.dim == 20
        assert all(b.size == 10 for b in ds)

    def test_deterministic(self):
        p = SynthParams(4, 4, 5, 3)
        assert write_mil_csv(synthesize(p, 7)) == write_mil_csv(synthesize(p, 7))
        assert write_mil_csv(synthesize(p, 7)) != write_mil_csv(synthesize(p, 8))

    @pytest.mark.parametrize("kw", [dict(witness_rate=0.0), dict(witness_rate=1.5),
                                    dict(neg_contamination=1.0), dict(bag_size=0),
                                    dict(separation=0.0), dict(n_pos_bags=0, n_neg_bags=0)])
    def test_invalid(self, kw):
        with pytest.raises(MimnError):
            SynthParams(**kw)

    @given(st.integers(1, 50), st.integers(1, 100))
    def test_witness_ceiling(self, m, pct):
        p = SynthParams(1, 1, m, 1, pct / 100)
        assert p.witnesses_per_bag * 100 >= pct * m
        assert (p.witnesses_per_bag - 1) * 100 < pct * m


class TestKFold:
    def test_ten_folds_of_ten(self):
        ds = synthesize(SynthParams(50, 50, 2, 2), seed=0)
        folds = kfold_split(ds, 10, seed=0)
        assert [len(te) for _, te in folds] == [10] * 10

    def test_leave_one_out(self):
        ds = synthesize(SynthParams(12, 12, 2, 2), seed=0)
        folds = kfold_split(ds, 24, seed=3)
        assert len(folds) == 24 and all(len(te) == 1 for _, te in folds)

    def test_stratified_balance(self):
        labels = np.array([1] * 30 + [-1] * 70)
        for idx in kfold_indices(labels, 10, seed=2):
            assert np.sum(labels[idx] == 1) == 3

    @pytest.mark.parametrize("k", [1, 0, 101])
    def test_invalid_k(self, k):
        with pytest.raises(MimnError):
            kfold_indices(np.ones(100), k, 0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 60), st.integers(0, 2**32 - 1), st.booleans(), st.data())
    def test_partition(self, n, seed, stratified, data):
        k = data.draw(st.integers(2, n))
        labels = np.random.default_rng(seed).choice([1, -1], n)
        folds = kfold_indices(labels, k, seed, stratified)
        allidx = np.concatenate(folds)
        assert sorted(allidx.tolist()) == list(range(n))
        sizes = [f.size for f in folds]
        assert max(sizes) - min(sizes) <= 1

    def test_train_and_test_disjoint(self):
        ds = synthesize(SynthParams(7, 6, 2, 2), seed=0)
        for tr, te in kfold_split(ds, 4, seed=1):
            assert {b.id for b in tr}.isdisjoint({b.id for b in te})
            assert len(tr) + len(te) == len(ds)
