"""Data pipeline tests: loading, binarization, splitting, scaling, synthesis."""
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanids import data
from kanids.data import (
    Dataset,
    LabelMap,
    SplitSpec,
    SynthSpec,
    apply_scaler,
    binarize_labels,
    fit_scaler,
    load_csv,
    project_features,
    split,
    split_indices,
    synth_generate,
    write_csv,
)


class TestBinarize:
    def test_benign_string(self):
        assert binarize_labels(["BenignTraffic"]).tolist() == [1]

    def test_attack_strings(self):
        out = binarize_labels(["Mirai-greeth_flood", "DDoS-ICMP_Flood", "BenignTraffic"])
        assert out.tolist() == [0, 0, 1]

    def test_case_sensitive(self):
        assert binarize_labels(["benigntraffic"]).tolist() == [0]

    def test_empty_input(self):
        with pytest.raises(ValueError, match="empty input"):
            binarize_labels([])

    @given(st.lists(st.text(max_size=20), min_size=1, max_size=50))
    @settings(max_examples=100, deadline=None)
    def test_total_on_any_strings(self, labels):
        out = binarize_labels(labels)
        assert set(out.tolist()) <= {0, 1}
        assert len(out) == len(labels)


class TestLoadCsv(object):
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return path

    def test_basic_load(self, tmp_path):
        path = self.write(tmp_path, "a,b,label\n1,2,BenignTraffic\n3,4,DDoS\n5,6,DDoS\n")
        ds, diags = load_csv(path)
        assert ds.n_rows == 3 and ds.n_features == 2
        assert ds.feature_names == ["a", "b"]
        assert ds.labels.tolist() == [1, 0, 0]
        assert diags.rows_read == 3 and diags.rows_dropped == 0

    def test_empty_cell_dropped(self, tmp_path):
        path = self.write(tmp_path, "a,b,label\n1,,BenignTraffic\n3,4,DDoS\n")
        ds, diags = load_csv(path)
        assert ds.n_rows == 1
        assert diags.rows_dropped == 1

    def test_non_numeric_and_nan_dropped(self, tmp_path):
        path = self.write(tmp_path, "a,label\noops,DDoS\nnan,DDoS\n1.5,DDoS\n")
        ds, diags = load_csv(path)
        assert ds.n_rows == 1
        assert diags.rows_dropped == 2

    def test_missing_label_column(self, tmp_path):
        path = self.write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(ValueError, match="missing label column"):
            load_csv(path)

    def test_all_rows_dropped(self, tmp_path):
        path = self.write(tmp_path, "a,label\nx,DDoS\ny,DDoS\n")
        with pytest.raises(ValueError, match="all rows dropped"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_csv(tmp_path / "nope.csv")

    def test_round_trip_with_write(self, tmp_path):
        ds = Dataset(np.array([[1.25, -3.5], [0.1, 2.0]]), np.array([1, 0]),
                     ["a", "b"])
        path = tmp_path / "rt.csv"
        write_csv(ds, path)
        back, _ = load_csv(path)
        assert np.array_equal(back.features, ds.features)
        assert np.array_equal(back.labels, ds.labels)
        assert back.feature_names == ds.feature_names


class TestSplit:
    def test_published_counts(self):
        train, val, test = split_indices(1_048_575, SplitSpec(seed=0))
        assert (len(train), len(val), len(test)) == (734_002, 157_286, 157_287)

    def test_ten_rows(self):
        train, val, test = split_indices(10, SplitSpec(seed=0))
        # temp = ceil(3) = 3, train = 7, test = ceil(1.5) = 2, val = 1
        assert (len(train), len(val), len(test)) == (7, 1, 2)

    def test_partition_sweep(self):
        spec = SplitSpec(seed=5)
        for m in range(3, 1001):
            train, val, test = split_indices(m, spec)
            held = math.ceil(Fraction(0.15 + 0.15) * m)
            n_test = math.ceil(Fraction(1, 2) * held)
            assert len(train) == m - held
            assert len(test) == n_test
            assert len(val) == held - n_test
            merged = np.concatenate([train, val, test])
            assert len(merged) == m
            assert np.array_equal(np.sort(merged), np.arange(m))

    def test_too_few_rows(self):
        with pytest.raises(ValueError, match="too few rows"):
            split_indices(2, SplitSpec(seed=0))

    def test_deterministic_per_seed(self):
        a = split_indices(100, SplitSpec(seed=7))
        b = split_indices(100, SplitSpec(seed=7))
        c = split_indices(100, SplitSpec(seed=8))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)
        assert not all(np.array_equal(x, y) for x, y in zip(a, c))

    def test_dataset_split_provenance(self):
        ds = Dataset(np.arange(20.0).reshape(10, 2), np.zeros(10, dtype=int),
                     ["a", "b"], provenance="unit")
        train, val, test = split(ds, SplitSpec(seed=0))
        assert train.n_rows == 7 and val.n_rows == 1 and test.n_rows == 2
        assert "train" in train.provenance

    def test_bad_fractions(self):
        with pytest.raises(ValueError, match="sum to 1"):
            SplitSpec(train_fraction=0.5, val_fraction=0.1, test_fraction=0.1)


class TestScaler:
    def test_hand_computed_values(self):
        params = fit_scaler(np.array([[1.0], [2.0], [3.0]]))
        assert params.means[0] == 2.0
        assert abs(params.stds[0] - math.sqrt(2.0 / 3.0)) <= 1e-12
        scaled = apply_scaler(params, np.array([[1.0], [2.0], [3.0]]))
        assert np.allclose(scaled[:, 0], [-1.2247, 0.0, 1.2247], atol=1e-4)

    def test_constant_column_maps_to_zero(self):
        params = fit_scaler(np.full((5, 2), 7.0))
        assert params.stds[0] == 0.0
        scaled = apply_scaler(params, np.full((3, 2), 7.0))
        assert np.all(scaled == 0.0)

    def test_training_split_standardized(self):
        X = np.random.default_rng(0).normal(3.0, 2.5, size=(500, 4))
        params = fit_scaler(X)
        scaled = apply_scaler(params, X)
        assert np.max(np.abs(scaled.mean(axis=0))) <= 1e-10
        assert np.max(np.abs(scaled.var(axis=0) - 1.0)) <= 1e-8

    def test_idempotent_refit(self):
        X = np.random.default_rng(1).normal(size=(200, 3)) * 4 + 1
        once = apply_scaler(fit_scaler(X), X)
        again = fit_scaler(once)
        assert np.max(np.abs(again.means)) <= 1e-10
        assert np.max(np.abs(again.stds - 1.0)) <= 1e-8

    def test_dimension_mismatch(self):
        params = fit_scaler(np.zeros((3, 2)))
        with pytest.raises(ValueError, match="dimension mismatch"):
            apply_scaler(params, np.zeros((3, 5)))

    def test_empty_input(self):
        with pytest.raises(ValueError, match="empty input"):
            fit_scaler(np.zeros((0, 3)))


class TestProjectFeatures:
    def make(self):
        return Dataset(np.arange(12.0).reshape(4, 3), np.array([0, 1, 0, 1]),
                       ["a", "b", "c"])

    def test_basic_slice(self):
        out = project_features(self.make(), [0, 1])
        assert out.n_features == 2
        assert out.feature_names == ["a", "b"]

    def test_identity(self):
        ds = self.make()
        out = project_features(ds, [0, 1, 2])
        assert np.array_equal(out.features, ds.features)

    def test_order_preserved(self):
        out = project_features(self.make(), [2, 0])
        assert out.feature_names == ["c", "a"]
        assert np.array_equal(out.features[:, 0], self.make().features[:, 2])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            project_features(self.make(), [5])

    def test_duplicate_index(self):
        with pytest.raises(ValueError, match="duplicate"):
            project_features(self.make(), [0, 0])


class TestSynth:
    def test_label_proportion(self):
        ds, _ = synth_generate(SynthSpec(n_rows=20000, benign_fraction=0.5, seed=3))
        assert abs(ds.labels.mean() - 0.5) <= 0.02

    def test_deterministic(self):
        a, ta = synth_generate(SynthSpec(n_rows=500, seed=11))
        b, tb = synth_generate(SynthSpec(n_rows=500, seed=11))
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert ta == tb

    def test_noise_free_rule_reproduces_labels(self):
        ds, truth = synth_generate(SynthSpec(n_rows=5000, noise_std=0.0, seed=4))
        assert np.array_equal(truth.bayes_labels(ds.features), ds.labels)

    def test_five_informative_features(self):
        _, truth = synth_generate(SynthSpec(n_rows=100, seed=5))
        assert len(set(truth.informative_indices)) == 5

    def test_invalid_specs(self):
        with pytest.raises(ValueError, match="n_rows"):
            synth_generate(SynthSpec(n_rows=5))
        with pytest.raises(ValueError, match="benign_fraction"):
            synth_generate(SynthSpec(n_rows=100, benign_fraction=1.5))
        with pytest.raises(ValueError, match="rule"):
            synth_generate(SynthSpec(n_rows=100, rule="nope"))

    def test_unbalanced_fraction(self):
        ds, _ = synth_generate(SynthSpec(n_rows=10000, benign_fraction=0.2, seed=6))
        assert abs(ds.labels.mean() - 0.2) <= 0.02


class TestDatasetInvariants:
    def test_label_values_checked(self):
        with pytest.raises(ValueError, match="labels"):
            Dataset(np.zeros((2, 1)), np.array([0, 2]), ["a"])

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            Dataset(np.zeros((1, 2)), np.array([0]), ["a", "a"])

    def test_row_count_checked(self):
        with pytest.raises(ValueError, match="label count"):
            Dataset(np.zeros((3, 1)), np.array([0, 1]), ["a"])
