"""Classical baseline tests: LR, Gaussian NB, kNN, and the MLP."""
import numpy as np
import pytest

from kanids.baselines import (
    BaselineConfig,
    KnnConfig,
    MlpConfig,
    _logistic_loss,
    _mlp_init,
    _mlp_loss_grads,
    fit_baseline,
    predict_baseline,
)
from kanids.errors import DegenerateDataError


def blobs(n=400, sep=5.0, seed=0, d=2):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.concatenate([rng.normal(-sep / 2, 1.0, size=(half, d)),
                        rng.normal(sep / 2, 1.0, size=(half, d))])
    y = np.concatenate([np.zeros(half, dtype=int), np.ones(half, dtype=int)])
    perm = rng.permutation(n)
    return X[perm], y[perm]


class TestLogisticRegression:
    def test_separable_holdout_accuracy(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(-2, 2, size=(600, 1))
        X = X[np.abs(X[:, 0]) > 0.5][:400]  # margin of 1 around zero
        y = (X[:, 0] > 0).astype(int)
        model = fit_baseline("logistic_regression", BaselineConfig(), X[:300], y[:300])
        acc = np.mean(predict_baseline(model, X[300:]) == y[300:])
        assert acc >= 0.99

    def test_loss_never_increases_from_init(self):
        X, y = blobs(seed=2)
        model = fit_baseline("logistic_regression", BaselineConfig(), X, y)
        cfg = BaselineConfig().lr
        init_loss = _logistic_loss(X, y, np.zeros(X.shape[1]), 0.0, cfg.l2)
        assert model.params["final_loss"] <= init_loss
        assert isinstance(model.params["converged"], bool)

    def test_zero_model_predicts_class_zero(self):
        model = fit_baseline("logistic_regression", BaselineConfig(), *blobs(seed=3))
        model.params["weights"][:] = 0.0
        model.params["bias"] = 0.0
        assert np.all(predict_baseline(model, np.zeros((5, 2))) == 0)

    def test_single_class_rejected(self):
        X = np.zeros((10, 2))
        with pytest.raises(DegenerateDataError, match="single-class"):
            fit_baseline("logistic_regression", BaselineConfig(), X, np.zeros(10, dtype=int))


class TestGaussianNB:
    def test_separated_blobs(self):
        X, y = blobs(n=600, sep=10.0, seed=4)
        model = fit_baseline("gaussian_nb", BaselineConfig(), X[:400], y[:400])
        acc = np.mean(predict_baseline(model, X[400:]) == y[400:])
        assert acc >= 0.99

    def test_query_at_class_mean(self):
        X, y = blobs(n=400, sep=10.0, seed=5)
        model = fit_baseline("gaussian_nb", BaselineConfig(), X, y)
        mean0 = model.params["means"][0][None, :]
        assert predict_baseline(model, mean0)[0] == 0

    def test_feature_scaling_invariance(self):
        X, y = blobs(n=300, sep=6.0, seed=6, d=3)
        X_test, _ = blobs(n=100, sep=6.0, seed=7, d=3)
        base = predict_baseline(fit_baseline("gaussian_nb", BaselineConfig(), X, y), X_test)
        scaled_train = X.copy()
        scaled_test = X_test.copy()
        scaled_train[:, 1] *= 40.0
        scaled_test[:, 1] *= 40.0
        scaled = predict_baseline(
            fit_baseline("gaussian_nb", BaselineConfig(), scaled_train, y), scaled_test)
        assert np.array_equal(base, scaled)


class TestKnn:
    def test_nearest_neighbor_basic(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1])
        model = fit_baseline("knn", BaselineConfig(knn=KnnConfig(k=1)), X, y)
        assert predict_baseline(model, np.array([[0.1, 0.1]]))[0] == 0

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(8)
        X = rng.normal(size=(120, 3))
        y = rng.integers(0, 2, 120)
        queries = rng.normal(size=(40, 3))
        model = fit_baseline("knn", BaselineConfig(knn=KnnConfig(k=5)), X, y)
        mine = predict_baseline(model, queries)
        for q, label in zip(queries, mine):
            dists = [float(np.sqrt(np.sum((row - q) ** 2))) for row in X]
            order = sorted(range(len(X)), key=lambda i: (dists[i], i))
            votes = [int(y[i]) for i in order[:5]]
            expected = 1 if sum(votes) * 2 > 5 else 0
            assert label == expected

    def test_distance_tie_lower_training_index(self):
        X = np.array([[1.0], [-1.0], [3.0]])
        y = np.array([1, 0, 0])
        model = fit_baseline("knn", BaselineConfig(knn=KnnConfig(k=1)), X, y)
        # query at 0 is equidistant from rows 0 and 1; row 0 wins
        assert predict_baseline(model, np.array([[0.0]]))[0] == 1

    def test_vote_tie_class_zero(self):
        X = np.array([[0.0], [1.0]])
        y = np.array([0, 1])
        model = fit_baseline("knn", BaselineConfig(knn=KnnConfig(k=2)), X, y)
        assert predict_baseline(model, np.array([[0.5]]))[0] == 0

    def test_single_class_allowed(self):
        X = np.array([[0.0], [1.0]])
        model = fit_baseline("knn", BaselineConfig(), X, np.zeros(2, dtype=int))
        assert predict_baseline(model, np.array([[0.4]]))[0] == 0


class TestMlp:
    def test_xor_reachable_within_five_seeds(self):
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        y = np.array([0, 1, 1, 0])
        solved = False
        for seed in range(5):
            cfg = BaselineConfig(mlp=MlpConfig(hidden=8, learning_rate=0.05,
                                               batch_size=4, epochs=300, seed=seed))
            model = fit_baseline("mlp", cfg, X, y)
            if np.array_equal(predict_baseline(model, X), y):
                solved = True
                break
        assert solved

    def test_gradient_check(self):
        rng = np.random.default_rng(9)
        X = rng.normal(size=(10, 3))
        y = rng.integers(0, 2, 10)
        params = _mlp_init(3, MlpConfig(hidden=6, seed=1))
        params = [p + rng.normal(0, 0.1, p.shape) for p in params]
        _, grads = _mlp_loss_grads(params, X, y)
        h = 1e-5
        for pi, p in enumerate(params):
            flat = p.ravel()
            gflat = grads[pi].ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + h
                up = _mlp_loss_grads(params, X, y)[0]
                flat[j] = orig - h
                down = _mlp_loss_grads(params, X, y)[0]
                flat[j] = orig
                fd = (up - down) / (2 * h)
                assert abs(gflat[j] - fd) <= 1e-4 * max(abs(gflat[j]), abs(fd)) + 1e-7

    def test_deterministic_per_seed(self):
        X, y = blobs(n=200, seed=10)
        cfg = BaselineConfig(mlp=MlpConfig(hidden=16, epochs=3, seed=5))
        a = fit_baseline("mlp", cfg, X, y)
        b = fit_baseline("mlp", cfg, X, y)
        for key in ("w1", "b1", "w2", "b2"):
            assert np.array_equal(a.params[key], b.params[key])

    def test_blob_accuracy(self):
        X, y = blobs(n=600, sep=6.0, seed=11)
        cfg = BaselineConfig(mlp=MlpConfig(hidden=16, epochs=10, seed=0))
        model = fit_baseline("mlp", cfg, X[:400], y[:400])
        acc = np.mean(predict_baseline(model, X[400:]) == y[400:])
        assert acc >= 0.95


class TestContract:
    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown baseline kind"):
            fit_baseline("svm", BaselineConfig(), np.zeros((4, 2)), np.array([0, 1, 0, 1]))

    def test_train_seconds_recorded(self):
        X, y = blobs(n=100, seed=12)
        model = fit_baseline("gaussian_nb", BaselineConfig(), X, y)
        assert model.train_seconds >= 0.0

    def test_dimension_mismatch_on_predict(self):
        X, y = blobs(n=100, seed=13)
        model = fit_baseline("logistic_regression", BaselineConfig(), X, y)
        with pytest.raises(ValueError, match="dimension mismatch"):
            predict_baseline(model, np.zeros((3, 9)))

    def test_empty_data(self):
        with pytest.raises(ValueError, match="empty data"):
            fit_baseline("knn", BaselineConfig(), np.zeros((0, 2)), np.zeros(0, dtype=int))
