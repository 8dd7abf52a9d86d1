"""Non-tree baseline classifiers behind one fit/predict contract.

Logistic regression, Gaussian naive Bayes, k-nearest neighbors, and a
one-hidden-layer MLP, all written directly on numpy. Every fit is
deterministic given its config and seed. Prediction ties always resolve to
class 0 (malicious), the fail-safe direction for an intrusion detector.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError
from .kan import AdamState, adam_step, loss_softmax_xent, _sigmoid

BASELINE_KINDS = ("logistic_regression", "gaussian_nb", "knn", "mlp")


@dataclass(frozen=True)
class LrConfig:
    learning_rate: float = 0.1
    max_iters: int = 1000
    tol: float = 1e-6
    l2: float = 1e-4


@dataclass(frozen=True)
class KnnConfig:
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class MlpConfig:
    hidden: int = 100
    learning_rate: float = 0.001
    batch_size: int = 128
    epochs: int = 20
    seed: int = 0


@dataclass(frozen=True)
class GnbConfig:
    var_smoothing: float = 1e-9


@dataclass(frozen=True)
class BaselineConfig:
    lr: LrConfig = field(default_factory=LrConfig)
    knn: KnnConfig = field(default_factory=KnnConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)
    gnb: GnbConfig = field(default_factory=GnbConfig)


@dataclass
class FittedBaseline:
    kind: str
    params: dict
    train_seconds: float = 0.0


def _check_xy(X, y, kind: str):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("empty data")
    if y.shape != (X.shape[0],):
        raise ValueError("dimension mismatch: labels vs rows")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    y = y.astype(int)
    if kind != "knn":
        if X.shape[0] < 2 or len(np.unique(y)) < 2:
            raise DegenerateDataError(f"single-class data: {kind} needs both classes present")
    return X, y


def _fit_logistic(X, y, cfg: LrConfig) -> dict:
    m, d = X.shape
    w = np.zeros(d)
    b = 0.0
    converged = False
    for _ in range(cfg.max_iters):
        z = X @ w + b
        p = _sigmoid(z)
        err = p - y
        grad_w = X.T @ err / m + cfg.l2 * w
        grad_b = float(err.mean())
        gnorm = float(np.sqrt(np.sum(grad_w**2) + grad_b**2))
        if gnorm < cfg.tol:
            converged = True
            break
        w = w - cfg.learning_rate * grad_w
        b = b - cfg.learning_rate * grad_b
    return {"weights": w, "bias": b, "converged": converged,
            "final_loss": _logistic_loss(X, y, w, b, cfg.l2)}


def _logistic_loss(X, y, w, b, l2) -> float:
    z = X @ w + b
    # log(1 + exp(-|z|)) form avoids overflow
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    return float(loss + 0.5 * l2 * np.sum(w**2))


def _fit_gnb(X, y, cfg: GnbConfig) -> dict:
    smoothing = cfg.var_smoothing * float(X.var(axis=0).max())
    means, variances, priors = [], [], []
    for c in (0, 1):
        rows = X[y == c]
        means.append(rows.mean(axis=0))
        variances.append(rows.var(axis=0) + smoothing)
        priors.append(rows.shape[0] / X.shape[0])
    return {"means": np.stack(means), "variances": np.stack(variances),
            "log_priors": np.log(priors)}


def _mlp_init(d: int, cfg: MlpConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    w1 = rng.normal(0.0, np.sqrt(2.0 / d), size=(d, cfg.hidden))
    b1 = np.zeros(cfg.hidden)
    w2 = rng.normal(0.0, np.sqrt(2.0 / cfg.hidden), size=(cfg.hidden, 2))
    b2 = np.zeros(2)
    return [w1, b1, w2, b2]


def _mlp_logits(params, X):
    w1, b1, w2, b2 = params
    h = np.maximum(X @ w1 + b1, 0.0)
    return h @ w2 + b2, h


def _mlp_loss_grads(params, X, y):
    """Softmax cross-entropy loss and exact gradients for one batch."""
    w1, b1, w2, b2 = params
    logits, h = _mlp_logits(params, X)
    loss, dlogits = loss_softmax_xent(logits, y)
    dw2 = h.T @ dlogits
    db2 = dlogits.sum(axis=0)
    dh = dlogits @ w2.T
    dh[h <= 0.0] = 0.0
    dw1 = X.T @ dh
    db1 = dh.sum(axis=0)
    return loss, [dw1, db1, dw2, db2]


def _fit_mlp(X, y, cfg: MlpConfig) -> dict:
    m, d = X.shape
    params = _mlp_init(d, cfg)
    state = AdamState.init_like(params)
    batches = m // cfg.batch_size
    if batches == 0:
        batches, batch_size = 1, m
    else:
        batch_size = cfg.batch_size
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(cfg.seed + epoch).permutation(m)
        for b in range(batches):
            idx = order[b * batch_size : (b + 1) * batch_size]
            _, grads = _mlp_loss_grads(params, X[idx], y[idx])
            params, state = adam_step(params, grads, state, cfg.learning_rate)
    w1, b1, w2, b2 = params
    return {"w1": w1, "b1": b1, "w2": w2, "b2": b2}


def fit_baseline(kind: str, config: BaselineConfig, X, y) -> FittedBaseline:
    """Fit one baseline; wall time is recorded on the returned model."""
    if kind not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}; choose from {BASELINE_KINDS}")
    X, y = _check_xy(X, y, kind)
    start = time.perf_counter()
    if kind == "logistic_regression":
        params = _fit_logistic(X, y, config.lr)
    elif kind == "gaussian_nb":
        params = _fit_gnb(X, y, config.gnb)
    elif kind == "knn":
        params = {"train_X": X.copy(), "train_y": y.copy(), "k": config.knn.k}
    else:
        params = _fit_mlp(X, y, config.mlp)
    return FittedBaseline(kind, params, train_seconds=time.perf_counter() - start)


def _predict_knn(params, X) -> np.ndarray:
    train_X, train_y, k = params["train_X"], params["train_y"], params["k"]
    k = min(k, train_X.shape[0])
    out = np.empty(X.shape[0], dtype=int)
    for i, q in enumerate(X):
        dists = np.sum((train_X - q) ** 2, axis=1)
        # stable sort: equal distances resolve to the lower training-row index
        nearest = np.argsort(dists, kind="stable")[:k]
        vote1 = int(train_y[nearest].sum())
        out[i] = 1 if 2 * vote1 > k else 0
    return out


def predict_baseline(model: FittedBaseline, X) -> np.ndarray:
    """Predict binary labels; all ties resolve to class 0."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("dimension mismatch: expected a 2-D matrix")
    p = model.params
    if model.kind == "logistic_regression":
        if X.shape[1] != p["weights"].shape[0]:
            raise ValueError("dimension mismatch")
        return (_sigmoid(X @ p["weights"] + p["bias"]) > 0.5).astype(int)
    if model.kind == "gaussian_nb":
        if X.shape[1] != p["means"].shape[1]:
            raise ValueError("dimension mismatch")
        log_post = np.empty((X.shape[0], 2))
        for c in (0, 1):
            mu, var = p["means"][c], p["variances"][c]
            log_post[:, c] = p["log_priors"][c] - 0.5 * np.sum(
                np.log(2 * np.pi * var) + (X - mu) ** 2 / var, axis=1)
        return (log_post[:, 1] > log_post[:, 0]).astype(int)
    if model.kind == "knn":
        if X.shape[1] != p["train_X"].shape[1]:
            raise ValueError("dimension mismatch")
        return _predict_knn(p, X)
    if model.kind == "mlp":
        if X.shape[1] != p["w1"].shape[0]:
            raise ValueError("dimension mismatch")
        logits, _ = _mlp_logits([p["w1"], p["b1"], p["w2"], p["b2"]], X)
        return (logits[:, 1] > logits[:, 0]).astype(int)
    raise ValueError(f"unknown baseline kind {model.kind!r}")
