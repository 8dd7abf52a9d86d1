"""CSV ingestion, label binarization, the two-stage 70/15/15 split, scaling,
and a seeded synthetic traffic generator for desk-scale experiments.

The split reproduces the exact counts used throughout the reports this
toolkit renders: the held-out share is rounded up at both stages, so a
1,048,575-row dataset yields 734,002 / 157,286 / 157,287 train/val/test rows.
"""
from __future__ import annotations

import csv as _csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

BENIGN = 1
MALICIOUS = 0


@dataclass
class Dataset:
    """Numeric feature matrix plus binary labels (0 = malicious, 1 = benign)."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("label count does not match row count")
        if self.labels.size and not np.all((self.labels == 0) | (self.labels == 1)):
            raise ValueError("labels must be 0 or 1")
        self.feature_names = [str(n) for n in self.feature_names]
        if len(self.feature_names) != self.features.shape[1]:
            raise ValueError("feature name count does not match column count")
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError("feature names must be unique")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, indices, tag: str) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices],
                       list(self.feature_names), f"{self.provenance}[{tag}]")


@dataclass(frozen=True)
class LabelMap:
    """Exact-match binarization: the benign label string maps to 1, all else to 0."""

    benign_label: str = "BenignTraffic"

    def __post_init__(self):
        if not self.benign_label:
            raise ValueError("benign_label must be non-empty")


def binarize_labels(raw, label_map: LabelMap = LabelMap()) -> np.ndarray:
    """Map raw label strings to {0, 1}. Case-sensitive exact match only."""
    raw = list(raw)
    if not raw:
        raise ValueError("empty input: no labels to binarize")
    return np.array([BENIGN if s == label_map.benign_label else MALICIOUS for s in raw],
                    dtype=int)


@dataclass(frozen=True)
class LoadDiagnostics:
    rows_read: int
    rows_dropped: int
    benign_count: int
    malicious_count: int


def load_csv(path, label_column: str = "label", label_map: LabelMap = LabelMap()):
    """Load a header-ed CSV of numeric features plus one label column.

    Rows with a missing, non-numeric, or non-finite feature cell are dropped
    and counted. Returns (Dataset, LoadDiagnostics).
    """
    with open(path, newline="") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"empty csv: {path}") from None
        if label_column not in header:
            raise ValueError(f"missing label column {label_column!r} in {path}")
        label_idx = header.index(label_column)
        feature_names = [h for i, h in enumerate(header) if i != label_idx]
        rows, raw_labels = [], []
        rows_read = 0
        dropped = 0
        width = len(header)
        for record in reader:
            rows_read += 1
            if len(record) != width:
                dropped += 1
                continue
            try:
                values = [float(cell) for i, cell in enumerate(record) if i != label_idx]
            except ValueError:
                dropped += 1
                continue
            if not all(math.isfinite(v) for v in values):
                dropped += 1
                continue
            rows.append(values)
            raw_labels.append(record[label_idx])
    if not rows:
        raise ValueError(f"all rows dropped: no usable rows in {path} "
                         f"({rows_read} read, {dropped} dropped)")
    labels = binarize_labels(raw_labels, label_map)
    dataset = Dataset(np.array(rows, dtype=float), labels, feature_names, provenance=str(path))
    diags = LoadDiagnostics(rows_read, dropped,
                            int(np.sum(labels == BENIGN)), int(np.sum(labels == MALICIOUS)))
    return dataset, diags


def write_csv(dataset: Dataset, path, label_column: str = "label",
              label_map: LabelMap = LabelMap(), malicious_label: str = "MaliciousTraffic"):
    """Write a dataset in the same schema load_csv reads (full-precision floats)."""
    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(list(dataset.feature_names) + [label_column])
        for row, label in zip(dataset.features, dataset.labels):
            name = label_map.benign_label if label == BENIGN else malicious_label
            writer.writerow([repr(float(v)) for v in row] + [name])


@dataclass(frozen=True)
class SplitSpec:
    """Two-stage split fractions; rounding is fixed by the ceil rules below."""

    train_fraction: float = 0.70
    val_fraction: float = 0.15
    test_fraction: float = 0.15
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_fraction, self.val_fraction, self.test_fraction)
        if any(f <= 0 for f in fracs):
            raise ValueError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ValueError("split fractions must sum to 1")


def split_indices(m: int, spec: SplitSpec = SplitSpec()):
    """Row indices for (train, val, test).

    Stage 1 shuffles all rows with spec.seed and holds out
    ceil((val + test fraction) * m) rows. Stage 2 reshuffles the held-out rows
    with seed + 1 and takes ceil(test share) of them as the test set. Exact
    rational arithmetic keeps the ceils deterministic.
    """
    if m < 3:
        raise ValueError(f"too few rows to split: {m}")
    held_frac = Fraction(spec.val_fraction) + Fraction(spec.test_fraction)
    n_held = math.ceil(held_frac * m)
    order = np.random.default_rng(spec.seed).permutation(m)
    held, train = order[:n_held], order[n_held:]
    test_share = Fraction(spec.test_fraction) / held_frac
    n_test = math.ceil(test_share * n_held)
    order2 = np.random.default_rng(spec.seed + 1).permutation(n_held)
    test = held[order2[:n_test]]
    val = held[order2[n_test:]]
    return train, val, test


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()):
    """Split a dataset into (train, val, test) datasets."""
    train_idx, val_idx, test_idx = split_indices(dataset.n_rows, spec)
    return (dataset.take(train_idx, "train"), dataset.take(val_idx, "val"),
            dataset.take(test_idx, "test"))


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature mean and population (divide-by-m) standard deviation."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stds, dtype=float)
        if means.shape != stds.shape or means.ndim != 1:
            raise ValueError("means and stds must be matching 1-D vectors")
        if np.any(stds < 0):
            raise ValueError("standard deviations must be non-negative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)


def fit_scaler(train_features) -> ScalerParams:
    """Standardization parameters from the training split only."""
    X = np.asarray(train_features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("empty input: need at least one training row")
    return ScalerParams(X.mean(axis=0), X.std(axis=0))


CONSTANT_STD = 1e-12


def apply_scaler(params: ScalerParams, features) -> np.ndarray:
    """(x - mean) / std per feature; constant features map to zero."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.means.shape[0]:
        raise ValueError(f"dimension mismatch: {X.shape} vs {params.means.shape[0]} features")
    safe = np.where(params.stds < CONSTANT_STD, 1.0, params.stds)
    scaled = (X - params.means) / safe
    scaled[:, params.stds < CONSTANT_STD] = 0.0
    return scaled


def project_features(dataset: Dataset, selected_indices) -> Dataset:
    """Column-slice a dataset, preserving the order of the selected indices."""
    idx = [int(i) for i in selected_indices]
    for i in idx:
        if i < 0 or i >= dataset.n_features:
            raise IndexError(f"feature index {i} out of range for d={dataset.n_features}")
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate feature index in selection")
    return Dataset(dataset.features[:, idx], dataset.labels.copy(),
                   [dataset.feature_names[i] for i in idx],
                   f"{dataset.provenance}[cols={idx}]")


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic traffic generator settings.

    The labeling rule scores each row as
    ``w . x_linear + sin(2 * x_periodic) + noise`` and thresholds at the
    score quantile matching ``benign_fraction``; rows above the threshold are
    benign. Five features are informative (four linear, one periodic), the
    rest are standard-normal noise, so linear models provably miss the
    periodic component while spline edges can express it.
    """

    n_rows: int
    n_features: int = 46
    benign_fraction: float = 0.5
    noise_std: float = 0.05
    seed: int = 0
    rule: str = "periodic"


LINEAR_WEIGHTS = (0.5, -0.4, 0.35, 0.3)
PERIODIC_FREQ = 2.0


@dataclass(frozen=True)
class SynthTruth:
    """Exact generative parameters, for assertions and Bayes-rule checks."""

    rule: str
    linear_indices: tuple
    linear_weights: tuple
    periodic_index: int
    periodic_frequency: float
    threshold: float
    noise_std: float
    seed: int

    @property
    def informative_indices(self) -> tuple:
        return tuple(self.linear_indices) + (self.periodic_index,)

    def score(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        lin = X[:, list(self.linear_indices)] @ np.asarray(self.linear_weights)
        return lin + np.sin(self.periodic_frequency * X[:, self.periodic_index])

    def bayes_labels(self, features) -> np.ndarray:
        """Noise-free optimal labels under the generating rule."""
        return (self.score(features) > self.threshold).astype(int)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "linear_indices": list(self.linear_indices),
            "linear_weights": list(self.linear_weights),
            "periodic_index": self.periodic_index,
            "periodic_frequency": self.periodic_frequency,
            "threshold": self.threshold,
            "noise_std": self.noise_std,
            "seed": self.seed,
        }


def synth_generate(spec: SynthSpec):
    """Generate a synthetic dataset; returns (Dataset, SynthTruth)."""
    if spec.n_rows < 10:
        raise ValueError(f"invalid spec: n_rows must be >= 10, got {spec.n_rows}")
    if not 0 < spec.benign_fraction < 1:
        raise ValueError("invalid spec: benign_fraction must be strictly between 0 and 1")
    if spec.n_features < 6:
        raise ValueError("invalid spec: need at least 6 features (5 informative + noise)")
    if spec.noise_std < 0:
        raise ValueError("invalid spec: noise_std must be non-negative")
    if spec.rule != "periodic":
        raise ValueError(f"invalid spec: unknown rule {spec.rule!r}")
    rng = np.random.default_rng(spec.seed)
    informative = rng.choice(spec.n_features, size=5, replace=False)
    lin_idx, per_idx = tuple(int(i) for i in informative[:4]), int(informative[4])
    X = rng.standard_normal((spec.n_rows, spec.n_features))
    score = (X[:, list(lin_idx)] @ np.asarray(LINEAR_WEIGHTS)
             + np.sin(PERIODIC_FREQ * X[:, per_idx])
             + spec.noise_std * rng.standard_normal(spec.n_rows))
    threshold = float(np.quantile(score, 1.0 - spec.benign_fraction))
    labels = (score > threshold).astype(int)
    names = [f"f{i:02d}" for i in range(spec.n_features)]
    dataset = Dataset(X, labels, names, provenance=f"synth(seed={spec.seed}, rule={spec.rule})")
    truth = SynthTruth(spec.rule, lin_idx, LINEAR_WEIGHTS, per_idx, PERIODIC_FREQ,
                       threshold, spec.noise_std, spec.seed)
    return dataset, truth
