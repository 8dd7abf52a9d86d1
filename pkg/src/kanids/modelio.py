"""Self-describing JSON model files with bit-exact parameter round-trips.

One envelope format covers every model kind. JSON float serialization uses
Python's shortest round-trip repr, so a save/load cycle reproduces every
parameter exactly. Files written by a newer format version are rejected
instead of being misread.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import baselines, data, kan, trees
from .errors import ModelFileError, VersionMismatchError

FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    """A loaded model plus the preprocessing metadata needed to apply it."""

    kind: str  # "kan", "tree", "forest", or a baseline kind
    model: object
    feature_names: list
    scaler: data.ScalerParams | None = None
    label_map: data.LabelMap = field(default_factory=data.LabelMap)
    meta: dict = field(default_factory=dict)


def _kan_payload(network: kan.KanNetwork) -> dict:
    g = network.grid_config
    return {
        "width_spec": [list(e) if isinstance(e, (tuple, list)) else int(e)
                       for e in network.width_spec],
        "grid": {"range_min": g.range_min, "range_max": g.range_max,
                 "num_intervals": g.num_intervals, "degree": g.degree},
        "layers": [
            {
                "in_dim": layer.in_dim,
                "n_add": layer.spec.n_add,
                "n_mult": layer.spec.n_mult,
                "mult_arity": layer.spec.mult_arity,
                "coeffs": layer.coeffs.tolist(),
                "base_weight": layer.base_weight.tolist(),
                "spline_weight": layer.spline_weight.tolist(),
            }
            for layer in network.layers
        ],
    }


def _kan_restore(payload: dict) -> kan.KanNetwork:
    g = payload["grid"]
    grid_config = kan.GridConfig(float(g["range_min"]), float(g["range_max"]),
                                 int(g["num_intervals"]), int(g["degree"]))
    grid = grid_config.make()
    width_spec = [tuple(e) if isinstance(e, list) else int(e) for e in payload["width_spec"]]
    layers = []
    for entry in payload["layers"]:
        spec = kan.LayerSpec(int(entry["n_add"]), int(entry["n_mult"]),
                             int(entry["mult_arity"]))
        in_dim = int(entry["in_dim"])
        coeffs = np.asarray(entry["coeffs"], dtype=float)
        base_w = np.asarray(entry["base_weight"], dtype=float)
        spline_w = np.asarray(entry["spline_weight"], dtype=float)
        layers.append(kan.KanLayer(in_dim, spec, grid, coeffs, base_w, spline_w))
    network = kan.KanNetwork(layers, width_spec, int(width_spec[0]), grid_config)
    for a, b in zip(layers[:-1], layers[1:]):
        if a.spec.n_nodes != b.in_dim:
            raise ValueError("layer dimensions do not chain")
    return network


def _tree_payload(node: trees.TreeNode) -> dict:
    if node.is_leaf:
        return {"n": node.n_samples, "counts": list(node.class_counts)}
    return {
        "n": node.n_samples,
        "f": node.feature_index,
        "thr": node.threshold,
        "dec": node.impurity_decrease,
        "left": _tree_payload(node.left),
        "right": _tree_payload(node.right),
    }


def _tree_restore(payload: dict) -> trees.TreeNode:
    if "counts" in payload:
        return trees.TreeNode(n_samples=int(payload["n"]),
                              class_counts=tuple(int(c) for c in payload["counts"]))
    return trees.TreeNode(
        n_samples=int(payload["n"]),
        feature_index=int(payload["f"]),
        threshold=float(payload["thr"]),
        impurity_decrease=float(payload["dec"]),
        left=_tree_restore(payload["left"]),
        right=_tree_restore(payload["right"]),
    )


def _forest_payload(forest: trees.Forest) -> dict:
    cfg = forest.config
    return {
        "config": {"n_trees": cfg.n_trees, "max_depth": cfg.max_depth,
                   "min_samples_split": cfg.min_samples_split,
                   "max_features": cfg.max_features, "bootstrap": cfg.bootstrap,
                   "seed": cfg.seed},
        "n_features": forest.n_features,
        "n_training_rows": forest.n_training_rows,
        "trees": [_tree_payload(t) for t in forest.trees],
    }


def _forest_restore(payload: dict) -> trees.Forest:
    cfg = trees.ForestConfig(**payload["config"])
    return trees.Forest([_tree_restore(t) for t in payload["trees"]], cfg,
                        int(payload["n_features"]), int(payload["n_training_rows"]))


def _baseline_payload(model: baselines.FittedBaseline) -> dict:
    out = {}
    for key, value in model.params.items():
        out[key] = value.tolist() if isinstance(value, np.ndarray) else value
    return out


_BASELINE_ARRAYS = {
    "logistic_regression": ("weights",),
    "gaussian_nb": ("means", "variances", "log_priors"),
    "knn": ("train_X", "train_y"),
    "mlp": ("w1", "b1", "w2", "b2"),
}


def _baseline_restore(kind: str, payload: dict) -> baselines.FittedBaseline:
    params = dict(payload)
    for key in _BASELINE_ARRAYS[kind]:
        dtype = int if key == "train_y" else float
        params[key] = np.asarray(params[key], dtype=dtype)
    return baselines.FittedBaseline(kind, params)


def save_bundle(bundle: ModelBundle, path) -> None:
    """Write any supported model kind to a self-describing JSON file."""
    if bundle.kind == "kan":
        payload = _kan_payload(bundle.model)
    elif bundle.kind == "tree":
        payload = _tree_payload(bundle.model)
    elif bundle.kind == "forest":
        payload = _forest_payload(bundle.model)
    elif bundle.kind in baselines.BASELINE_KINDS:
        payload = _baseline_payload(bundle.model)
    else:
        raise ValueError(f"unknown model kind {bundle.kind!r}")
    document = {
        "format_version": FORMAT_VERSION,
        "kind": bundle.kind,
        "feature_names": list(bundle.feature_names),
        "scaler": None if bundle.scaler is None else {
            "means": bundle.scaler.means.tolist(),
            "stds": bundle.scaler.stds.tolist(),
        },
        "label_map": {"benign_label": bundle.label_map.benign_label,
                      "benign_value": data.BENIGN, "malicious_value": data.MALICIOUS},
        "meta": bundle.meta,
        "payload": payload,
    }
    with open(path, "w") as fh:
        json.dump(document, fh)
        fh.write("\n")


def save_model(network: kan.KanNetwork, scaler, feature_names, path,
               label_map: data.LabelMap = data.LabelMap(), meta: dict | None = None) -> None:
    """Persist a spline-edge network with its preprocessing metadata."""
    save_bundle(ModelBundle("kan", network, list(feature_names), scaler,
                            label_map, meta or {}), path)


def load_model(path) -> ModelBundle:
    """Load any model file; raises on corrupt files or newer format versions."""
    with open(path) as fh:
        raw = fh.read()
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"corrupt model file {path}: {exc}") from None
    if not isinstance(document, dict):
        raise ModelFileError(f"corrupt model file {path}: not a JSON object")
    version = document.get("format_version")
    if not isinstance(version, int):
        raise ModelFileError(f"corrupt model file {path}: missing format_version")
    if version > FORMAT_VERSION:
        raise VersionMismatchError(
            f"model file {path} uses format version {version}; "
            f"this build reads up to {FORMAT_VERSION}")
    try:
        kind = document["kind"]
        payload = document["payload"]
        feature_names = [str(n) for n in document["feature_names"]]
        scaler_doc = document.get("scaler")
        scaler = None if scaler_doc is None else data.ScalerParams(
            np.asarray(scaler_doc["means"], dtype=float),
            np.asarray(scaler_doc["stds"], dtype=float))
        label_map = data.LabelMap(document["label_map"]["benign_label"])
        meta = document.get("meta", {})
        if kind == "kan":
            model = _kan_restore(payload)
        elif kind == "tree":
            model = _tree_restore(payload)
        elif kind == "forest":
            model = _forest_restore(payload)
        elif kind in baselines.BASELINE_KINDS:
            model = _baseline_restore(kind, payload)
        else:
            raise ModelFileError(f"corrupt model file {path}: unknown kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(f"corrupt model file {path}: {exc}") from None
    return ModelBundle(kind, model, feature_names, scaler, label_map, meta)
