"""Command-line front end: synth, select-features, train, evaluate,
extract-formula, and export-dot.

Exit codes: 0 ok, 2 usage or config error, 3 I/O error (including corrupt
model files), 4 degenerate data, 5 training diverged, 6 feature mismatch.
Every command takes --seed, --out, --label-column, and --config (a flat
key=value file whose entries override command-line flags).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, baselines, data, kan, metrics, modelio, symbolic, trees
from .errors import (
    DegenerateDataError,
    FeatureMismatchError,
    ModelFileError,
    TrainingDivergedError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4
EXIT_DIVERGED = 5
EXIT_FEATURES = 6

MODEL_CHOICES = ("kan", "lr", "rf", "dt", "knn", "nb", "mlp")
DISPLAY_NAMES = {"kan": "KAN", "lr": "LR", "rf": "RF", "dt": "DT",
                 "knn": "kNN", "nb": "NB", "mlp": "MLP"}
BASELINE_BY_CLI = {"lr": "logistic_regression", "nb": "gaussian_nb",
                   "knn": "knn", "mlp": "mlp"}


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    sp.add_argument("--out", "-o", default=".", help="output directory")
    sp.add_argument("--label-column", default="label")
    sp.add_argument("--benign-label", default="BenignTraffic")
    sp.add_argument("--config", default=None,
                    help="flat key=value file; its entries override flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kanids",
        description="Spline-edge network toolkit for binary intrusion detection.")
    parser.add_argument("--version", action="version", version=f"kanids {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate a synthetic traffic CSV")
    sp.add_argument("--rows", type=int, required=True)
    sp.add_argument("--features", type=int, default=46)
    sp.add_argument("--benign-fraction", type=float, default=0.5)
    sp.add_argument("--noise", type=float, default=0.05)
    _add_common(sp)

    sp = sub.add_parser("select-features", help="rank features with a random forest")
    sp.add_argument("--data", required=True)
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int, default=None)
    _add_common(sp)

    sp = sub.add_parser("train", help="train one model on the 70/15/15 split")
    sp.add_argument("--data", required=True)
    sp.add_argument("--model", required=True, choices=MODEL_CHOICES)
    sp.add_argument("--width", default="16,8",
                    help="comma-separated hidden sizes; empty for no hidden layer")
    sp.add_argument("--multikan", action="store_true",
                    help="treat --width A,B as one hidden layer of A addition "
                         "and B multiplication nodes")
    sp.add_argument("--grid-size", type=int, default=5)
    sp.add_argument("--degree", type=int, default=3)
    sp.add_argument("--grid-range", type=float, default=4.0)
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--batch", type=int, default=128)
    sp.add_argument("--epochs", type=int, default=20)
    sp.add_argument("--features", choices=("full", "top"), default="full")
    sp.add_argument("--top", type=int, default=10)
    sp.add_argument("--features-file", default=None,
                    help="selected feature names, one per line (skips the forest)")
    sp.add_argument("--trees", type=int, default=100)
    sp.add_argument("--max-depth", type=int, default=None)
    sp.add_argument("--knn-k", type=int, default=5)
    sp.add_argument("--mlp-hidden", type=int, default=100)
    _add_common(sp)

    sp = sub.add_parser("evaluate", help="evaluate model files on the shared test split")
    sp.add_argument("--model", action="append", required=True,
                    help="model file; repeat for several models")
    sp.add_argument("--data", required=True)
    sp.add_argument("--omit-timing", action="store_true",
                    help="write 0.0000 in timing columns for byte-stable reports")
    _add_common(sp)

    sp = sub.add_parser("extract-formula", help="snap a trained network to a formula")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--r2-threshold", type=float, default=0.9)
    sp.add_argument("--max-samples", type=int, default=512)
    sp.add_argument("--precision", type=int, default=4)
    _add_common(sp)

    sp = sub.add_parser("export-dot", help="write the architecture as Graphviz DOT")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--max-samples", type=int, default=512)
    _add_common(sp)
    return parser


def _apply_config_file(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    text = Path(args.config).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not hasattr(args, key):
            raise ValueError(f"config line {lineno}: unknown option {key!r}")
        current = getattr(args, key)
        if isinstance(current, bool):
            setattr(args, key, value.lower() in ("1", "true", "yes", "on"))
        elif isinstance(current, int):
            setattr(args, key, int(value))
        elif isinstance(current, float):
            setattr(args, key, float(value))
        else:
            setattr(args, key, value)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fingerprint(path) -> dict:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return {"path": str(path), "sha256": digest.hexdigest()}


def _load(args):
    label_map = data.LabelMap(args.benign_label)
    dataset, diags = data.load_csv(args.data, args.label_column, label_map)
    return dataset, diags, label_map


def _write_json(path: Path, document: dict) -> None:
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


# --- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = data.SynthSpec(n_rows=args.rows, n_features=args.features,
                          benign_fraction=args.benign_fraction,
                          noise_std=args.noise, seed=args.seed)
    dataset, truth = data.synth_generate(spec)
    out = _out_dir(args)
    csv_path = out / "synth.csv"
    data.write_csv(dataset, csv_path, args.label_column,
                   data.LabelMap(args.benign_label))
    _write_json(out / "synth_truth.json", truth.to_dict())
    print(f"wrote {csv_path} ({dataset.n_rows} rows, {dataset.n_features} features) "
          f"and {out / 'synth_truth.json'}")
    return EXIT_OK


def _fit_selector_forest(train_scaled, train_labels, args):
    if len(np.unique(train_labels)) < 2:
        raise DegenerateDataError("training split contains a single class")
    config = trees.ForestConfig(n_trees=args.trees, max_depth=args.max_depth,
                                seed=args.seed)
    return trees.fit_forest(train_scaled, train_labels, config)


def cmd_select_features(args) -> int:
    dataset, _, _ = _load(args)
    if not 1 <= args.top <= dataset.n_features:
        raise ValueError(f"--top must be in [1, {dataset.n_features}], got {args.top}")
    train, _, _ = data.split(dataset, data.SplitSpec(seed=args.seed))
    scaler = data.fit_scaler(train.features)
    train_scaled = data.apply_scaler(scaler, train.features)
    forest = _fit_selector_forest(train_scaled, train.labels, args)
    importances = trees.feature_importances(forest)
    ranking = trees.select_top_n(importances, dataset.n_features)
    out = _out_dir(args)
    imp_path = out / "importances.csv"
    with open(imp_path, "w") as fh:
        fh.write("feature,importance\n")
        for i in ranking:
            fh.write(f"{dataset.feature_names[i]},{importances[i]!r}\n")
    sel_path = out / "selected_features.txt"
    sel_path.write_text("".join(dataset.feature_names[i] + "\n"
                                for i in ranking[: args.top]))
    print(f"wrote {imp_path} and {sel_path} (top {args.top})")
    return EXIT_OK


def _parse_width(args, input_dim: int):
    text = args.width.strip()
    hidden = [int(s) for s in text.split(",") if s.strip()] if text else []
    if args.multikan:
        if len(hidden) != 2:
            raise ValueError("--multikan needs --width A,B (addition,multiplication counts)")
        hidden = [(hidden[0], hidden[1])]
    return [input_dim] + hidden + [2]


def _select_feature_indices(args, dataset, train_scaled, train_labels):
    """Indices (into dataset columns) of the selected features, ranked."""
    if args.features_file:
        names = [line.strip() for line in Path(args.features_file).read_text().splitlines()
                 if line.strip()]
        missing = [n for n in names if n not in dataset.feature_names]
        if missing:
            raise FeatureMismatchError(f"features file names unknown columns: {missing}")
        return [dataset.feature_names.index(n) for n in names]
    if not 1 <= args.top <= dataset.n_features:
        raise ValueError(f"--top must be in [1, {dataset.n_features}], got {args.top}")
    forest = _fit_selector_forest(train_scaled, train_labels, args)
    return trees.select_top_n(trees.feature_importances(forest), args.top)


def _train_model(args, X_train, y_train, X_val, y_val, input_dim):
    """Returns (kind, model, train_seconds, history_or_none)."""
    if args.model == "kan":
        width = _parse_width(args, input_dim)
        grid = kan.GridConfig(-args.grid_range, args.grid_range,
                              args.grid_size, args.degree)
        network = kan.build_network(width, grid, seed=args.seed)
        config = kan.TrainConfig(learning_rate=args.lr, batch_size=args.batch,
                                 epochs=args.epochs, seed=args.seed)
        (_, history), seconds = metrics.timed(
            kan.train, network, (X_train, y_train), (X_val, y_val), config)
        return "kan", network, seconds, history
    if args.model in ("rf", "dt"):
        config = trees.ForestConfig(n_trees=args.trees, max_depth=args.max_depth,
                                    seed=args.seed)
        if args.model == "dt":
            model, seconds = metrics.timed(trees.fit_tree, X_train, y_train, config)
            return "tree", model, seconds, None
        model, seconds = metrics.timed(trees.fit_forest, X_train, y_train, config)
        return "forest", model, seconds, None
    kind = BASELINE_BY_CLI[args.model]
    config = baselines.BaselineConfig(
        knn=baselines.KnnConfig(k=args.knn_k),
        mlp=baselines.MlpConfig(hidden=args.mlp_hidden, seed=args.seed))
    model, seconds = metrics.timed(baselines.fit_baseline, kind, config,
                                   X_train, y_train)
    return kind, model, seconds, None


def _predict_model(kind: str, model, X) -> np.ndarray:
    if kind == "kan":
        labels, _ = kan.predict(model, X)
        return labels
    if kind == "tree":
        return trees.predict_tree(model, X)
    if kind == "forest":
        return trees.predict_forest(model, X)
    return baselines.predict_baseline(model, X)


def cmd_train(args) -> int:
    dataset, diags, label_map = _load(args)
    out = _out_dir(args)
    split_spec = data.SplitSpec(seed=args.seed)
    train, val, test = data.split(dataset, split_spec)
    scaler = data.fit_scaler(train.features)
    train_scaled = data.apply_scaler(scaler, train.features)
    val_scaled = data.apply_scaler(scaler, val.features)
    feature_mode = "full"
    feature_names = list(dataset.feature_names)
    if args.features == "top":
        selected = _select_feature_indices(args, dataset, train_scaled, train.labels)
        feature_mode = f"top{len(selected)}"
        feature_names = [dataset.feature_names[i] for i in selected]
        train_scaled = train_scaled[:, selected]
        val_scaled = val_scaled[:, selected]
        scaler = data.ScalerParams(scaler.means[selected], scaler.stds[selected])
    if len(np.unique(train.labels)) < 2 and args.model != "knn":
        raise DegenerateDataError("training split contains a single class")

    model_path = out / f"{args.model}_model.json"
    history_path = out / f"{args.model}_history.json"
    manifest = {
        "tool_version": __version__,
        "command": "train",
        "config": {k: v for k, v in sorted(vars(args).items()) if k != "config"},
        "dataset": {**_fingerprint(args.data), "rows": dataset.n_rows,
                    "columns": dataset.n_features, "rows_dropped": diags.rows_dropped},
        "split_sizes": {"train": train.n_rows, "val": val.n_rows, "test": test.n_rows},
        "selected_features": feature_names,
        "artifacts": [str(model_path)] + ([str(history_path)] if args.model == "kan" else []),
    }
    _write_json(out / f"{args.model}_manifest.json", manifest)

    kind, model, seconds, history = _train_model(
        args, train_scaled, train.labels, val_scaled, val.labels,
        input_dim=train_scaled.shape[1])

    meta = {"model": DISPLAY_NAMES[args.model], "feature_mode": feature_mode,
            "split_seed": args.seed}
    modelio.save_bundle(modelio.ModelBundle(kind, model, feature_names, scaler,
                                            label_map, meta), model_path)
    Path(str(model_path) + ".timing").write_text(
        json.dumps({"train_seconds": seconds}) + "\n")
    if history is not None:
        _write_json(history_path, {
            "total_iterations": history.total_iterations,
            "wall_seconds": history.wall_seconds,
            "saturated_inputs": history.saturated_inputs,
            "loss_log": history.loss_log,
            "val_accuracy": history.val_accuracy,
        })
    val_pred = _predict_model(kind, model, val_scaled)
    m = metrics.per_class_metrics(val.labels, val_pred)
    print(f"{DISPLAY_NAMES[args.model]} ({feature_mode}): "
          f"val accuracy={m.accuracy:.4f} macro_f1={m.macro_f1:.4f} "
          f"f1(malicious)={m.class0.f1:.4f} f1(benign)={m.class1.f1:.4f}")
    print(f"wrote {model_path}")
    return EXIT_OK


def _project_for_bundle(bundle, dataset, features):
    missing = [n for n in bundle.feature_names if n not in dataset.feature_names]
    if missing:
        raise FeatureMismatchError(
            f"model expects features absent from the data: {missing}")
    idx = [dataset.feature_names.index(n) for n in bundle.feature_names]
    X = features[:, idx]
    return data.apply_scaler(bundle.scaler, X) if bundle.scaler is not None else X


def cmd_evaluate(args) -> int:
    dataset, _, _ = _load(args)
    _, _, test = data.split(dataset, data.SplitSpec(seed=args.seed))
    reports = []
    for model_path in args.model:
        bundle = modelio.load_model(model_path)
        X = _project_for_bundle(bundle, dataset, test.features)
        pred, predict_seconds = metrics.timed(_predict_model, bundle.kind,
                                              bundle.model, X)
        timing_path = Path(str(model_path) + ".timing")
        train_seconds = 0.0
        if timing_path.exists():
            train_seconds = float(json.loads(timing_path.read_text())["train_seconds"])
        if args.omit_timing:
            train_seconds = predict_seconds = 0.0
        reports.append(metrics.ModelReport(
            model_name=bundle.meta.get("model", bundle.kind),
            feature_mode=bundle.meta.get("feature_mode", "full"),
            metrics=metrics.per_class_metrics(test.labels, pred),
            train_seconds=train_seconds,
            predict_seconds=predict_seconds,
        ))
    out = _out_dir(args)
    md = metrics.render_report(reports, "markdown")
    csv_text = metrics.render_report(reports, "csv")
    (out / "report.md").write_text(md)
    (out / "report.csv").write_text(csv_text)
    print(md, end="")
    print(f"wrote {out / 'report.md'} and {out / 'report.csv'}")
    return EXIT_OK


def _kan_bundle_and_batch(args):
    bundle = modelio.load_model(args.model)
    if bundle.kind != "kan":
        raise ValueError(f"{args.model} is not a spline-edge network model "
                         f"(kind={bundle.kind!r})")
    dataset, _, _ = _load(args)
    train, _, _ = data.split(dataset, data.SplitSpec(seed=args.seed))
    X = _project_for_bundle(bundle, dataset, train.features)
    return bundle, X[: args.max_samples]


def cmd_extract_formula(args) -> int:
    bundle, batch = _kan_bundle_and_batch(args)
    sym = symbolic.snap_network(bundle.model, batch, r2_threshold=args.r2_threshold)
    formula = symbolic.emit_formula(sym, precision=args.precision,
                                    feature_names=bundle.feature_names)
    out = _out_dir(args)
    (out / "formula.txt").write_text(formula.text())
    (out / "formula_expr.txt").write_text(formula.prefix_text())
    with open(out / "edge_fits.csv", "w") as fh:
        fh.write("layer,in_index,node_index,subnode_index,in_feature,"
                 "primitive,a,b,c,d,r_squared,low_fidelity\n")
        for edge in sym.all_edges():
            layer, i, node, subnode = edge.source
            feat = bundle.feature_names[i] if layer == 0 else f"h{layer - 1}_{i}"
            fh.write(f"{layer},{i},{node},{subnode},{feat},{edge.primitive},"
                     f"{edge.a!r},{edge.b!r},{edge.c!r},{edge.d!r},"
                     f"{edge.r_squared!r},{int(edge.low_fidelity)}\n")
    print(formula.text(), end="")
    print(f"wrote {out / 'formula.txt'}, {out / 'formula_expr.txt'}, "
          f"{out / 'edge_fits.csv'}")
    return EXIT_OK


def cmd_export_dot(args) -> int:
    bundle, batch = _kan_bundle_and_batch(args)
    importances = kan.edge_importance(bundle.model, batch)
    dot = kan.export_dot(bundle.model, importances,
                         feature_names=bundle.feature_names)
    out = _out_dir(args)
    (out / "model.dot").write_text(dot)
    print(f"wrote {out / 'model.dot'}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "select-features": cmd_select_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "extract-formula": cmd_extract_formula,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits with 2 on usage errors
        return int(exc.code or 0)
    try:
        _apply_config_file(args)
        return COMMANDS[args.command](args)
    except (ModelFileError, OSError) as exc:
        print(f"kanids: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DegenerateDataError as exc:
        print(f"kanids: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except TrainingDivergedError as exc:
        print(f"kanids: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except FeatureMismatchError as exc:
        print(f"kanids: feature mismatch: {exc}", file=sys.stderr)
        return EXIT_FEATURES
    except (ValueError, IndexError) as exc:
        print(f"kanids: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
