"""Command-line entry point: train, detect, sweep, demo-nullspace.

Every command takes --config (flat key=value file), --seed, and --out; flags
override file values.  All randomness flows from the single seed through the
package PRNG (see rng), so a rerun with the same inputs writes byte-identical
artifacts.  Output files are written atomically (temp file, then rename).

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import baselines, metrics, scoring
from .config import ExperimentConfig, load_experiment_config
from .data import (
    LabeledDataset,
    enumerate_class_combinations,
    generate_gaussian_classes,
    load_csv,
    make_split_spec,
    split_known_unknown,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateInputError,
    DimensionMismatchError,
    InvalidInputError,
    NumericError,
    UndefinedMetricError,
    UnsupportedOperationError,
)
from .network import build_network, forward_with_trace, load_model, save_model
from .rng import derive_seed
from .training import TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

METHODS = ("nusa", "knn", "pca")


def _write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_dataset(cfg: ExperimentConfig, data_path: str | None, seed: int,
                  require_label: bool = True) -> LabeledDataset:
    path = data_path or cfg.data_csv
    if path:
        return load_csv(path, cfg.label_column, require_label=require_label)
    return generate_gaussian_classes(
        cfg.classes, cfg.dim, cfg.separation, cfg.samples_per_class,
        derive_seed(seed, 10),
    )


def _train_config(cfg: ExperimentConfig, seed: int) -> TrainConfig:
    return TrainConfig(
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        epochs=cfg.epochs,
        lam=cfg.lam,
        nusa_sign=cfg.nusa_sign,
        rng_seed=seed,
        nusa_layers=cfg.nusa_layers,
        aggregation=cfg.aggregation,
        early_stop_patience=cfg.early_stop_patience,
    )


def _history_csv(history) -> str:
    lines = ["epoch,loss,accuracy,mean_nusa"]
    lines += [
        f"{h.epoch},{h.loss!r},{h.accuracy!r},{h.mean_nusa!r}" for h in history
    ]
    return "\n".join(lines) + "\n"


def cmd_train(args, cfg: ExperimentConfig) -> int:
    seed = cfg.rng_seed
    data = _load_dataset(cfg, args.data, seed)
    net = build_network(data.dim, list(cfg.hidden_dims), data.num_classes,
                        derive_seed(seed, 11), cfg.activation)
    net, history = train(net, data, _train_config(cfg, derive_seed(seed, 12)))
    model_path = args.out or os.path.join(cfg.out_dir, "model.json")
    os.makedirs(os.path.dirname(os.path.abspath(model_path)), exist_ok=True)
    save_model(net, model_path)
    history_path = args.history or os.path.splitext(model_path)[0] + "_history.csv"
    _write_text(history_path, _history_csv(history))
    last = history[-1]
    print(f"trained {len(history)} epochs on {data.size} samples "
          f"({data.num_classes} classes, dim {data.dim})")
    print(f"final loss {last.loss:.6f}  accuracy {last.accuracy:.4f}  "
          f"mean_nusa {last.mean_nusa:.4f}")
    print(f"model: {model_path}")
    print(f"history: {history_path}")
    return EXIT_OK


def cmd_detect(args, cfg: ExperimentConfig) -> int:
    net = load_model(args.model)
    data = load_csv(args.data, cfg.label_column, require_label=False)
    if data.dim != net.input_dim:
        raise DimensionMismatchError(
            f"model expects dim {net.input_dim}, data has dim {data.dim}"
        )
    ncfg = scoring.NusaConfig(lam=cfg.lam, sign=cfg.nusa_sign,
                              layer_selector=cfg.nusa_layers, aggregation=cfg.aggregation)
    if args.threshold == "auto":
        if not args.calibration:
            raise ConfigError("--threshold auto requires --calibration CSV")
        calibration = load_csv(args.calibration, cfg.label_column, require_label=False)
        if calibration.dim != net.input_dim:
            raise DimensionMismatchError(
                f"model expects dim {net.input_dim}, calibration has dim {calibration.dim}"
            )
        threshold = scoring.calibrate_threshold(net, calibration, ncfg,
                                                cfg.threshold_percentile)
    else:
        try:
            threshold = float(args.threshold)
        except ValueError:
            raise ConfigError(f"--threshold must be a number or 'auto', got {args.threshold!r}")
    reports = scoring.detect_batch(net, data.features, threshold, ncfg)
    lines = ["index,nusa_score,predicted_class,is_outlier"]
    lines += [
        f"{i},{r.aggregate_score!r},{r.predicted_class},{int(r.is_outlier)}"
        for i, r in enumerate(reports)
    ]
    out_path = args.out or os.path.join(cfg.out_dir, "scores.csv")
    _write_text(out_path, "\n".join(lines) + "\n")
    flagged = sum(r.is_outlier for r in reports)
    print(f"threshold {threshold!r}: flagged {flagged} of {len(reports)} samples as outliers")
    print(f"scores: {out_path}")
    return EXIT_OK


def _oriented_outlier_scores(raw: np.ndarray, method: str, aggregation: str) -> np.ndarray:
    # NuSA scores are high for inliers; flip them so higher means outlier.
    if method != "nusa":
        return raw
    if aggregation == "mean":
        return metrics.invert_scores(np.clip(raw, 0.0, 1.0))
    return -raw


def _combination_record(index: int, known, per_method: dict, train_accuracy: float) -> dict:
    return {
        "index": index,
        "known_classes": list(known),
        "train_accuracy": train_accuracy,
        "methods": per_method,
    }


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    seed = cfg.rng_seed
    data = _load_dataset(cfg, args.data, seed)
    num_known = args.num_known or cfg.num_known
    if data.num_classes < num_known + 1:
        raise DataError(
            f"dataset has {data.num_classes} classes; need at least {num_known + 1}"
        )
    combos = enumerate_class_combinations(data.num_classes, num_known)
    limit = cfg.limit if args.limit is None else args.limit
    if limit:
        combos = combos[:limit]
    out_dir = args.out or cfg.out_dir
    roc_curves: dict[str, list] = {m: [] for m in METHODS}
    pr_curves: dict[str, list] = {m: [] for m in METHODS}
    pooled: dict[str, dict[str, list]] = {m: {"inlier": [], "outlier": []} for m in METHODS}
    records: list[dict] = []
    failures = 0
    for index, known in enumerate(combos):
        try:
            records.append(_run_combination(
                cfg, data, index, known, seed, roc_curves, pr_curves, pooled))
        except Exception as exc:  # keep sweeping; report at the end
            failures += 1
            records.append({"index": index, "known_classes": list(known),
                            "error": f"{type(exc).__name__}: {exc}"})
    succeeded = len(combos) - failures
    mean_auc = {}
    for method in METHODS:
        aucs = [r["methods"][method]["auc"] for r in records if "methods" in r]
        mean_auc[method] = float(np.mean(aucs)) if aucs else None
    summary = {
        "num_known": num_known,
        "num_combinations": len(combos),
        "failures": failures,
        "train_fraction": cfg.train_fraction,
        "grid_size": cfg.grid_size,
        "mean_auc": mean_auc,
        "combinations": records,
    }
    _write_text(os.path.join(out_dir, "metrics.json"),
                json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if succeeded:
        for method in METHODS:
            roc_avg = metrics.average_curves(roc_curves[method], cfg.grid_size)
            pr_avg = metrics.average_curves(pr_curves[method], cfg.grid_size)
            _write_text(os.path.join(out_dir, f"roc_{method}.csv"), metrics.curve_csv(roc_avg))
            _write_text(os.path.join(out_dir, f"pr_{method}.csv"), metrics.curve_csv(pr_avg))
            for group in ("inlier", "outlier"):
                counts = metrics.histogram(np.asarray(pooled[method][group]),
                                           cfg.histogram_bins)
                _write_text(os.path.join(out_dir, f"hist_{method}_{group}s.csv"),
                            metrics.histogram_csv(counts))
    for method in METHODS:
        shown = "n/a" if mean_auc[method] is None else f"{mean_auc[method]:.4f}"
        print(f"{method}: mean AUC {shown} over {succeeded} combinations")
    if failures:
        print(f"{failures} of {len(combos)} combinations failed", file=sys.stderr)
    print(f"artifacts: {out_dir}")
    return EXIT_OK if succeeded else EXIT_NUMERIC


def _run_combination(cfg: ExperimentConfig, data: LabeledDataset, index: int, known,
                     seed: int, roc_curves, pr_curves, pooled) -> dict:
    spec = make_split_spec(known, data.num_classes, cfg.train_fraction,
                           derive_seed(seed, 20, index))
    train_set, test_in, test_out = split_known_unknown(data, spec)
    net = build_network(data.dim, list(cfg.hidden_dims), len(known),
                        derive_seed(seed, 21, index), cfg.activation)
    net, history = train(net, train_set, _train_config(cfg, derive_seed(seed, 22, index)))
    test_features = np.vstack([test_in.features, test_out.features])
    truth = np.concatenate([
        np.zeros(test_in.size, dtype=bool),
        np.ones(test_out.size, dtype=bool),
    ])
    ncfg = scoring.NusaConfig(lam=cfg.lam, sign=cfg.nusa_sign,
                              layer_selector=cfg.nusa_layers, aggregation=cfg.aggregation)
    knn = baselines.knn_fit(train_set, min(cfg.knn_k, train_set.size))
    pca = baselines.pca_fit(train_set, cfg.pca_components)
    raw = {
        "nusa": scoring.aggregate_scores(net, test_features, ncfg),
        "knn": baselines.knn_score_many(knn, test_features),
        "pca": baselines.pca_score_many(pca, test_features),
    }
    per_method = {}
    for method in METHODS:
        oriented = _oriented_outlier_scores(raw[method], method, cfg.aggregation)
        normalized = metrics.normalize_scores(oriented)
        roc = metrics.roc_curve(normalized, truth)
        pr = metrics.pr_curve(normalized, truth)
        roc_curves[method].append(roc)
        pr_curves[method].append(pr)
        pooled[method]["inlier"].extend(normalized[~truth].tolist())
        pooled[method]["outlier"].extend(normalized[truth].tolist())
        per_method[method] = {
            "auc": metrics.auc(roc),
            "n_pos": int(truth.sum()),
            "n_neg": int(truth.size - truth.sum()),
        }
    return _combination_record(index, known, per_method, history[-1].accuracy)


def cmd_demo_nullspace(args, cfg: ExperimentConfig) -> int:
    net = load_model(args.model)
    data = load_csv(args.data, cfg.label_column, require_label=False)
    if data.dim != net.input_dim:
        raise DimensionMismatchError(
            f"model expects dim {net.input_dim}, data has dim {data.dim}"
        )
    if not (0 <= args.sample_index < data.size):
        raise DataError(f"sample index {args.sample_index} out of range for {data.size} rows")
    x = data.features[args.sample_index]
    perturbed = scoring.null_space_perturbation(net, x, args.magnitude, cfg.rng_seed)
    original_out = forward_with_trace(net, x).output
    perturbed_out = forward_with_trace(net, perturbed).output
    delta = float(np.max(np.abs(original_out - perturbed_out)))
    norm = float(np.linalg.norm(perturbed - x))
    print("original output:  " + " ".join(f"{v:.9f}" for v in original_out))
    print("perturbed output: " + " ".join(f"{v:.9f}" for v in perturbed_out))
    print(f"max class-probability delta: {delta!r}")
    print(f"perturbation norm: {norm!r}")
    out_path = args.out or os.path.join(cfg.out_dir, "perturbed_sample.csv")
    header = ",".join(f"f{i}" for i in range(data.dim))
    row = ",".join(repr(float(v)) for v in perturbed)
    _write_text(out_path, header + "\n" + row + "\n")
    print(f"perturbed sample: {out_path}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nusa",
        description="Train dense classifiers with the null-space score term and "
                    "evaluate their outlier detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
        p.add_argument("--out", help="output path (command specific)")

    p_train = sub.add_parser("train", help="train a model, write model JSON + history CSV")
    common(p_train)
    p_train.add_argument("--data", help="feature CSV (default: synthetic per config)")
    p_train.add_argument("--history", help="history CSV path")
    p_train.add_argument("--lambda", dest="lam", type=float, help="score term weight")
    p_train.add_argument("--epochs", type=int)
    p_train.set_defaults(handler=cmd_train, overrides=("lam", "epochs"))

    p_detect = sub.add_parser("detect", help="score samples and flag outliers")
    common(p_detect)
    p_detect.add_argument("--model", required=True)
    p_detect.add_argument("--data", required=True)
    p_detect.add_argument("--threshold", required=True,
                          help="numeric score threshold, or 'auto' to calibrate")
    p_detect.add_argument("--calibration", help="calibration CSV for --threshold auto")
    p_detect.set_defaults(handler=cmd_detect, overrides=())

    p_sweep = sub.add_parser("sweep", help="run every known/unknown class combination")
    common(p_sweep)
    p_sweep.add_argument("--data", help="feature CSV (default: synthetic per config)")
    p_sweep.add_argument("--num-known", type=int, dest="num_known")
    p_sweep.add_argument("--limit", type=int, help="cap the number of combinations")
    p_sweep.set_defaults(handler=cmd_sweep, overrides=())

    p_demo = sub.add_parser("demo-nullspace",
                            help="perturb a sample inside the first layer's null space")
    common(p_demo)
    p_demo.add_argument("--model", required=True)
    p_demo.add_argument("--data", required=True)
    p_demo.add_argument("--sample-index", type=int, default=0, dest="sample_index")
    p_demo.add_argument("--magnitude", type=float, default=1000.0)
    p_demo.set_defaults(handler=cmd_demo_nullspace, overrides=())
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        overrides = {"rng_seed": args.seed}
        for name in args.overrides:
            overrides[name] = getattr(args, name)
        cfg = load_experiment_config(args.config, overrides)
        return args.handler(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InvalidInputError, DimensionMismatchError, DegenerateInputError,
            UndefinedMetricError, UnsupportedOperationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
