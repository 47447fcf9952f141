"""Command-line workflow: synthesize, split, classify, train, explain, report.

Every subcommand writes into `<out>/<subcommand>/<tag>/` next to a
manifest.json recording the resolved parameters and input paths. Paths in
the manifest are stored relative to the output root, and no artifact embeds
a timestamp or absolute path, so two runs with the same inputs and seeds
produce byte-identical trees. The default tag is a short hash of the
manifest parameters.

Progress goes to standard error; files carry all data. Exit status is 0 on
success, 1 on any runtime error (missing file, bad schema, bad data), and 2
for command-line usage errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, evaluation, explain, neural, synthetic
from .feature_store import (
    ATTRIBUTION_CLASSES,
    DETECTION_K_GRID,
    Authenticity,
    FeatureSet,
    read_feature_file,
    split_train_val,
    write_feature_file,
)
from .metrics import ALL_METRICS, DistanceMetric

_METRIC_CHOICES = tuple(m.value for m in ALL_METRICS)


class CliError(ValueError):
    """User-facing failure: bad inputs, missing files, schema mismatch."""


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _relpath(path: str | Path, root: Path) -> str:
    p = Path(path).resolve()
    try:
        return p.relative_to(root.resolve()).as_posix()
    except ValueError:
        return Path(path).as_posix()


def _make_tag(subcommand: str, params: dict) -> str:
    blob = json.dumps({"subcommand": subcommand, "parameters": params}, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:10]


def _prepare_outdir(args, subcommand: str, params: dict) -> Path:
    tag = args.tag if args.tag else _make_tag(subcommand, params)
    outdir = Path(args.out) / subcommand / tag
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(outdir: Path, subcommand: str, params: dict, inputs: list[str], outputs: list[str]) -> None:
    _write_json(
        outdir / "manifest.json",
        {
            "subcommand": subcommand,
            "parameters": params,
            "inputs": sorted(inputs),
            "outputs": sorted(outputs),
        },
    )


def _read_features(path: str) -> FeatureSet:
    if not Path(path).exists():
        raise CliError(f"feature file not found: {path}")
    return read_feature_file(path)


def _class_label(path: str, fset: FeatureSet) -> str:
    if len(fset) == 0:
        raise CliError(f"{path}: empty feature set")
    auths = {r.authenticity for r in fset.records}
    gens = fset.generators_present()
    if auths == {Authenticity.REAL} and not gens:
        return "Real"
    if auths == {Authenticity.FAKE} and len(gens) == 1:
        return gens[0].value
    raise CliError(f"{path}: expected a single-class file, found a mixture")


def _load_class_sets(paths: list[str]) -> dict[str, FeatureSet]:
    out: dict[str, FeatureSet] = {}
    for path in paths:
        fset = _read_features(path)
        label = _class_label(path, fset)
        if label in out:
            raise CliError(f"class {label!r} appears in more than one input file")
        out[label] = fset
    return out


def _ordered_class_list(sets: dict[str, FeatureSet]) -> list[FeatureSet]:
    missing = [c for c in ATTRIBUTION_CLASSES if c not in sets]
    if missing:
        raise CliError(f"missing class file(s): {', '.join(missing)}")
    return [sets[c] for c in ATTRIBUTION_CLASSES]


def _detection_dicts(train_paths: list[str], val_paths: list[str]):
    train_pairs = synthetic.detection_pairs(_load_class_sets(train_paths))
    val_pairs = synthetic.detection_pairs(_load_class_sets(val_paths))
    if set(train_pairs) != set(val_pairs):
        raise CliError("train and validation files cover different generators")
    return train_pairs, val_pairs


def _train_config(args, seed: int) -> neural.TrainConfig:
    return neural.TrainConfig(
        learning_rate=args.learning_rate,
        patience=args.patience,
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        weight_decay=args.weight_decay,
        seed=seed,
    )


def _derived_seed(*parts: int) -> int:
    return int(np.random.default_rng(list(parts)).integers(2**63))


def _emit_table(outdir: Path, stem: str, obj, fmt: str) -> list[str]:
    """Write the CSV data file, plus a rendered form when requested."""
    names = [f"{stem}.csv"]
    (outdir / f"{stem}.csv").write_text(evaluation.emit_report(obj, "csv"))
    if fmt == "md":
        names.append(f"{stem}.md")
        (outdir / f"{stem}.md").write_text(evaluation.emit_report(obj, "md"))
    return names


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    kwargs = {
        "dim": 1280,
        "separation": 6.0,
        "sigma": 1.0,
        "samples_per_class": 150,
        "seed": 7,
        "family": False,
        "family_separation": 0.5,
        "shared_separation": 7.5,
        "background_scale": 0.2,
    }
    if args.config:
        if not Path(args.config).exists():
            raise CliError(f"config file not found: {args.config}")
        kwargs.update(synthetic.parse_world_kwargs(Path(args.config).read_text()))
    for key in ("dim", "separation", "sigma", "samples_per_class"):
        value = getattr(args, key)
        if value is not None:
            kwargs[key] = value
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.family:
        kwargs["family"] = True
    if args.classes:
        kwargs["classes"] = tuple(args.classes)

    spec = synthetic.grid_world(**kwargs)
    params = dict(kwargs)
    if "classes" in params:
        params["classes"] = list(params["classes"])
    outdir = _prepare_outdir(args, "synth", params)

    sets = synthetic.generate(spec)
    outputs = []
    for label in spec.class_names:
        name = f"{label}.fpro"
        write_feature_file(sets[label], outdir / name)
        outputs.append(name)
        _log(f"synth: wrote {label} ({len(sets[label])} records, dim {spec.dim})")
    cfg_text = synthetic.format_world_config(**kwargs)
    (outdir / "world.cfg").write_text(cfg_text)
    outputs.append("world.cfg")
    _write_manifest(outdir, "synth", params, [], outputs)
    print(outdir)
    return 0


def cmd_split(args) -> int:
    root = Path(args.out)
    params = {
        "features": [_relpath(p, root) for p in args.features],
        "train_fraction": args.train_fraction,
        "seed": args.seed,
    }
    outdir = _prepare_outdir(args, "split", params)
    outputs = []
    for path in args.features:
        fset = _read_features(path)
        pair = split_train_val(fset, args.train_fraction, args.seed)
        stem = Path(path).stem
        for side, part in (("train", pair.train), ("val", pair.validation)):
            name = f"{stem}.{side}.fpro"
            write_feature_file(part, outdir / name)
            outputs.append(name)
        _log(f"split: {stem} -> {len(pair.train)} train / {len(pair.validation)} val")
    _write_manifest(outdir, "split", params, params["features"], outputs)
    print(outdir)
    return 0


def cmd_detect(args) -> int:
    root = Path(args.out)
    params = {
        "train": [_relpath(p, root) for p in args.train],
        "val": [_relpath(p, root) for p in args.val],
        "support_size": args.support_size,
        "k": args.k,
        "metric": args.metric,
        "seed": args.seed,
        "format": args.format,
    }
    outdir = _prepare_outdir(args, "detect", params)
    train_pairs, val_pairs = _detection_dicts(args.train, args.val)
    matrix = evaluation.knn_detection_matrix(
        train_pairs, val_pairs, args.support_size, args.k, DistanceMetric(args.metric), args.seed
    )
    outputs = _emit_table(outdir, "matrix", matrix, args.format)
    summary = {
        "metric": args.metric,
        "support_size": args.support_size,
        "k": args.k,
        "grand_mean": matrix.grand_mean(),
        "row_means": {n: float(v) for n, v in zip(matrix.row_labels, matrix.row_means())},
    }
    _write_json(outdir / "summary.json", summary)
    outputs.append("summary.json")
    _write_manifest(outdir, "detect", params, params["train"] + params["val"], outputs)
    _log(f"detect: grand mean {matrix.grand_mean():.2f}")
    print(outdir)
    return 0


def cmd_grid_knn(args) -> int:
    root = Path(args.out)
    metrics = tuple(DistanceMetric(m) for m in args.metrics)
    params = {
        "train": [_relpath(p, root) for p in args.train],
        "val": [_relpath(p, root) for p in args.val],
        "support_sizes": list(args.support_sizes),
        "ks": list(args.ks),
        "metrics": [m.value for m in metrics],
        "seed": args.seed,
        "format": args.format,
    }
    outdir = _prepare_outdir(args, "grid-knn", params)
    train_pairs, val_pairs = _detection_dicts(args.train, args.val)
    grid = evaluation.grid_search_knn_detection(
        train_pairs,
        val_pairs,
        metrics,
        tuple(args.support_sizes),
        tuple(args.ks),
        args.seed,
        jobs=args.jobs,
        progress=_log,
    )
    outputs = _emit_table(outdir, "grid", grid, args.format)
    best = grid.best()
    _write_json(
        outdir / "best.json",
        {
            "metric": best.metric,
            "support_size": best.support_size,
            "k": best.k,
            "accuracy": best.accuracy,
        },
    )
    outputs.append("best.json")
    _write_manifest(outdir, "grid-knn", params, params["train"] + params["val"], outputs)
    _log(
        f"grid-knn: best metric={best.metric} |S|={best.support_size} "
        f"k={best.k} accuracy={best.accuracy:.2f}"
    )
    print(outdir)
    return 0


def cmd_grid_knn_attrib(args) -> int:
    root = Path(args.out)
    params = {
        "train": [_relpath(p, root) for p in args.train],
        "val": [_relpath(p, root) for p in args.val],
        "support_sizes": list(args.support_sizes),
        "ks": list(args.ks),
        "metric": args.metric,
        "seed": args.seed,
        "format": args.format,
    }
    outdir = _prepare_outdir(args, "grid-knn-attrib", params)
    trains = _ordered_class_list(_load_class_sets(args.train))
    vals = _ordered_class_list(_load_class_sets(args.val))
    grid = evaluation.grid_search_knn_attribution(
        trains,
        vals,
        tuple(args.support_sizes),
        tuple(args.ks),
        DistanceMetric(args.metric),
        args.seed,
        jobs=args.jobs,
        progress=_log,
    )
    outputs = _emit_table(outdir, "grid", grid, args.format)
    best = grid.best()
    _write_json(
        outdir / "best.json",
        {
            "metric": best.metric,
            "support_size": best.support_size,
            "k": best.k,
            "accuracy": best.accuracy,
        },
    )
    outputs.append("best.json")
    _write_manifest(outdir, "grid-knn-attrib", params, params["train"] + params["val"], outputs)
    _log(f"grid-knn-attrib: best |S|={best.support_size} k={best.k} accuracy={best.accuracy:.2f}")
    print(outdir)
    return 0


def cmd_train_mlp(args) -> int:
    root = Path(args.out)
    hidden = args.hidden if args.hidden is not None else ([640] if args.task == "attribute" else [320])
    params = {
        "task": args.task,
        "train": [_relpath(p, root) for p in args.train],
        "val": [_relpath(p, root) for p in args.val],
        "hidden": list(hidden),
        "learning_rate": args.learning_rate,
        "patience": args.patience,
        "max_epochs": args.max_epochs,
        "batch_size": args.batch_size,
        "weight_decay": args.weight_decay,
        "seed": args.seed,
        "format": args.format,
    }
    outdir = _prepare_outdir(args, "train-mlp", params)
    outputs: list[str] = []

    if args.task == "attribute":
        trains = _ordered_class_list(_load_class_sets(args.train))
        vals = _ordered_class_list(_load_class_sets(args.val))
        x_tr = np.concatenate([s.matrix() for s in trains])
        y_tr = np.concatenate([s.attribution_labels() for s in trains])
        x_val = np.concatenate([s.matrix() for s in vals])
        y_val = np.concatenate([s.attribution_labels() for s in vals])
        seed = _derived_seed(args.seed, 0)
        arch = neural.MlpArchitecture(trains[0].dim, tuple(hidden), len(ATTRIBUTION_CLASSES), neural.OUTPUT_SOFTMAX)
        model = neural.init_model(arch, seed)
        cfg = _train_config(args, seed)
        best, history = neural.train_arrays(
            model, x_tr, y_tr, x_val, y_val, cfg,
            progress=lambda e, l, a: _log(f"epoch {e}: loss {l:.4f} val_acc {a:.4f}"),
        )
        neural.write_model(best, outdir / "model.fmlp")
        outputs.append("model.fmlp")
        _write_json(
            outdir / "history.json",
            {
                "train_loss": history.train_loss,
                "val_accuracy": history.val_accuracy,
                "best_epoch": history.best_epoch,
                "stopped_epoch": history.stopped_epoch,
                "stop_reason": history.stop_reason,
            },
        )
        outputs.append("history.json")
        _write_json(
            outdir / "summary.json",
            {
                "task": "attribute",
                "best_val_accuracy": history.val_accuracy[history.best_epoch - 1],
                "best_epoch": history.best_epoch,
            },
        )
        outputs.append("summary.json")
        _log(f"train-mlp: best val accuracy {history.val_accuracy[history.best_epoch - 1]:.4f}")
    else:
        train_pairs, val_pairs = _detection_dicts(args.train, args.val)
        names = evaluation.ordered_generator_names(train_pairs.keys())
        rows = []
        histories = {}
        for gi, source in enumerate(names):
            seed = _derived_seed(args.seed, gi)
            arch = neural.MlpArchitecture(train_pairs[source].dim, tuple(hidden), 2, neural.OUTPUT_SOFTMAX)
            model = neural.init_model(arch, seed)
            cfg = _train_config(args, seed)
            best, history = neural.train_early_stop(model, train_pairs[source], val_pairs[source], cfg)
            name = f"model_{source}.fmlp"
            neural.write_model(best, outdir / name)
            outputs.append(name)
            histories[source] = {
                "best_epoch": history.best_epoch,
                "stopped_epoch": history.stopped_epoch,
                "best_val_accuracy": history.val_accuracy[history.best_epoch - 1],
            }
            rows.append(
                evaluation.cross_generator_eval(lambda q, m=best: neural.predict(m, q), val_pairs)[1]
            )
            _log(f"train-mlp: {source} best val {histories[source]['best_val_accuracy']:.4f}")
        matrix = evaluation.EvalMatrix(names, names, np.stack(rows))
        outputs.extend(_emit_table(outdir, "matrix", matrix, args.format))
        _write_json(outdir / "history.json", histories)
        outputs.append("history.json")
        _write_json(
            outdir / "summary.json",
            {"task": "detect", "grand_mean": matrix.grand_mean()},
        )
        outputs.append("summary.json")
        _log(f"train-mlp: cross-generator grand mean {matrix.grand_mean():.2f}")

    _write_manifest(outdir, "train-mlp", params, params["train"] + params["val"], outputs)
    print(outdir)
    return 0


def cmd_attribute(args) -> int:
    root = Path(args.out)
    params = {
        "model": _relpath(args.model, root),
        "features": [_relpath(p, root) for p in args.features],
        "format": args.format,
    }
    outdir = _prepare_outdir(args, "attribute", params)
    if not Path(args.model).exists():
        raise CliError(f"model file not found: {args.model}")
    model = neural.read_model(args.model)
    if model.architecture.output_units != len(ATTRIBUTION_CLASSES):
        raise CliError(
            f"model has {model.architecture.output_units} outputs; attribution needs "
            f"{len(ATTRIBUTION_CLASSES)}"
        )
    sets = _ordered_class_list(_load_class_sets(args.features))
    cm = evaluation.confusion(lambda q: neural.predict(model, q), sets)
    outputs = _emit_table(outdir, "confusion", cm, args.format)
    _write_json(
        outdir / "accuracy.json",
        {
            "overall_accuracy_percent": 100.0 * cm.overall_accuracy(),
            "per_class_recall_percent": {
                name: float(100.0 * r)
                for name, r in zip(cm.class_names, cm.per_class_recall())
            },
        },
    )
    outputs.append("accuracy.json")
    _write_manifest(outdir, "attribute", params, [params["model"], *params["features"]], outputs)
    _log(f"attribute: overall accuracy {100.0 * cm.overall_accuracy():.2f}%")
    print(outdir)
    return 0


def cmd_probe_layers(args) -> int:
    root = Path(args.out)
    params = {
        "features": [_relpath(p, root) for p in args.features],
        "train_fraction": args.train_fraction,
        "learning_rate": args.learning_rate,
        "patience": args.patience,
        "max_epochs": args.max_epochs,
        "batch_size": args.batch_size,
        "weight_decay": args.weight_decay,
        "seed": args.seed,
    }
    outdir = _prepare_outdir(args, "probe-layers", params)
    lines = ["layer,accuracy"]
    results = []
    for i, path in enumerate(args.features):
        fset = _read_features(path)
        pair = split_train_val(fset, args.train_fraction, args.seed)
        cfg = _train_config(args, _derived_seed(args.seed, i))
        _model, acc = neural.linear_probe(pair.train, pair.validation, cfg)
        results.append((fset.layer_tag, 100.0 * acc))
        lines.append(f"{fset.layer_tag},{100.0 * acc!r}")
        _log(f"probe-layers: {fset.layer_tag} accuracy {100.0 * acc:.2f}%")
    (outdir / "probe.csv").write_text("\n".join(lines) + "\n")
    outputs = ["probe.csv"]
    best_layer, best_acc = max(results, key=lambda r: r[1])
    _write_json(outdir / "best.json", {"layer": best_layer, "accuracy": best_acc})
    outputs.append("best.json")
    _write_manifest(outdir, "probe-layers", params, params["features"], outputs)
    print(outdir)
    return 0


def cmd_explain(args) -> int:
    root = Path(args.out)
    params = {
        "model": _relpath(args.model, root),
        "features": [_relpath(p, root) for p in args.features],
        "background_size": args.background_size,
        "samples": args.samples,
        "n_samples": args.n_samples,
        "top_k": args.top_k,
        "seed": args.seed,
    }
    outdir = _prepare_outdir(args, "explain", params)
    if not Path(args.model).exists():
        raise CliError(f"model file not found: {args.model}")
    model = neural.read_model(args.model)
    sets = _ordered_class_list(_load_class_sets(args.features))

    pool = np.concatenate([s.matrix() for s in sets])
    if args.background_size > pool.shape[0]:
        raise CliError(
            f"background size {args.background_size} exceeds pooled samples {pool.shape[0]}"
        )
    bg_rng = np.random.default_rng([args.seed, 0])
    background = pool[np.sort(bg_rng.choice(pool.shape[0], args.background_size, replace=False))]

    class_samples = []
    attributions = []
    for ci, fset in enumerate(sets):
        mat = fset.matrix()
        take = min(args.samples, mat.shape[0])
        rng = np.random.default_rng([args.seed, 1 + ci])
        rows = np.sort(rng.choice(mat.shape[0], take, replace=False))
        samples = mat[rows]
        class_samples.append(samples)
        attributions.append(
            explain.expected_gradients_batch(
                model, samples, ci, background, args.n_samples, seed=[args.seed, 100 + ci]
            )
        )
        _log(f"explain: class {ATTRIBUTION_CLASSES[ci]} attributed over {take} samples")

    report = explain.top_k_per_class(attributions, ATTRIBUTION_CLASSES, k=args.top_k)

    sign_table: dict[str, dict[str, float]] = {}
    n_cls = len(ATTRIBUTION_CLASSES)
    for i in range(n_cls):
        for j in range(i + 1, n_cls):
            shared = sorted(set(report.indices[i].tolist()) & set(report.indices[j].tolist()))
            if not shared:
                continue
            common = np.concatenate([class_samples[i], class_samples[j]])
            attr_i = explain.expected_gradients_batch(
                model, common, i, background, args.n_samples, seed=[args.seed, 200 + i * n_cls + j]
            )
            attr_j = explain.expected_gradients_batch(
                model, common, j, background, args.n_samples, seed=[args.seed, 300 + i * n_cls + j]
            )
            agreement = explain.sign_agreement(shared, attr_i, attr_j)
            key = f"{ATTRIBUTION_CLASSES[i]}|{ATTRIBUTION_CLASSES[j]}"
            sign_table[key] = {str(f): float(a) for f, a in zip(shared, agreement)}
            _log(f"explain: sign agreement for {key} over {len(shared)} shared features")

    (outdir / "report.json").write_text(explain.report_json(report, sign_table))
    outputs = ["report.json"]
    for ci, name in enumerate(ATTRIBUTION_CLASSES):
        csv_name = f"beeswarm_{name}.csv"
        (outdir / csv_name).write_text(
            explain.beeswarm_csv(class_samples[ci], attributions[ci], report.indices[ci])
        )
        outputs.append(csv_name)
    _write_manifest(outdir, "explain", params, [params["model"], *params["features"]], outputs)
    print(outdir)
    return 0


def cmd_report(args) -> int:
    root = Path(args.out)
    params = {
        "inputs": [_relpath(p, root) for p in args.inputs],
        "format": args.format,
    }
    outdir = _prepare_outdir(args, "report", params)
    outputs = []
    for path in args.inputs:
        if not Path(path).exists():
            raise CliError(f"input not found: {path}")
        text = Path(path).read_text()
        header = text.splitlines()[0] if text else ""
        if header.startswith("source,target"):
            obj = evaluation.parse_matrix_csv(text)
        elif header.startswith("metric,support"):
            obj = evaluation.parse_grid_csv(text)
        elif header.startswith("true,predicted"):
            obj = evaluation.parse_confusion_csv(text)
        else:
            raise CliError(f"{path}: unrecognized CSV schema")
        rendered = evaluation.emit_report(obj, "md" if args.format == "md" else "csv")
        suffix = "md" if args.format == "md" else "csv"
        name = f"{Path(path).stem}.{suffix}"
        (outdir / name).write_text(rendered)
        outputs.append(name)
        _log(f"report: rendered {path} -> {name}")
    _write_manifest(outdir, "report", params, params["inputs"], outputs)
    print(outdir)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output root directory (default: out)")
    p.add_argument("--tag", default=None, help="output subdirectory name (default: parameter hash)")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--learning-rate", type=float, default=3e-4)
    p.add_argument("--patience", type=int, default=15)
    p.add_argument("--max-epochs", type=int, default=500)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--weight-decay", type=float, default=0.01)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genprint",
        description="Synthetic-image forensics over diffusion feature prototypes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic prototype world as FPRO files")
    p.add_argument("--config", default=None, help="key = value world config file")
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--separation", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--samples-per-class", type=int, default=None)
    p.add_argument("--family", action="store_true", help="make SDV14/SDV15 nearly identical")
    p.add_argument("--classes", nargs="+", default=None)
    p.add_argument("--seed", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="stratified train/validation split of FPRO files")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("detect", help="cross-generator k-NN detection at one configuration")
    p.add_argument("--train", nargs="+", required=True, help="per-class train FPRO files")
    p.add_argument("--val", nargs="+", required=True, help="per-class validation FPRO files")
    p.add_argument("--support-size", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--metric", choices=_METRIC_CHOICES, default="correlation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("md", "csv"), default="md")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("grid-knn", help="detection hyperparameter sweep (metric x size x k)")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--val", nargs="+", required=True)
    p.add_argument("--support-sizes", nargs="+", type=int, required=True)
    p.add_argument("--ks", nargs="+", type=int, default=list(DETECTION_K_GRID))
    p.add_argument("--metrics", nargs="+", choices=_METRIC_CHOICES, default=list(_METRIC_CHOICES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("md", "csv"), default="md")
    _add_common(p)
    p.set_defaults(func=cmd_grid_knn)

    p = sub.add_parser("grid-knn-attrib", help="9-class attribution sweep (size x k)")
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--val", nargs="+", required=True)
    p.add_argument("--support-sizes", nargs="+", type=int, required=True)
    p.add_argument("--ks", nargs="+", type=int, default=list(DETECTION_K_GRID))
    p.add_argument("--metric", choices=_METRIC_CHOICES, default="correlation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("md", "csv"), default="md")
    _add_common(p)
    p.set_defaults(func=cmd_grid_knn_attrib)

    p = sub.add_parser("train-mlp", help="train detection or attribution MLPs")
    p.add_argument("--task", choices=("detect", "attribute"), required=True)
    p.add_argument("--train", nargs="+", required=True)
    p.add_argument("--val", nargs="+", required=True)
    p.add_argument("--hidden", nargs="*", type=int, default=None,
                   help="hidden widths; empty for a linear model (default: task-specific)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("md", "csv"), default="md")
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train_mlp)

    p = sub.add_parser("attribute", help="evaluate a trained attribution model")
    p.add_argument("--model", required=True, help="FMLP checkpoint")
    p.add_argument("--features", nargs="+", required=True, help="per-class eval FPRO files")
    p.add_argument("--format", choices=("md", "csv"), default="md")
    _add_common(p)
    p.set_defaults(func=cmd_attribute)

    p = sub.add_parser("probe-layers", help="linear-probe accuracy per layer-tagged FPRO file")
    p.add_argument("--features", nargs="+", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_probe_layers)

    p = sub.add_parser("explain", help="feature attributions, rankings, and overlap")
    p.add_argument("--model", required=True)
    p.add_argument("--features", nargs="+", required=True, help="per-class eval FPRO files")
    p.add_argument("--background-size", type=int, default=200)
    p.add_argument("--samples", type=int, default=50, help="eval samples per class")
    p.add_argument("--n-samples", type=int, default=200, help="draws per attribution")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("report", help="render saved CSV artifacts as markdown tables")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--format", choices=("md", "csv"), default="md")
    _add_common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"genprint: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
