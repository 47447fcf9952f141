#!/usr/bin/env python3
"""The full pipeline through the command line, start to finish.

Every subcommand writes into a content-addressed directory under --out and
drops a manifest.json naming its parameters and artifacts, so a rerun with
identical flags reproduces identical bytes.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    cmd = [sys.executable, "-m", "genprint.cli", *map(str, args)]
    print("$ genprint", " ".join(map(str, args)))
    res = subprocess.run(cmd, capture_output=True, text=True)
    if res.returncode != 0:
        sys.stderr.write(res.stderr)
        raise SystemExit(res.returncode)
    return res


def only_dir(root, sub):
    # each subcommand nests artifacts under a parameter-hash tag
    entries = sorted((Path(root) / sub).iterdir())
    return entries[0]


with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "run"

    run("synth", "--dim", 24, "--separation", 7.0, "--samples-per-class", 40,
        "--seed", 3, "--out", out)
    synth_dir = only_dir(out, "synth")
    fpros = sorted(synth_dir.glob("*.fpro"))
    print("  ->", len(fpros), "class files in", synth_dir.name)

    run("split", "--features", *fpros, "--train-fraction", "0.8", "--seed", 1, "--out", out)
    split_dir = only_dir(out, "split")

    trains = sorted(split_dir.glob("*.train.fpro"))
    vals = sorted(split_dir.glob("*.val.fpro"))

    run("grid-knn", "--train", *trains, "--val", *vals,
        "--support-sizes", 8, 16, "--ks", 1, 3, "--metrics", "euclidean", "correlation",
        "--seed", 0, "--out", out)
    grid_dir = only_dir(out, "grid-knn")
    print("  -> grid artifacts:", ", ".join(p.name for p in sorted(grid_dir.iterdir())))

    run("train-mlp", "--task", "attribute", "--train", *trains, "--val", *vals,
        "--hidden", 32, "--learning-rate", 0.05, "--patience", 8, "--max-epochs", 40,
        "--batch-size", 32, "--seed", 11, "--out", out)
    mlp_dir = only_dir(out, "train-mlp")
    model = next(mlp_dir.glob("*.fmlp"))

    run("attribute", "--model", model, "--features", *vals, "--out", out)
    att_dir = only_dir(out, "attribute")

    run("report", "--input", att_dir / "confusion.csv", "--format", "md", "--out", out)
    rep_dir = only_dir(out, "report")
    print("\n" + (rep_dir / "confusion.md").read_text())

    manifest = json.loads((att_dir / "manifest.json").read_text())
    print("attribute manifest keys:", sorted(manifest))
