"""Command-line entry points.

    sdproto layers [--weights DIR]
    sdproto extract --images <dir|manifest.csv|file...> --label real|<generator>
                    --layer decoder_16_0 --weights DIR --out features.fpro

`extract` consumes either a directory / explicit list of images labeled
uniformly via --label, or a manifest CSV (path,authenticity,generator,
class_hint) carrying per-image labels.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .config import PipelineConfig, sd15_config
from .extract import ExtractionJob, ImageEntry, load_pipeline, run_job
from .fpro import FAKE, GENERATOR_NAMES, REAL
from .layers import layer_menu, parse_address
from .manifest import read_manifest

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".webp")

LABELS = ("real",) + GENERATOR_NAMES


def _log(message: str) -> None:
    print(message, file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdproto",
        description="Prototype extraction from a pre-trained denoising U-Net.")
    parser.add_argument("--version", action="version", version=f"sdproto {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_layers = sub.add_parser(
        "layers", help="list tappable layer addresses and their widths")
    p_layers.add_argument("--weights", help="weights directory holding config.json")

    p_extract = sub.add_parser(
        "extract", help="turn images into one FPRO prototype file")
    p_extract.add_argument(
        "--images", nargs="+", required=True,
        help="an image directory, a manifest CSV, or explicit image paths")
    p_extract.add_argument(
        "--label", choices=LABELS,
        help="uniform label when --images is not a manifest")
    p_extract.add_argument("--layer", default="decoder_16_0",
                           help="layer address (default: decoder_16_0)")
    p_extract.add_argument("--weights", required=True,
                           help="directory with config.json and *.pt state dicts")
    p_extract.add_argument("--out", required=True, help="output FPRO path")
    p_extract.add_argument("--batch-size", type=int, default=8)
    return parser


def _collect_entries(args) -> tuple[ImageEntry, ...]:
    first = Path(args.images[0])
    if len(args.images) == 1 and first.is_dir():
        paths = sorted(p for p in first.iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
        if not paths:
            raise ValueError(f"no images in directory {first}")
        return _uniform_entries(paths, [p.name for p in paths], args.label)
    if len(args.images) == 1 and first.suffix.lower() == ".csv":
        if args.label is not None:
            raise ValueError("--label conflicts with a manifest; "
                             "the manifest carries per-image labels")
        return read_manifest(first)
    paths = [Path(p) for p in args.images]
    for p in paths:
        if not p.is_file():
            raise ValueError(f"image not found: {p}")
    return _uniform_entries(paths, [str(p) for p in args.images], args.label)


def _uniform_entries(paths, ids, label) -> tuple[ImageEntry, ...]:
    if label is None:
        raise ValueError("--label is required unless --images is a manifest CSV")
    if label == "real":
        authenticity, generator = REAL, None
    else:
        authenticity, generator = FAKE, label
    return tuple(
        ImageEntry(path, image_id, authenticity, generator, None)
        for path, image_id in zip(paths, ids))


def _cmd_layers(args) -> int:
    if args.weights:
        config = PipelineConfig.load(Path(args.weights) / "config.json")
    else:
        config = sd15_config()
    for entry in layer_menu(config.unet):
        print(f"{entry.address} {entry.channels}")
    return 0


def _cmd_extract(args) -> int:
    address = parse_address(args.layer)
    entries = _collect_entries(args)
    pipe = load_pipeline(args.weights)
    job = ExtractionJob(entries=entries, layer=address,
                        out_path=Path(args.out), batch_size=args.batch_size)
    count, dim = run_job(pipe, job, log=_log)
    print(args.out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "layers":
            return _cmd_layers(args)
        return _cmd_extract(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"sdproto: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
