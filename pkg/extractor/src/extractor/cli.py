"""Producer command line.

Subcommands: extract, rasterize. Exit codes: 0 success, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import ExtractorError
from .extract import extract_batch
from .rasterize import rasterize_annotation

EXIT_OK = 0
EXIT_INPUT = 2


def _cmd_extract(args: argparse.Namespace) -> int:
    written = extract_batch(
        args.image,
        args.backbone,
        args.resolution,
        args.patch,
        args.out_dir,
        workers=args.workers,
    )
    print(json.dumps({"written": [str(p) for p in written]}))
    return EXIT_OK


def _cmd_rasterize(args: argparse.Namespace) -> int:
    labels = rasterize_annotation(args.mask, args.sidecar, args.out)
    positives = sum(1 for _, label in labels if label == "positive")
    print(json.dumps({"tokens": len(labels), "positive": positives, "out": args.out}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panc-extract", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="encode images into token-grid files")
    p.add_argument("--image", nargs="+", required=True, help="input image paths")
    p.add_argument("--backbone", required=True, help="e.g. random-proj:64 or torchscript:model.pt")
    p.add_argument("--resolution", type=int, required=True, help="square canvas side, multiple of patch")
    p.add_argument("--patch", type=int, default=16)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("rasterize", help="dense annotation mask to token labels")
    p.add_argument("--mask", required=True, help="mask image at source resolution")
    p.add_argument("--sidecar", required=True, help="the grid's .meta.json")
    p.add_argument("--out", required=True, help="output labels JSON")
    p.set_defaults(func=_cmd_rasterize)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ExtractorError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
