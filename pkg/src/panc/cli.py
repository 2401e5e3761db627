"""Command-line interface.

Subcommands: build-bank, rasterize, segment, eval, bench. Exit codes:
0 success, 2 input error, 3 eigensolver convergence failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import kernels
from .bank import (
    PriorBank,
    PriorEntry,
    build_representatives,
    load_bank,
    save_bank,
    tokens_from_mask,
)
from .binarize import read_mask_pgm, write_mask_pgm
from .errors import ConvergenceError, PancError, PipelineError
from .exchange import read_token_grid
from .metrics import estimate_cost, iou, mean_iou
from .pipeline import PRESETS, PipelineConfig, preset_config, segment_image
from .solver import SolverConfig

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONVERGENCE = 3


def _load_mask_image(path: Path) -> np.ndarray:
    """Dense binary mask from a P5 graymap or any Pillow-readable image."""
    if path.suffix.lower() == ".pgm":
        return read_mask_pgm(path)
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("L")) > 0


def _cmd_build_bank(args: argparse.Namespace) -> int:
    manifest = json.loads(Path(args.cls).read_text())
    if not isinstance(manifest, list) or not manifest:
        raise ValueError(f"{args.cls}: manifest must be a nonempty JSON list")
    grids, label_paths, cls_rows, image_ids = [], [], [], []
    for item in manifest:
        grid = read_token_grid(item["grid"])
        if grid.cls is None:
            raise ValueError(f"{item['grid']}: grid has no CLS vector")
        grids.append(grid)
        label_paths.append(item["labels"])
        cls_rows.append(grid.cls.astype(np.float64))
        image_ids.append(grid.meta.image_id)
    reps = build_representatives(np.stack(cls_rows), image_ids, args.k, args.seed)
    chosen = set(reps.image_ids)
    entries: list[PriorEntry] = []
    dim = grids[0].dim
    for grid, labels_path in zip(grids, label_paths):
        if grid.meta.image_id not in chosen:
            continue
        doc = json.loads(Path(labels_path).read_text())
        for token_index, label in doc["labels"]:
            entries.append(
                PriorEntry(
                    embedding=grid.tokens[int(token_index)].astype(np.float64),
                    label=str(label),
                    source_image=grid.meta.image_id,
                    token_index=int(token_index),
                )
            )
    bank = PriorBank(entries=entries, dim=dim)
    save_bank(bank, args.out)
    print(
        json.dumps(
            {
                "representatives": reps.image_ids,
                "entries": len(entries),
                "out": str(args.out),
            }
        )
    )
    return EXIT_OK


def _cmd_rasterize(args: argparse.Namespace) -> int:
    grid = read_token_grid(args.grid)
    mask = _load_mask_image(Path(args.mask))
    labels = tokens_from_mask(grid, mask)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(
        json.dumps({"image_id": grid.meta.image_id, "labels": labels}, indent=2) + "\n"
    )
    positives = sum(1 for _, label in labels if label == "positive")
    print(json.dumps({"tokens": len(labels), "positive": positives, "out": str(out)}))
    return EXIT_OK


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = preset_config(args.preset) if args.preset else PipelineConfig()
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        retrieval = replace(cfg.retrieval, **doc.pop("retrieval", {}))
        solver = replace(cfg.solver, **doc.pop("solver", {}))
        cfg = replace(cfg, retrieval=retrieval, solver=solver, **doc)
    pipe_flags = {
        "tau": args.tau,
        "kappa": args.kappa,
        "xi": args.xi,
        "threshold": args.threshold,
        "grid_steps": args.grid_steps,
        "orientation": args.orientation,
        "seed": args.seed,
        "threshold_exact": args.threshold_exact,
    }
    cfg = replace(cfg, **{k: v for k, v in pipe_flags.items() if v is not None})
    retr_flags = {
        "k_sim": args.k_sim,
        "lambda_mmr": args.lambda_mmr,
        "max_per_label": args.max_priors,
        "mode": args.mode,
    }
    retr_set = {k: v for k, v in retr_flags.items() if v is not None}
    if retr_set:
        cfg = replace(cfg, retrieval=replace(cfg.retrieval, **retr_set))
    solver_flags = {
        "method": args.solver,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "rescale_generalized": args.rescale_generalized,
    }
    solver_set = {k: v for k, v in solver_flags.items() if v is not None}
    if solver_set:
        cfg = replace(cfg, solver=replace(cfg.solver, **solver_set))
    return cfg


def _cmd_segment(args: argparse.Namespace) -> int:
    grid = read_token_grid(args.grid)
    bank = load_bank(args.bank)
    cfg = _config_from_args(args)
    result = segment_image(grid, bank, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_mask_pgm(result.mask, out / "mask.pgm")
    if args.upsample:
        write_mask_pgm(
            result.mask,
            out / "mask_source.pgm",
            source_dims=(grid.meta.source_h, grid.meta.source_w),
        )
    (out / "scores.json").write_text(
        json.dumps(
            {
                "grid_h": result.scores.grid_h,
                "grid_w": result.scores.grid_w,
                "degenerate": result.scores.degenerate,
                "scores": [float(s) for s in result.scores.scores],
            }
        )
        + "\n"
    )
    report = {
        "image_id": grid.meta.image_id,
        "threshold": {
            "t_star": result.threshold.t_star,
            "strategy": result.threshold.strategy,
            "j_stat": result.threshold.j_stat,
            "grid_steps": result.threshold.grid_steps,
            "inverted": result.threshold.inverted,
        },
        "spectral": {
            "lambda2": result.spectral.lambda2,
            "iterations": result.spectral.iterations,
            "residual": result.spectral.residual,
            "diagnostics": {
                k: v
                for k, v in result.spectral.diagnostics.items()
                if k != "residual_history"
            },
        },
        "ipr": result.token_ipr,
        "mask_area": int(np.count_nonzero(result.mask.bits)),
        "selected": {
            "positive": len(result.selection.positive),
            "negative": len(result.selection.negative),
            "shortfall": result.selection.shortfall,
        },
        "cost": {
            "affinity_flops": result.cost.affinity_flops,
            "eigensolve_flops": result.cost.eigensolve_flops,
            "dense_bytes": result.cost.dense_bytes,
            "sparse_bytes": result.cost.sparse_bytes,
        },
        "kernel_backend": kernels.BACKEND,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps({"out": str(out), "mask_area": report["mask_area"]}))
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds = sorted(pred_dir.glob("*.pgm"))
    if not preds:
        raise ValueError(f"no .pgm masks under {pred_dir}")
    from .binarize import Mask

    rows, pairs = [], []
    for pred_path in preds:
        gt_path = gt_dir / pred_path.name
        if not gt_path.exists():
            rows.append({"name": pred_path.name, "error": "missing ground truth"})
            continue
        p_img = read_mask_pgm(pred_path)
        g_img = read_mask_pgm(gt_path)
        a = Mask(bits=p_img.reshape(-1), grid_h=p_img.shape[0], grid_w=p_img.shape[1])
        b = Mask(bits=g_img.reshape(-1), grid_h=g_img.shape[0], grid_w=g_img.shape[1])
        value = iou(a, b)
        rows.append(
            {
                "name": pred_path.name,
                "iou": value,
                "both_empty": not (a.bits.any() or b.bits.any()),
            }
        )
        pairs.append((a, b))
    report = {"items": rows}
    if pairs:
        report["mean_iou"] = mean_iou(pairs)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    est = estimate_cost(
        n_tokens=args.n, n_priors=2, dim=args.d, iters=50, k=2, xi=args.xi
    )
    report = {
        "estimate": {
            "affinity_flops": est.affinity_flops,
            "eigensolve_flops": est.eigensolve_flops,
            "dense_bytes": est.dense_bytes,
            "sparse_bytes": est.sparse_bytes,
        },
        "backends": {},
    }
    rng = np.random.default_rng(0)
    f = rng.standard_normal((args.n, args.d))
    f /= np.linalg.norm(f, axis=1, keepdims=True)
    sims = f @ f.T
    xi = args.xi if args.xi is not None else max(1, min(80, args.n - 1))
    for name in ("fallback", "compiled"):
        try:
            backend = kernels.load_backend(name)
        except ImportError:
            report["backends"][name] = "unavailable"
            continue
        t0 = time.perf_counter()
        w = backend.affinity_from_sims(sims, 0.7)
        t1 = time.perf_counter()
        backend.topk_rows(w, xi)
        t2 = time.perf_counter()
        report["backends"][name] = {
            "affinity_s": round(t1 - t0, 6),
            "topk_s": round(t2 - t1, 6),
        }
    print(json.dumps(report, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="panc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-bank", help="cluster CLS vectors and harvest a labeled bank")
    p.add_argument("--cls", required=True, help="JSON manifest of {grid, labels} pairs")
    p.add_argument("--k", type=int, required=True, help="number of representatives")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output bank directory")
    p.set_defaults(func=_cmd_build_bank)

    p = sub.add_parser("rasterize", help="rasterize a dense mask into token labels")
    p.add_argument("--grid", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rasterize)

    p = sub.add_parser("segment", help="segment one token grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--config", help="JSON config file; flags override it")
    p.add_argument("--tau", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--xi", type=int)
    p.add_argument("--k-sim", dest="k_sim", type=int)
    p.add_argument("--lambda-mmr", dest="lambda_mmr", type=float)
    p.add_argument("--max-priors", dest="max_priors", type=int)
    p.add_argument("--mode", choices=["random", "nearest", "mmr"])
    p.add_argument("--threshold", choices=["roc", "median"])
    p.add_argument("--threshold-exact", dest="threshold_exact", action="store_const", const=True)
    p.add_argument("--grid-steps", dest="grid_steps", type=int)
    p.add_argument("--solver", choices=["lobpcg", "dense"])
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--rescale-generalized",
        dest="rescale_generalized",
        action=argparse.BooleanOptionalAction,
        default=None,
    )
    p.add_argument("--orientation", choices=["median", "mean"])
    p.add_argument("--upsample", action="store_true", help="also write the source-resolution mask")
    p.set_defaults(func=_cmd_segment)

    p = sub.add_parser("eval", help="IoU of predicted vs ground-truth masks")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="cost estimate plus kernel backend timings")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--xi", type=int)
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE if isinstance(exc.cause, ConvergenceError) else EXIT_INPUT
    except (PancError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
