"""Command-line front door: phantom synthesis, dataset simulation,
reconstruction, training, and evaluation.

Every command is deterministic given its flags and seed, re-running
overwrites outputs byte-identically, and a resolved-config snapshot is
written next to the outputs.  Exit codes: 0 success, 2 usage error,
3 numerical failure, 1 other error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import mgn
from .analytic import FilterSpec, fbp_values
from .config import geometry_to_kv, read_kv, write_kv
from .data import (
    MetricsRow,
    PhantomSpec,
    build_dataset,
    load_dataset,
    make_phantom,
    psnr,
    read_lact,
    ssim,
    write_lact,
    write_metrics_csv,
    write_pgm,
)
from .errors import DivergedError, FormatError, InvalidArgumentError, LactError
from .geometry import ImageGrid, make_fan, make_limited, make_parallel
from .iterative import TvParams, cgls, tv_admm
from .projector import LimitedSinogram, pad_dual_values

USAGE_ERROR = 2
NUMERICAL_ERROR = 3


def _snapshot(out_dir: str, command: str, pairs: dict[str, str]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    write_kv(os.path.join(out_dir, f"{command}-config.txt"), dict(pairs))


def cmd_phantom(args) -> int:
    spec = PhantomSpec(
        kind=args.kind, size=args.size, seed=args.seed, n_ellipses=args.ellipses
    )
    if args.count < 1:
        raise InvalidArgumentError("--count must be >= 1")
    os.makedirs(args.out, exist_ok=True)
    for i in range(args.count):
        raster = make_phantom(
            PhantomSpec(spec.kind, spec.size, spec.seed + i, spec.n_ellipses)
        )
        write_lact(
            os.path.join(args.out, f"phantom_{i:04d}.lact"),
            raster.astype(np.float64),
        )
    _snapshot(
        args.out,
        "phantom",
        {
            "kind": spec.kind,
            "size": str(spec.size),
            "count": str(args.count),
            "seed": str(spec.seed),
            "ellipses": str(spec.n_ellipses),
        },
    )
    return 0


def _geometry_from_args(args, grid: ImageGrid):
    if args.geometry == "parallel":
        n_det = args.detectors or 2 * math.ceil(grid.circumradius) + 1
        return make_parallel(grid, args.views, n_det)
    return make_fan(
        grid,
        args.views,
        args.source_radius,
        math.radians(args.fan_half_angle_deg),
        math.radians(args.det_step_deg),
    )


def cmd_simulate(args) -> int:
    files = sorted(
        f for f in os.listdir(args.in_dir) if f.endswith(".lact")
    )
    if not files:
        raise InvalidArgumentError(f"no .lact images in {args.in_dir}")
    images = [read_lact(os.path.join(args.in_dir, f)) for f in files]
    shape = images[0].shape
    if any(img.shape != shape for img in images):
        raise InvalidArgumentError("input images must share one shape")
    grid = ImageGrid(width=shape[1], height=shape[0])
    geom = _geometry_from_args(args, grid)
    sel = make_limited(args.views, args.keep)
    splits = (args.train, args.val, args.test)
    if sum(splits) == 0:
        splits = (len(images), 0, 0)
    if sum(splits) != len(images):
        raise InvalidArgumentError(
            f"split counts {splits} do not sum to {len(images)} images"
        )
    filt = FilterSpec(kind=args.filter, cutoff=args.cutoff)
    build_dataset(
        PhantomSpec(size=max(shape)),
        geom,
        sel,
        len(images),
        args.out,
        split_counts=splits,
        filt=filt,
        images=images,
    )
    pairs = dict(geometry_to_kv(geom, sel))
    pairs.update(
        {
            "in": args.in_dir,
            "keep": str(args.keep),
            "filter": args.filter,
            "cutoff": repr(args.cutoff),
            "splits": ",".join(str(s) for s in splits),
        }
    )
    _snapshot(args.out, "simulate", pairs)
    return 0


def _reconstruct_one(method, sample, geom, sel, args, model):
    if method == "fbp":
        return fbp_values(
            pad_dual_values(sample.limited.values, sel),
            geom,
            FilterSpec(kind=args.filter, cutoff=args.cutoff),
        )
    if method == "cgls":
        return cgls(sample.limited, geom, sel, max_iters=args.iters, tol=1e-12).values
    if method == "tv":
        params = TvParams(
            tv_weight=args.tv_weight,
            penalty=args.tv_penalty,
            step_size=args.tv_step,
            max_iters=args.iters,
            rel_change_tol=args.tv_tol,
        )
        return tv_admm(sample.limited, geom, sel, params).values
    return mgn.reconstruct(model, sample)


def cmd_reconstruct(args) -> int:
    if args.method == "mgn" and not args.checkpoint:
        raise InvalidArgumentError("--method mgn requires --checkpoint")
    geom, sel, entries = load_dataset(args.in_dir, splits=args.splits)
    if not entries:
        raise InvalidArgumentError(f"no samples selected from {args.in_dir}")
    model = None
    if args.method == "mgn":
        model = mgn.MgnModel.from_checkpoint(args.checkpoint, geom, sel)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for sample_id, _, sample in entries:
        rec = np.asarray(
            _reconstruct_one(args.method, sample, geom, sel, args, model),
            dtype=np.float64,
        )
        write_lact(
            os.path.join(args.out, f"recon_{sample_id}_{args.method}.lact"), rec
        )
        if args.pgm:
            write_pgm(
                os.path.join(args.out, f"recon_{sample_id}_{args.method}.pgm"), rec
            )
        rows.append(
            MetricsRow(
                sample_id,
                args.method,
                psnr(rec, sample.image_label.values),
                ssim(rec, sample.image_label.values),
            )
        )
    if args.metrics:
        write_metrics_csv(args.metrics, rows)
    _snapshot(
        args.out,
        "reconstruct",
        {
            "method": args.method,
            "in": args.in_dir,
            "checkpoint": args.checkpoint or "",
            "iters": str(args.iters),
            "tv_weight": repr(args.tv_weight),
            "tv_penalty": repr(args.tv_penalty),
            "tv_step": repr(args.tv_step),
        },
    )
    return 0


_TRAIN_DEFAULTS = {
    "dataset": None,
    "out": None,
    "n_iter": "5",
    "epochs": "100",
    "batch_size": "1",
    "lr": "0.001",
    "balance": "0.5",
    "seed": "0",
    "max_steps": "0",
    "dtype": "float32",
    "filter": "ram-lak",
    "cutoff": "1.0",
}


def _load_train_config(path: str) -> dict[str, str]:
    if not os.path.isfile(path):
        raise InvalidArgumentError(f"config file {path!r} does not exist")
    kv = read_kv(path)
    unknown = set(kv) - set(_TRAIN_DEFAULTS)
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    resolved = {k: v for k, v in _TRAIN_DEFAULTS.items() if v is not None}
    resolved.update(kv)
    for required in ("dataset", "out"):
        if required not in resolved:
            raise InvalidArgumentError(f"config is missing required key {required!r}")
    return resolved


def cmd_train(args) -> int:
    cfg = _load_train_config(args.config)
    if args.epochs is not None:
        cfg["epochs"] = str(args.epochs)
    if args.seed is not None:
        cfg["seed"] = str(args.seed)
    out_dir = cfg["out"]
    filt = FilterSpec(kind=cfg["filter"], cutoff=float(cfg["cutoff"]))
    geom, sel, entries = load_dataset(cfg["dataset"])
    train_samples = [s for _, split, s in entries if split == "train"]
    val_samples = [s for _, split, s in entries if split == "val"]
    dtype = {"float32": np.float32, "float64": np.float64}[cfg["dtype"]]
    model = mgn.MgnModel.initialize(
        geom, sel, int(cfg["n_iter"]), seed=int(cfg["seed"]), dtype=dtype, filt=filt
    )
    max_steps = int(cfg["max_steps"]) or None
    result = mgn.train(
        model,
        train_samples,
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch_size"]),
        lr=float(cfg["lr"]),
        seed=int(cfg["seed"]),
        loss_spec=mgn.LossSpec(float(cfg["balance"])),
        val_samples=val_samples or None,
        max_steps=max_steps,
        dtype=dtype,
        log=print,
    )
    os.makedirs(out_dir, exist_ok=True)
    model.save(os.path.join(out_dir, "checkpoint"))
    with open(os.path.join(out_dir, "history.csv"), "w", encoding="ascii") as fh:
        fh.write("step,loss\n")
        for i, v in enumerate(result.step_losses):
            fh.write(f"{i},{v!r}\n")
        fh.write("# epoch means\n")
        for i, v in enumerate(result.epoch_losses):
            fh.write(f"epoch_{i},{v!r}\n")
        if result.val_psnr is not None:
            fh.write(f"val_psnr,{result.val_psnr!r}\n")
    _snapshot(out_dir, "train", cfg)
    return 0


def cmd_eval(args) -> int:
    preds = sorted(f for f in os.listdir(args.pred) if f.endswith(".lact"))
    labels = sorted(f for f in os.listdir(args.label) if f.endswith(".lact"))
    if len(preds) != len(labels):
        raise InvalidArgumentError(
            f"prediction/label counts differ: {len(preds)} vs {len(labels)}"
        )
    if not preds:
        raise InvalidArgumentError("no .lact files to evaluate")
    rows = []
    for pf, lf in zip(preds, labels):
        pred = read_lact(os.path.join(args.pred, pf))
        label = read_lact(os.path.join(args.label, lf))
        rows.append(
            MetricsRow(os.path.splitext(pf)[0], "eval", psnr(pred, label), ssim(pred, label))
        )
    mean_psnr = float(np.mean([r.psnr_db for r in rows]))
    mean_ssim = float(np.mean([r.ssim for r in rows]))
    rows.append(MetricsRow("mean", "eval", mean_psnr, mean_ssim))
    write_metrics_csv(args.out, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lactk", description="Limited-angle CT reconstruction toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="generate phantom images")
    p.add_argument("--kind", choices=("shepp-logan", "random"), default="shepp-logan")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ellipses", type=int, default=6)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_phantom, kind_map=True)

    p = sub.add_parser("simulate", help="build a dataset from label images")
    p.add_argument("--geometry", choices=("parallel", "fan"), default="parallel")
    p.add_argument("--views", type=int, default=180)
    p.add_argument("--keep", type=int, default=150)
    p.add_argument("--detectors", type=int, default=0)
    p.add_argument("--source-radius", type=float, default=600.0)
    p.add_argument("--fan-half-angle-deg", type=float, default=18.0)
    p.add_argument("--det-step-deg", type=float, default=0.05)
    p.add_argument("--filter", choices=("ram-lak", "hann"), default="ram-lak")
    p.add_argument("--cutoff", type=float, default=1.0)
    p.add_argument("--train", type=int, default=0)
    p.add_argument("--val", type=int, default=0)
    p.add_argument("--test", type=int, default=0)
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("reconstruct", help="run a reconstruction method")
    p.add_argument("--method", choices=("fbp", "cgls", "tv", "mgn"), required=True)
    p.add_argument("--checkpoint", default="")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--metrics", default="")
    p.add_argument("--splits", default=None, type=lambda s: tuple(s.split(",")))
    p.add_argument("--filter", choices=("ram-lak", "hann"), default="ram-lak")
    p.add_argument("--cutoff", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--tv-weight", type=float, default=100.0)
    p.add_argument("--tv-penalty", type=float, default=0.1)
    p.add_argument("--tv-step", type=float, default=0.1)
    p.add_argument("--tv-tol", type=float, default=1e-4)
    p.add_argument("--pgm", action="store_true")
    p.set_defaults(fn=cmd_reconstruct)

    p = sub.add_parser("train", help="train the unrolled network")
    p.add_argument("--config", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM between two image directories")
    p.add_argument("--pred", required=True)
    p.add_argument("--label", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "kind_map", False) and args.kind == "random":
        args.kind = "random-ellipses"
    try:
        return args.fn(args)
    except DivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except InvalidArgumentError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FormatError, LactError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
