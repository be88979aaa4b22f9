"""Command-line pipeline driver.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .metrics import (
    boundary_gt,
    confusion,
    metrics,
    metrics_table,
    nms,
    per_class_roc,
)
from .regions import read_partition, write_partition
from .synth import Scene, SceneSpec, generate_scene
from .tensorio import (
    ConfigError,
    LabelMap,
    Raster,
    RunConfig,
    TensorFormatError,
    load_config,
    read_array,
    read_tensor,
    write_array,
    write_tensor,
)
from .tree import export_tree


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "classes", None) is not None:
        overrides["class_count"] = args.classes
    if overrides:
        cfg = RunConfig(**{**cfg.__dict__, **overrides})
    return cfg


def _read_raster(path: str) -> Raster:
    obj = read_tensor(path)
    if not isinstance(obj, Raster):
        raise ValueError(f"{path}: expected a float raster")
    return obj


def _read_labels(path: str) -> LabelMap:
    obj = read_tensor(path)
    if not isinstance(obj, LabelMap):
        raise ValueError(f"{path}: expected a uint8 label map")
    return obj


def _cmd_segment(args) -> int:
    cfg = _config(args)
    likelihoods = _read_raster(args.likelihoods)
    boundaries = _read_raster(args.boundaries) if args.boundaries else None
    elev = _read_raster(args.elevation) if args.elevation else None
    feats = _read_raster(args.features) if args.features else None
    mu = None
    if args.mu:
        mu = read_array(args.mu).astype(np.float64)
    result = pipeline.segment(cfg, likelihoods, boundaries, elev, feats, mu)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(result.label_map, out / "pred.ftn")
    if args.dump_partition and result.partition is not None:
        write_partition(result.partition, out / "partition.ftn")
    if args.dump_tree and result.tree is not None:
        export_tree(result.tree, out / "tree.json")
    if args.dump_energy and result.model is not None:
        dump = {
            "mode": cfg.mode,
            "sigmas": result.model.sigmas,
            "lambdas": list(result.model.lambdas),
            "gamma": result.model.gamma,
            "energy": result.solution.energy if result.solution else None,
            "energy_trace": (
                result.solution.energy_trace if result.solution else None
            ),
        }
        (out / "energy.json").write_text(json.dumps(dump, indent=2))
    print(f"wrote {out / 'pred.ftn'}")
    return 0


def _cmd_cooc(args) -> int:
    cfg = _config(args)
    if len(args.gt) != len(args.partition):
        raise ValueError("need one partition per ground-truth map")
    pairs = [
        (_read_labels(g), read_partition(p))
        for g, p in zip(args.gt, args.partition)
    ]
    mu = pipeline.estimate_compatibility(cfg, pairs)
    write_array(mu.astype(np.float32), args.out)
    print(f"wrote {args.out}")
    return 0


def _scene_files(scene: Scene, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(scene.image, out / "image.ftn")
    write_tensor(scene.gt, out / "gt.ftn")
    write_tensor(scene.likelihoods, out / "likelihoods.ftn")
    write_tensor(scene.boundaries, out / "boundaries.ftn")
    write_tensor(scene.elevation, out / "elevation.ftn")


def _cmd_synth(args) -> int:
    cfg = _config(args)
    spec = SceneSpec(
        height=args.height, width=args.width, class_count=cfg.class_count,
        noise=args.noise, blur=args.blur, seed=cfg.seed,
    )
    scene = generate_scene(spec)
    _scene_files(scene, Path(args.out))
    print(f"wrote scene to {args.out}")
    return 0


def _cmd_eval_seg(args) -> int:
    cfg = _config(args)
    gt = _read_labels(args.gt)
    pred = _read_labels(args.pred)
    m = metrics(confusion(gt, pred, cfg.class_count))
    table = metrics_table(m)
    print(table)
    if args.out:
        Path(args.out).write_text(json.dumps(m.to_dict(), indent=2))
        print(f"wrote {args.out}")
    return 0


def _cmd_eval_boundary(args) -> int:
    cfg = _config(args)
    gt = _read_labels(args.gt)
    pred = _read_raster(args.pred)
    if pred.channels != cfg.class_count:
        raise ValueError(
            f"boundary raster has {pred.channels} channels, expected {cfg.class_count}"
        )
    thinned = np.dstack(
        [
            nms(Raster(pred.values[:, :, c : c + 1])).values[:, :, 0]
            for c in range(pred.channels)
        ]
    )
    thinned_r = Raster(thinned.astype(np.float32))
    report = {}
    for tol in args.tolerance:
        gt_b = boundary_gt(gt, cfg.class_count, width=1)
        curves = per_class_roc(thinned_r, gt_b, tolerance_px=tol)
        aucs = {
            str(c): (None if cv is None else cv.auc)
            for c, cv in enumerate(curves)
        }
        valid = [a for a in aucs.values() if a is not None]
        report[f"auc_{tol}px"] = {
            "per_class": aucs,
            "mean": float(np.mean(valid)) if valid else None,
        }
    print(json.dumps(report, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    return 0


def _cmd_tree_export(args) -> int:
    cfg = _config(args)
    likelihoods = _read_raster(args.likelihoods)
    boundaries = _read_raster(args.boundaries)
    elev = _read_raster(args.elevation) if args.elevation else None
    feats = _read_raster(args.features) if args.features else None
    partition, rag, ucm = pipeline.leaf_structure(
        cfg, likelihoods, boundaries, elev, feats
    )
    from .tree import build_tree

    tree = build_tree(partition, rag, ucm, cfg.weights)
    export_tree(tree, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pyloncrf",
        description="Hierarchical CRF regularization of semantic segmentations",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode_flag=True):
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--classes", type=int, default=None,
                        help="override the configured class count")
        if mode_flag:
            from .tensorio import MODES

            sp.add_argument("--mode", choices=list(MODES))

    sp = sub.add_parser("segment", help="run one baseline mode on rasters")
    common(sp)
    sp.add_argument("--likelihoods", required=True)
    sp.add_argument("--boundaries")
    sp.add_argument("--elevation")
    sp.add_argument("--features")
    sp.add_argument("--mu", help="C x C compatibility tensor from `cooc`")
    sp.add_argument("--out", required=True)
    sp.add_argument("--dump-tree", action="store_true")
    sp.add_argument("--dump-energy", action="store_true")
    sp.add_argument("--dump-partition", action="store_true")
    sp.set_defaults(func=_cmd_segment)

    sp = sub.add_parser("cooc", help="estimate label compatibility from training maps")
    common(sp, mode_flag=False)
    sp.add_argument("--gt", nargs="+", required=True)
    sp.add_argument("--partition", nargs="+", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_cooc)

    sp = sub.add_parser("synth", help="generate a synthetic scene")
    common(sp, mode_flag=False)
    sp.add_argument("--out", required=True)
    sp.add_argument("--height", type=int, default=128)
    sp.add_argument("--width", type=int, default=128)
    sp.add_argument("--noise", type=float, default=0.3)
    sp.add_argument("--blur", type=float, default=1.5)
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("eval-seg", help="OA / AA / F1 of a prediction")
    common(sp, mode_flag=False)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--pred", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_eval_seg)

    sp = sub.add_parser("eval-boundary", help="boundary ROC/AUC after NMS")
    common(sp, mode_flag=False)
    sp.add_argument("--gt", required=True, help="ground-truth label map")
    sp.add_argument("--pred", required=True, help="per-class boundary raster")
    sp.add_argument("--tolerance", type=int, nargs="+", default=[1, 3])
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_eval_boundary)

    sp = sub.add_parser("tree-export", help="build and dump the segmentation tree")
    common(sp, mode_flag=False)
    sp.add_argument("--likelihoods", required=True)
    sp.add_argument("--boundaries", required=True)
    sp.add_argument("--elevation")
    sp.add_argument("--features")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_tree_export)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TensorFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
