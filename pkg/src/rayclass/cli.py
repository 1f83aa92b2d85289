"""Command-line entry point: ``rayclass <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .dataset import SplitSpec, build_dataset, read_dataset, split, write_dataset
from .errors import ParameterError, RayClassError
from .fingerprint import WeightFunction
from .geometry import DirectionSet, default_directions
from .nn import MlpSpec, TrainConfig, evaluate, load_model, save_model, train
from .scene import dump_scenes, generate_scenes, load_scenes

log = logging.getLogger("rayclass")


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _lengths(text: str) -> list:
    """``10:80:10`` (inclusive) or a comma list."""
    if ":" in text:
        try:
            a, b, step = (int(t) for t in text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
        if step <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"empty length range {text!r}")
        return list(range(a, b + 1, step))
    return _int_list(text)


def _cells(text: str) -> list:
    out = []
    for tok in text.split(","):
        try:
            M, r = tok.lower().split("x")
            out.append((int(M), int(r)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected cells like 6x60, got {tok!r}") from None
    return out


def _archs(text: str) -> list:
    try:
        return [tuple(int(h) for h in a.split("-")) for a in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected architectures like 64-32,128-64-32, got {text!r}") from None


def _gamma(text: str) -> WeightFunction:
    try:
        return WeightFunction.parse(text)
    except (RayClassError, ValueError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- subcommands -------------------------------------------------------------

def cmd_gen_scenes(a):
    scenes = generate_scenes(a.dim, a.kind, a.count, a.seed)
    dump_scenes(scenes, a.out)
    log.info("wrote %d scenes to %s", len(scenes), a.out)


def cmd_fingerprint(a):
    scenes = load_scenes(a.scenes)
    if not scenes:
        raise ParameterError(f"{a.scenes} contains no scenes")
    dirs = default_directions(scenes[0].dims, a.rays, a.offset_angle)
    ds = build_dataset(scenes, dirs, a.length, a.gamma, a.grid)
    write_dataset(ds, a.out, a.format)
    log.info("wrote %d fingerprints to %s", len(ds), a.out)


def cmd_train(a):
    ds = read_dataset(a.data)
    tr, va = split(ds, SplitSpec(a.train_fraction, a.seed))
    spec = MlpSpec(ds.M, tuple(a.arch), ds.n_classes)
    params, hist = train(spec, tr, va, TrainConfig(a.epochs, a.batch, a.seed, a.lr))
    meta = {
        "M": ds.M,
        "r": ds.r,
        "dims": ds.dims,
        "directions": ds.meta.get("directions"),
        "gamma": ds.meta.get("gamma", WeightFunction().to_dict()),
        "class_names": ds.class_names,
        "train": {"seed": a.seed, "epochs": a.epochs, "batch": a.batch, "lr": a.lr,
                  "train_fraction": a.train_fraction, "n_train": len(tr), "n_val": len(va)},
        "history": [{"epoch": e.epoch, "loss": e.loss, "val_loss": e.val_loss, "val_accuracy": e.val_accuracy}
                    for e in hist],
    }
    save_model(a.out, params, meta)
    log.info("validation accuracy %.4f", hist[-1].val_accuracy if len(va) else float("nan"))


def _check_model_matches(meta, ds):
    if "M" in meta and int(meta["M"]) != ds.M:
        raise ParameterError(f"model was trained on M={meta['M']} rays, data has M={ds.M}")
    if "r" in meta and int(meta["r"]) != ds.r:
        log.warning("model was trained with r=%s, data has r=%d", meta["r"], ds.r)


def cmd_eval(a):
    params, meta = load_model(a.model, with_meta=True)
    ds = read_dataset(a.data)
    _check_model_matches(meta, ds)
    acc, conf = evaluate(params, ds)
    _dump_json({"accuracy": acc, "n": len(ds), "confusion": conf.tolist(),
                "class_names": ds.class_names or meta.get("class_names", [])}, a.out)
    log.info("accuracy %.4f on %d records", acc, len(ds))


def _progress(M, r, i, acc):
    log.info("M=%d r=%d run %d: %.4f", M, r, i, acc)


def cmd_sweep(a):
    if a.dim == 3:
        spec = ex.SweepSpec.default_3d(ray_counts=tuple(a.rays or range(6, 19, 2)),
                                       ray_lengths_px=tuple(a.lengths or (60,)), runs_per_cell=a.runs,
                                       arch=tuple(a.arch), master_seed=a.seed, n_scenes=a.n_scenes or 1,
                                       scene_seed=a.scene_seed, per_axis=a.grid or 26, epochs=a.epochs)
    else:
        spec = ex.SweepSpec(ray_counts=tuple(a.rays or (3, 4, 5, 6, 12)),
                            ray_lengths_px=tuple(a.lengths or range(10, 81, 10)), runs_per_cell=a.runs,
                            arch=tuple(a.arch), master_seed=a.seed, n_scenes=a.n_scenes or 20,
                            scene_seed=a.scene_seed, per_axis=a.grid or 37, epochs=a.epochs)
    scenes = load_scenes(a.scenes) if a.scenes else None
    results = ex.sweep(spec, scenes, _progress)
    ex.emit_curves(results, a.out, cnn_ref=a.cnn_ref)
    if a.trials_out:
        ex.emit_trials(results, a.trials_out)


def cmd_arch_sweep(a):
    scenes = load_scenes(a.scenes) if a.scenes else generate_scenes(2, "double-dot", a.n_scenes, a.scene_seed)
    table = ex.arch_sweep(scenes, a.archs, a.cells, a.runs, a.seed, _progress, epochs=a.epochs)
    ex.emit_arch_table(table, a.out)


def cmd_failure_map(a):
    params, meta = load_model(a.model, with_meta=True)
    scenes = load_scenes(a.scenes)
    M = a.rays or meta.get("M")
    r = a.length or meta.get("r")
    if M is None or r is None:
        raise ParameterError("model has no M/r metadata; pass --rays and --length")
    dirs = None
    if meta.get("directions") and not a.rays:
        dirs = DirectionSet.from_dict(meta["directions"])
        if any(sc.dims != dirs.dims for sc in scenes):
            raise ParameterError("scene dimension does not match the model's direction set")
    gamma = WeightFunction.from_dict(meta["gamma"]) if meta.get("gamma") else None
    rows = ex.failure_map(params, scenes, int(M), int(r), a.grid, gamma, dirs=dirs)
    ex.emit_failure_map(rows, a.out)
    bad, good = ex.failure_medians(rows)
    log.info("%d/%d misclassified; median boundary distance %.3f (wrong) vs %.3f (right)",
             sum(not row.correct for row in rows), len(rows), bad, good)


def cmd_class_means(a):
    ex.emit_class_means(read_dataset(a.data), a.out)


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rayclass", description="Ray-based fingerprinting and classification.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-scenes", help="generate synthetic scenes")
    s.add_argument("--dim", type=int, choices=(2, 3), default=2)
    s.add_argument("--kind", choices=("double-dot", "triple-dot", "square"), default="double-dot")
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_scenes)

    s = sub.add_parser("fingerprint", help="fingerprint a regular grid over each scene")
    s.add_argument("--scenes", required=True)
    s.add_argument("--rays", type=int, default=6)
    s.add_argument("--length", type=int, default=60)
    s.add_argument("--grid", type=int, default=37, help="grid points per axis")
    s.add_argument("--gamma", type=_gamma, default=WeightFunction(), help="reciprocal | exponential:LAMBDA")
    s.add_argument("--offset-angle", type=float, default=0.0, help="2D direction offset in radians")
    s.add_argument("--format", choices=("jsonl", "csv"), default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fingerprint)

    s = sub.add_parser("train", help="train the classifier on an 80:20 split")
    s.add_argument("--data", required=True)
    s.add_argument("--arch", type=_int_list, default=[256, 128, 32])
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--batch", type=int, default=32)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--train-fraction", type=float, default=0.8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="accuracy and confusion matrix of a model on a dataset")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="accuracy over a grid of ray counts and lengths")
    s.add_argument("--dim", type=int, choices=(2, 3), default=2)
    s.add_argument("--rays", type=_int_list, default=None)
    s.add_argument("--lengths", type=_lengths, default=None, help="start:stop:step (inclusive) or a list")
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--arch", type=_int_list, default=[256, 128, 32])
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--scenes", default=None, help="scene file; generated from --scene-seed if omitted")
    s.add_argument("--n-scenes", type=int, default=None)
    s.add_argument("--scene-seed", type=int, default=0)
    s.add_argument("--grid", type=int, default=None)
    s.add_argument("--cnn-ref", type=float, default=ex.REFERENCE_CNN_2D)
    s.add_argument("--trials-out", default=None, help="also write per-trial accuracies here")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("arch-sweep", help="compare hidden-layer architectures")
    s.add_argument("--cells", type=_cells, default=list(ex.DEFAULT_ARCH_CELLS))
    s.add_argument("--archs", type=_archs, default=list(ex.DEFAULT_ARCHS))
    s.add_argument("--runs", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--epochs", type=int, default=50)
    s.add_argument("--scenes", default=None)
    s.add_argument("--n-scenes", type=int, default=20)
    s.add_argument("--scene-seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_arch_sweep)

    s = sub.add_parser("failure-map", help="per-point predictions and boundary distances on test scenes")
    s.add_argument("--model", required=True)
    s.add_argument("--scenes", required=True)
    s.add_argument("--rays", type=int, default=None, help="override the model's M")
    s.add_argument("--length", type=int, default=None, help="override the model's r")
    s.add_argument("--grid", type=int, default=37)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_failure_map)

    s = sub.add_parser("class-means", help="mean fingerprint per class")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_class_means)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s",
                        stream=sys.stderr)
    try:
        args.func(args)
    except (RayClassError, OSError, KeyError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"rayclass {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
