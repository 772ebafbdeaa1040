"""Command-line interface: train, annotate, eval, gradcheck, synth."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataio, gradcheck, synth
from .annotator import annotate_dataset
from .errors import LamError
from .metrics import confusion, metrics_report_csv
from .optou import GuidanceMode
from .trainer import TrainConfig, train_from_seed


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lamcore",
        description="Train a single-seed annotator and label feature images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a model to one annotated seed image")
    p_train.add_argument("--seed-features", required=True, type=Path)
    p_train.add_argument("--seed-labels", required=True, type=Path)
    p_train.add_argument("--out", required=True, type=Path)
    p_train.add_argument("--epochs", type=int, default=200)
    p_train.add_argument("--lr", type=float, default=3e-4)
    p_train.add_argument("--k", type=int, default=10)
    p_train.add_argument("--alpha0", type=float, default=1.0)
    p_train.add_argument("--eta0", type=float, default=0.1)
    p_train.add_argument("--rng-seed", type=int, default=0)
    p_train.add_argument("--classes", type=int, default=None,
                         help="class count (default: max seed label id + 1)")
    p_train.add_argument("--mode", choices=[m.value for m in GuidanceMode],
                         default=GuidanceMode.SELF.value,
                         help="default guidance mode stored on the model")

    p_ann = sub.add_parser("annotate", help="label every feature file in a directory")
    p_ann.add_argument("--model", required=True, type=Path)
    p_ann.add_argument("--features-dir", required=True, type=Path)
    p_ann.add_argument("--out-dir", required=True, type=Path)
    p_ann.add_argument("--mode", choices=[m.value for m in GuidanceMode], default=None)
    p_ann.add_argument("--gt-dir", type=Path, default=None,
                       help="ground-truth directory (required in oracle mode)")
    p_ann.add_argument("--palette", type=Path, default=None)
    p_ann.add_argument("--emit-color", action="store_true")

    p_eval = sub.add_parser("eval", help="score predicted labels against ground truth")
    p_eval.add_argument("--pred-dir", required=True, type=Path)
    p_eval.add_argument("--gt-dir", required=True, type=Path)
    p_eval.add_argument("--classes", required=True, type=int)

    p_gc = sub.add_parser("gradcheck", help="finite-difference checks of every backward pass")
    p_gc.add_argument("--rng-seed", type=int, default=0)

    p_synth = sub.add_parser("synth", help="generate paired synthetic feature/label files")
    p_synth.add_argument("--out-dir", required=True, type=Path)
    p_synth.add_argument("--count", required=True, type=int)
    p_synth.add_argument("--classes", required=True, type=int)
    p_synth.add_argument("--size", required=True, help="HxW, e.g. 64x64")
    p_synth.add_argument("--rng-seed", required=True, type=int)
    p_synth.add_argument("--channels", type=int, default=16)
    p_synth.add_argument("--noise-sigma", type=float, default=0.1)
    return parser


def _cmd_train(args) -> int:
    config = TrainConfig(
        epochs=args.epochs,
        learning_rate=args.lr,
        k_layers=args.k,
        alpha0=args.alpha0,
        eta0=args.eta0,
        rng_seed=args.rng_seed,
        mode=GuidanceMode.from_string(args.mode),
    )
    features = dataio.load_features(args.seed_features)
    labels = dataio.load_labels(args.seed_labels)
    model, losses = train_from_seed(features, labels, config, class_count=args.classes)
    dataio.save_model(args.out, model)
    print("epoch,loss")
    for epoch, loss in enumerate(losses, start=1):
        print(f"{epoch},{loss!r}")
    return 0


def _summary_csv(summaries, class_count: int) -> str:
    header = ["file", "status", "error", "seconds", "output"]
    header += [f"pixels_class_{c}" for c in range(class_count)]
    lines = [",".join(header)]
    for s in summaries:
        counts = (
            [str(int(n)) for n in s.class_pixels]
            if s.class_pixels is not None
            else [""] * class_count
        )
        err = s.error.replace(",", ";").replace("\n", " ")
        out = str(s.output) if s.output else ""
        lines.append(
            ",".join([str(s.source), "ok" if s.ok else "error", err, f"{s.seconds:.6f}", out]
                     + counts)
        )
    return "\n".join(lines) + "\n"


def _cmd_annotate(args, parser) -> int:
    if args.emit_color and args.palette is None:
        parser.error("--emit-color requires --palette")
    model = dataio.load_model(args.model)
    mode = GuidanceMode.from_string(args.mode) if args.mode else None
    if (mode or model.mode) is GuidanceMode.ORACLE and args.gt_dir is None:
        parser.error("--mode oracle requires --gt-dir")
    palette = dataio.load_palette(args.palette) if args.palette else None
    files = sorted(Path(args.features_dir).glob("*.lft"))
    summaries = annotate_dataset(
        files,
        model,
        args.out_dir,
        mode=mode,
        gt_dir=args.gt_dir,
        palette=palette,
        emit_color=args.emit_color,
    )
    csv_text = _summary_csv(summaries, model.class_count)
    (Path(args.out_dir) / "summary.csv").write_text(csv_text)
    print(csv_text, end="")
    return 0


def _cmd_eval(args) -> int:
    preds = sorted(Path(args.pred_dir).glob("*.llb"))
    if not preds:
        raise LamError(f"no .llb files in {args.pred_dir}")
    total = None
    for pred_path in preds:
        gt_path = Path(args.gt_dir) / pred_path.name
        if not gt_path.exists():
            raise LamError(f"missing ground truth for {pred_path.name}")
        m = confusion(
            dataio.load_labels(pred_path), dataio.load_labels(gt_path), args.classes
        )
        total = m if total is None else total + m
    print(metrics_report_csv(total), end="")
    return 0


def _cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(args.rng_seed)
    print("suite,instances,max_rel_err,pass")
    for r in results:
        print(f"{r.name},{r.instances},{r.max_rel_err:.3e},{'yes' if r.passed else 'no'}")
    return 0 if all(r.passed for r in results) else 1


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(p) for p in text.lower().split("x"))
    except ValueError as exc:
        raise LamError(f"--size must look like 64x64, got {text!r}") from exc
    return h, w


def _cmd_synth(args) -> int:
    height, width = _parse_size(args.size)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        features, labels = synth.generate_scene(
            args.rng_seed + i, args.classes, args.channels, height, width, args.noise_sigma
        )
        dataio.save_features(out_dir / f"scene_{i:04d}.lft", features)
        dataio.save_labels(out_dir / f"scene_{i:04d}.llb", labels)
    print(f"wrote {args.count} scene pairs to {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "annotate":
            return _cmd_annotate(args, parser)
        if args.command == "eval":
            return _cmd_eval(args)
        if args.command == "gradcheck":
            return _cmd_gradcheck(args)
        if args.command == "synth":
            return _cmd_synth(args)
        parser.error(f"unknown command {args.command}")
    except (LamError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
