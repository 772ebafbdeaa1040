"""CLI for the exporter: feature extraction and ground-truth conversion."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .export import ExportConfig, export_features
from .labels import UnmappedIdError, convert_labels


def _parse_size(text: str) -> tuple[int, int]:
    h, w = (int(p) for p in text.lower().split("x"))
    return h, w


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lam-vit-export",
        description="Export frozen-ViT patch features and ground truth for the annotator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_feat = sub.add_parser("features", help="images -> LFT1 feature files + manifest")
    p_feat.add_argument("--images-dir", required=True, type=Path)
    p_feat.add_argument("--out-dir", required=True, type=Path)
    p_feat.add_argument("--backbone", default="vit_b_16")
    p_feat.add_argument("--weights", choices=["pretrained", "none"], default="pretrained")
    p_feat.add_argument("--target-size", default="224x224", help="HxW of the emitted features")
    p_feat.add_argument("--device", default="cpu")
    p_feat.add_argument("--seed", type=int, default=0,
                        help="weight seed when --weights none")

    p_gt = sub.add_parser("labels", help="raw id images -> LLB1 label files")
    p_gt.add_argument("--gt-dir", required=True, type=Path)
    p_gt.add_argument("--out-dir", required=True, type=Path)
    p_gt.add_argument("--remap", required=True, type=Path,
                      help='JSON {"map": {"7": 0}, "void": [255]}')
    p_gt.add_argument("--target-size", default=None,
                      help="optional HxW; nearest-neighbor resize")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "features":
            h, w = _parse_size(args.target_size)
            config = ExportConfig(
                images_dir=args.images_dir,
                out_dir=args.out_dir,
                backbone=args.backbone,
                weights=args.weights,
                target_height=h,
                target_width=w,
                device=args.device,
                seed=args.seed,
            )
            entries = export_features(config)
            ok = sum(e.ok for e in entries)
            print(f"exported {ok}/{len(entries)} images to {args.out_dir}")
            return 0
        if args.command == "labels":
            rules = json.loads(Path(args.remap).read_text())
            target = _parse_size(args.target_size) if args.target_size else None
            written = convert_labels(
                args.gt_dir,
                args.out_dir,
                remap=rules.get("map", {}),
                void_ids=tuple(rules.get("void", ())),
                target_hw=target,
            )
            print(f"converted {len(written)} label maps to {args.out_dir}")
            return 0
    except (UnmappedIdError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
