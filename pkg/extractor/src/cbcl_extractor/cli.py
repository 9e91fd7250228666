"""Command-line entry point: image trees in, CBF features + manifest out."""

import argparse
import logging
import sys

from .backbones import BACKBONES
from .extract import ExtractSpec, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbcl-extract",
        description=(
            "Extract second-fully-connected-layer CNN features from paired "
            "RGB/depth image trees into CBF feature files plus a label manifest."
        ),
    )
    parser.add_argument("--root", required=True, help="dataset root directory")
    parser.add_argument("--rgb-sub", default="rgb", help="rgb modality subfolder name")
    parser.add_argument("--depth-sub", default="depth", help="depth modality subfolder name")
    parser.add_argument("--out-rgb", required=True, help="output rgb CBF path")
    parser.add_argument("--out-depth", required=True, help="output depth CBF path")
    parser.add_argument("--manifest", required=True, help="output label-manifest CSV path")
    parser.add_argument("--split-ratio", type=float, default=0.5)
    parser.add_argument(
        "--split-manifest", default=None, help="explicit relpath,split CSV (overrides ratio)"
    )
    parser.add_argument("--backbone", choices=BACKBONES, default="vgg16")
    parser.add_argument(
        "--weights",
        default="imagenet",
        help="state-dict path, 'imagenet' (downloads), or 'none' (seeded random)",
    )
    parser.add_argument("--resize", type=int, default=256)
    parser.add_argument("--crop", type=int, default=224)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    spec = ExtractSpec(
        root=args.root,
        rgb_sub=args.rgb_sub,
        depth_sub=args.depth_sub,
        out_rgb=args.out_rgb,
        out_depth=args.out_depth,
        manifest=args.manifest,
        backbone=args.backbone,
        weights=args.weights,
        resize=args.resize,
        crop=args.crop,
        split_ratio=args.split_ratio,
        split_manifest=args.split_manifest,
        batch_size=args.batch_size,
        seed=args.seed,
        device=args.device,
    )
    try:
        summary = extract(spec)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(
        f"extracted={summary.extracted} skipped={summary.skipped} "
        f"rgb_dim={summary.rgb_dim} depth_dim={summary.depth_dim}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
