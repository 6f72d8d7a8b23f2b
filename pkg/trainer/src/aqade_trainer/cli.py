"""Training entry point: one-vs-rest split -> trained CAE -> engine artifacts."""

from __future__ import annotations

import argparse
import sys

from .data import DATASETS, prepare_split
from .export import export_artifacts
from .train import TrainConfig, train_inception_cae


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqade-train",
        description="Train the inception-style CAE on a one-vs-rest image "
                    "split and export engine-ready containers.",
    )
    parser.add_argument("--dataset", required=True, choices=DATASETS)
    parser.add_argument("--normal-class", required=True, type=int)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--data-dir", default=None,
                        help="dataset cache (default: AQADE_DATA_DIR or ./data)")
    parser.add_argument("--epochs1", type=int, default=None,
                        help="searching-phase epochs (default per dataset)")
    parser.add_argument("--epochs2", type=int, default=None,
                        help="fine-tuning-phase epochs (default per dataset)")
    parser.add_argument("--batch-size", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gap-in-training", action="store_true",
                        help="route the decoder through the pooled vector")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = TrainConfig(
        dataset=args.dataset,
        normal_class=args.normal_class,
        epochs_phase1=args.epochs1,
        epochs_phase2=args.epochs2,
        batch_size=args.batch_size,
        seed=args.seed,
        gap_in_training=args.gap_in_training,
    )
    try:
        train_images, test_images, test_labels = prepare_split(
            args.dataset, args.normal_class, args.data_dir
        )
        print(f"training on {len(train_images)} normal-class images",
              file=sys.stderr)
        model, history = train_inception_cae(
            cfg, train_images, log=lambda msg: print(msg, file=sys.stderr)
        )
        paths = export_artifacts(
            model, train_images, test_images, test_labels, args.out_dir
        )
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"aqade-train: error: {exc}", file=sys.stderr)
        return 1
    for kind, path in paths.items():
        print(f"wrote {kind}: {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
