"""Command-line pipeline: extract, fit, score, eval, sweep.

Data goes to files, timing goes to stderr. Exit codes: 0 success, 1 runtime
error, 2 usage error. Worker count comes from --threads, falling back to the
AQADE_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import detector, evaluation, storage
from .cae import ModelSpec, build_model, extract_batch
from .pq import PQConfig

__all__ = ["main"]


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text}")
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _threads(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("AQADE_THREADS", "")
    return int(env) if env.isdigit() and int(env) >= 1 else 1


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def cmd_extract(args: argparse.Namespace) -> int:
    weights = storage.read_weights(args.weights)
    n_channels = int(np.asarray(weights["meta.n_channels"]).reshape(-1)[0])
    model = build_model(ModelSpec(n_channels=n_channels), weights)
    images = storage.read_tensor(args.images)
    if images.ndim != 4:
        raise ValueError(f"{args.images}: expected an N x H x W x C image batch")
    if images.dtype != np.float32:
        images = (images.astype(np.float32) / 255.0) if images.dtype == np.uint8 \
            else images.astype(np.float32)
    t0 = time.perf_counter()
    emb = extract_batch(model, images, threads=_threads(args))
    _note(f"extracted {emb.shape[0]} embeddings in {time.perf_counter() - t0:.3f}s")
    storage.write_tensor(args.out, emb.astype(np.float32))
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    train = storage.read_tensor(args.embeddings)
    if train.ndim != 2:
        raise ValueError(f"{args.embeddings}: expected an N x D embedding matrix")
    cfg = detector.DetectorConfig(
        mode="qed", k_neighbor=1,
        pq=PQConfig(m=args.m, c_bits=args.c, seed=args.seed),
    )
    t0 = time.perf_counter()
    state = detector.fit(train.astype(np.float32), cfg)
    fit_seconds = time.perf_counter() - t0
    storage.write_index(args.out, state.codebook, state.codes)
    row_bytes = (args.m * args.c + 7) // 8
    _note(f"fit {state.n_train} vectors in {fit_seconds:.3f}s; "
          f"codes: {row_bytes} bytes/vector, {state.n_train * row_bytes} bytes total")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    test = storage.read_tensor(args.embeddings)
    if test.ndim != 2:
        raise ValueError(f"{args.embeddings}: expected a T x D embedding matrix")
    test = test.astype(np.float32)
    if args.exact:
        train = storage.read_tensor(args.train)
        cfg = detector.DetectorConfig(mode="eed", k_neighbor=args.k)
        state = detector.fit(train.astype(np.float32), cfg)
    else:
        codebook, codes = storage.read_index(args.index)
        if codes.n < args.k:
            raise ValueError(f"k={args.k} exceeds indexed size {codes.n}")
        cfg = detector.DetectorConfig(
            mode="qed", k_neighbor=args.k, pq=codebook.config
        )
        state = detector.DetectorState(
            config=cfg, n_train=codes.n, codebook=codebook, codes=codes
        )
    t0 = time.perf_counter()
    scores = detector.score_batch(state, test, threads=_threads(args))
    _note(f"scored {len(scores)} embeddings in {time.perf_counter() - t0:.3f}s")
    storage.write_scores_csv(args.out, scores)
    return 0


def _read_labels(path: str) -> np.ndarray:
    labels = storage.read_tensor(path)
    if labels.ndim != 1:
        raise ValueError(f"{path}: expected a rank-1 label vector")
    return labels.astype(np.uint8)


def cmd_eval(args: argparse.Namespace) -> int:
    scores = storage.read_scores_csv(args.scores)
    labels = _read_labels(args.labels)
    ls = evaluation.LabeledScores(scores=scores, labels=labels)
    auc = evaluation.auc_roc(ls)
    report = evaluation.EvalReport(
        aucs=(auc,),
        metadata={"n_normal": int((labels == 0).sum()),
                  "n_anomalous": int((labels == 1).sum()),
                  "scores_file": os.path.basename(args.scores)},
    )
    storage.write_report_json(args.out, report.to_dict())
    if args.figures:
        from . import viz
        for p in viz.plot_scores(ls, args.figures):
            _note(f"wrote {p}")
    _note(f"auc={auc:.6f}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    train = storage.read_tensor(args.train).astype(np.float32)
    test = storage.read_tensor(args.test).astype(np.float32)
    labels = _read_labels(args.labels)
    grid = evaluation.SweepGrid(
        m_values=args.m_list, c_values=args.c_list,
        include_exact=not args.no_exact,
    )
    rows = evaluation.sweep(
        train, test, labels, grid=grid, k_neighbor=args.k,
        seeds=args.seeds, threads=_threads(args),
    )
    storage.write_sweep_csv(args.out, rows)
    failed = [r for r in rows if r.error]
    _note(f"swept {len(rows)} rows ({len(failed)} failed cells)")
    if args.figures:
        from . import viz
        for p in viz.plot_sweep(rows, args.figures):
            _note(f"wrote {p}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqade",
        description="Distance-based image anomaly detection over learned "
                    "embeddings with product-quantized nearest-neighbor search.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="images -> embedding matrix")
    p.add_argument("--weights", required=True, help="AEDW weight container")
    p.add_argument("--images", required=True, help="AEDT image batch (N x H x W x C)")
    p.add_argument("--out", required=True, help="output AEDT embedding matrix")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fit", help="embeddings -> quantized index")
    p.add_argument("--embeddings", required=True, help="AEDT training embeddings")
    p.add_argument("--m", type=_positive_int, default=32, help="partitions")
    p.add_argument("--c", type=_positive_int, default=4, help="bits per code")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output AEDI index")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="embeddings -> anomaly score CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--index", help="AEDI index (quantized distances)")
    src.add_argument("--train", help="AEDT training embeddings (with --exact)")
    p.add_argument("--exact", action="store_true",
                   help="use exact squared distances over --train")
    p.add_argument("--embeddings", required=True, help="AEDT test embeddings")
    p.add_argument("--k", type=_positive_int, default=1, help="neighbor rank")
    p.add_argument("--out", required=True, help="output CSV (index,score)")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="scores + labels -> AUC report")
    p.add_argument("--scores", required=True, help="score CSV from `score`")
    p.add_argument("--labels", required=True, help="AEDT u8 label vector")
    p.add_argument("--out", required=True, help="output JSON report")
    p.add_argument("--figures", default=None, help="also render figures here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="quantization parameter grid")
    p.add_argument("--train", required=True, help="AEDT training embeddings")
    p.add_argument("--test", required=True, help="AEDT test embeddings")
    p.add_argument("--labels", required=True, help="AEDT u8 label vector")
    p.add_argument("--m-list", type=_int_list,
                   default=evaluation.DEFAULT_M_VALUES, help="comma-separated")
    p.add_argument("--c-list", type=_int_list,
                   default=evaluation.DEFAULT_C_VALUES, help="comma-separated")
    p.add_argument("--seeds", type=_int_list, default=(0,), help="comma-separated")
    p.add_argument("--k", type=_positive_int, default=1, help="neighbor rank")
    p.add_argument("--no-exact", action="store_true",
                   help="skip the exact-distance reference row")
    p.add_argument("--out", required=True, help="output sweep CSV")
    p.add_argument("--figures", default=None, help="also render figures here")
    p.add_argument("--threads", type=_positive_int, default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "score" and args.exact and not args.train:
        print("aqade score: --exact requires --train", file=sys.stderr)
        return 2
    if args.command == "score" and args.train and not args.exact:
        print("aqade score: --train requires --exact", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"aqade {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
