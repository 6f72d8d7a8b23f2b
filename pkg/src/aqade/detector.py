"""Distance-based anomaly scoring over learned embeddings.

A detector is fit on normal-class embeddings only. A test embedding's score
is its squared Euclidean distance to the k-th nearest training embedding,
either table-approximated over a product-quantized index ("qed") or exact
("eed"). Reconstruction-error scoring ("re") runs the autoencoder instead
and needs no fitted training state. Larger scores mean more anomalous.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import pq
from .cae import Model, reconstruction_error
from .nn import validate_tensor

__all__ = ["MODES", "DetectorConfig", "DetectorState", "fit", "score",
           "score_batch", "score_re"]

MODES = ("qed", "eed", "re")


@dataclass(frozen=True)
class DetectorConfig:
    mode: str
    k_neighbor: int = 1
    pq: pq.PQConfig | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.k_neighbor < 1:
            raise ValueError(f"k_neighbor must be >= 1, got {self.k_neighbor}")
        if (self.pq is not None) != (self.mode == "qed"):
            raise ValueError("pq config must be present exactly when mode is 'qed'")


@dataclass
class DetectorState:
    """Fitted scorer; immutable after `fit`."""

    config: DetectorConfig
    n_train: int
    codebook: pq.PQCodebook | None = None
    codes: pq.PQCodes | None = None
    train: np.ndarray | None = None


def fit(train_embeddings: np.ndarray, cfg: DetectorConfig) -> DetectorState:
    """Index the normal-class embedding matrix for the configured mode."""
    if cfg.mode == "re":
        return DetectorState(config=cfg, n_train=0)
    train = np.asarray(train_embeddings, dtype=np.float32)
    if train.ndim != 2 or train.shape[0] == 0:
        raise ValueError("training embeddings must be a non-empty n x D matrix")
    if train.shape[0] < cfg.k_neighbor:
        raise ValueError(
            f"k_neighbor={cfg.k_neighbor} exceeds training size {train.shape[0]}"
        )
    if cfg.mode == "qed":
        cb = pq.fit_codebook(train, cfg.pq)
        return DetectorState(
            config=cfg, n_train=train.shape[0], codebook=cb,
            codes=pq.encode(cb, train),
        )
    return DetectorState(config=cfg, n_train=train.shape[0], train=train)


def score(state: DetectorState, embedding: np.ndarray) -> float:
    """Distance to the k_neighbor-th nearest training embedding."""
    k = state.config.k_neighbor
    if state.config.mode == "qed":
        return pq.knn_quantized(state.codebook, state.codes, embedding, k)[k - 1][1]
    if state.config.mode == "eed":
        return pq.knn_exact(state.train, embedding, k)[k - 1][1]
    raise ValueError("reconstruction-error mode is scored with score_re")


def score_batch(
    state: DetectorState, embeddings: np.ndarray, threads: int = 1
) -> np.ndarray:
    """One score per row, order preserved."""
    embeddings = np.asarray(embeddings, dtype=np.float32)
    if embeddings.ndim != 2:
        raise ValueError("embeddings must be a T x D matrix")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda e: score(state, e), embeddings))
    else:
        rows = [score(state, e) for e in embeddings]
    return np.asarray(rows, dtype=np.float64)


def score_re(model: Model, images: np.ndarray) -> np.ndarray:
    """Per-image reconstruction error for a batch N x H x W x C."""
    images = validate_tensor(images, rank=4)
    return np.asarray(
        [reconstruction_error(model, im) for im in images], dtype=np.float64
    )
