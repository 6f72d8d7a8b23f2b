"""AUC-ROC scoring, multi-run aggregation and the quantization parameter sweep.

AUC is computed from tied ranks (the Mann-Whitney identity): the probability
that a randomly chosen anomaly outscores a randomly chosen normal example,
ties counting one half. The sweep fits one quantized detector per (m, c)
grid cell plus one exact-distance reference row, recording AUC and the
wall-clock scoring time per cell.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import detector
from .pq import PQConfig

__all__ = [
    "LabeledScores",
    "EvalReport",
    "SweepGrid",
    "SweepResult",
    "tied_ranks",
    "auc_roc",
    "aggregate",
    "sweep",
]

DEFAULT_M_VALUES = (1, 2, 4, 8, 16, 32, 64, 128)
DEFAULT_C_VALUES = (1, 2, 3, 4, 5, 6, 7, 8)


@dataclass(frozen=True)
class LabeledScores:
    """Scores with binary labels: 0 = normal, 1 = anomalous."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        y = np.asarray(self.labels)
        if s.ndim != 1 or y.ndim != 1 or s.shape != y.shape:
            raise ValueError("scores and labels must be 1-D and the same length")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 (normal) or 1 (anomalous)")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.uint8))


def tied_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their positions."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    group = np.cumsum(np.r_[True, xs[1:] != xs[:-1]]) - 1
    pos = np.arange(1, n + 1, dtype=np.float64)
    avg = np.bincount(group, weights=pos) / np.bincount(group)
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = avg[group]
    return ranks


def auc_roc(ls: LabeledScores) -> float:
    """Rank-based AUC; requires at least one example of each class."""
    if np.any(np.isnan(ls.scores)):
        raise ValueError("scores contain NaN")
    n1 = int(ls.labels.sum())
    n0 = ls.labels.shape[0] - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both a normal and an anomalous example")
    ranks = tied_ranks(ls.scores)
    rank_sum = float(ranks[ls.labels == 1].sum())
    return (rank_sum - n1 * (n1 + 1) / 2.0) / (n1 * n0)


@dataclass(frozen=True)
class EvalReport:
    """Per-run AUC values with mean/std aggregation and free-form metadata."""

    aucs: tuple[float, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aucs:
            raise ValueError("a report needs at least one AUC value")
        if any(not 0.0 <= a <= 1.0 for a in self.aucs):
            raise ValueError("AUC values must lie in [0, 1]")

    @property
    def mean_auc(self) -> float:
        # fsum: correctly rounded, so aggregation is permutation invariant
        return math.fsum(self.aucs) / len(self.aucs)

    @property
    def std_auc(self) -> float:
        """Sample standard deviation (n-1 denominator); 0 for a single run."""
        if len(self.aucs) < 2:
            return 0.0
        mu = self.mean_auc
        return math.sqrt(math.fsum((a - mu) ** 2 for a in self.aucs)
                         / (len(self.aucs) - 1))

    def to_dict(self) -> dict:
        return {
            "runs": [{"auc": a} for a in self.aucs],
            "aggregate": {"mean_auc": self.mean_auc, "std_auc": self.std_auc},
            "metadata": self.metadata,
        }


def aggregate(reports: list[EvalReport]) -> EvalReport:
    """Pool the runs of several reports into one."""
    if not reports:
        raise ValueError("cannot aggregate an empty report list")
    aucs: list[float] = []
    for r in reports:
        aucs.extend(r.aucs)
    meta: dict = {}
    for r in reports:
        for key, val in r.metadata.items():
            if key not in meta:
                meta[key] = val
            elif meta[key] != val:
                meta[key] = None  # inconsistent across runs
    return EvalReport(aucs=tuple(aucs), metadata=meta)


@dataclass(frozen=True)
class SweepGrid:
    m_values: tuple[int, ...] = DEFAULT_M_VALUES
    c_values: tuple[int, ...] = DEFAULT_C_VALUES
    include_exact: bool = True

    def __post_init__(self):
        if not self.m_values or not self.c_values:
            raise ValueError("sweep grid must not be empty")
        if any(m < 1 for m in self.m_values):
            raise ValueError("all m values must be >= 1")
        if any(not 1 <= c <= 16 for c in self.c_values):
            raise ValueError("all c values must be in 1..16")


@dataclass(frozen=True)
class SweepResult:
    """One sweep row; m/c are None on the exact-distance row."""

    m: int | None
    c: int | None
    auc: float | None
    query_seconds: float | None
    error: str | None = None

    @property
    def is_exact(self) -> bool:
        return self.m is None


def _cell_seed(base_seed: int, cell_index: int) -> int:
    # stable per-cell derivation so parallel execution cannot reorder results
    return base_seed + 100_003 * cell_index


def _timed_auc(
    train: np.ndarray,
    test: np.ndarray,
    labels: np.ndarray,
    cfg: detector.DetectorConfig,
    threads: int,
) -> tuple[float, float]:
    state = detector.fit(train, cfg)
    t0 = time.perf_counter()
    scores = detector.score_batch(state, test, threads=threads)
    elapsed = time.perf_counter() - t0
    return auc_roc(LabeledScores(scores=scores, labels=labels)), elapsed


def sweep(
    train: np.ndarray,
    test: np.ndarray,
    labels: np.ndarray,
    grid: SweepGrid = SweepGrid(),
    k_neighbor: int = 1,
    seeds: tuple[int, ...] = (0,),
    threads: int = 1,
) -> list[SweepResult]:
    """AUC and scoring time for every (m, c) cell, averaged over seeds.

    Cells whose m does not divide the embedding dimension are reported with
    an error string instead of aborting the sweep. The exact-distance
    reference row comes last.
    """
    train = np.asarray(train, dtype=np.float32)
    test = np.asarray(test, dtype=np.float32)
    if not seeds:
        raise ValueError("need at least one seed")
    dim = train.shape[1]
    results: list[SweepResult] = []
    cell = 0
    for m in grid.m_values:
        for c in grid.c_values:
            if dim % m != 0:
                results.append(SweepResult(
                    m=m, c=c, auc=None, query_seconds=None,
                    error=f"dim {dim} not divisible by m={m}",
                ))
                cell += 1
                continue
            aucs, times = [], []
            for s in seeds:
                cfg = detector.DetectorConfig(
                    mode="qed", k_neighbor=k_neighbor,
                    pq=PQConfig(m=m, c_bits=c, seed=_cell_seed(s, cell)),
                )
                a, t = _timed_auc(train, test, labels, cfg, threads)
                aucs.append(a)
                times.append(t)
            results.append(SweepResult(
                m=m, c=c, auc=float(np.mean(aucs)),
                query_seconds=float(np.mean(times)),
            ))
            cell += 1
    if grid.include_exact:
        cfg = detector.DetectorConfig(mode="eed", k_neighbor=k_neighbor)
        a, t = _timed_auc(train, test, labels, cfg, threads)
        results.append(SweepResult(m=None, c=None, auc=a, query_seconds=t))
    return results
