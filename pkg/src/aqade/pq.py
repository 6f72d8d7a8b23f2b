"""Product quantization: codebook training, encoding and lookup-table search.

A D-dimensional vector is split into m contiguous equal-width partitions.
Each partition gets its own codebook of 2^c_bits centroids learned by
k-means, and a vector is stored as m small integer codes. Query distances
are then approximated per partition from a precomputed table of squared
L2 distances to every centroid (asymmetric distance computation), summed
across partitions. Searches scan every stored code; there is no pruning.

All randomness is driven by explicit seeds; fixed seeds give bit-identical
codebooks and codes. Ties (nearest centroid, nearest neighbor) always break
toward the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PQConfig",
    "PQCodebook",
    "PQCodes",
    "kmeans",
    "fit_codebook",
    "encode",
    "reconstruct",
    "build_lut",
    "adc_distance",
    "knn_quantized",
    "knn_exact",
]

# chunk size (elements of the n x k x d difference tensor) for distance kernels
_CHUNK_ELEMS = 1 << 22


@dataclass(frozen=True)
class PQConfig:
    """Quantizer parameters: m partitions, 2^c_bits centroids each."""

    m: int
    c_bits: int
    seed: int = 0
    kmeans_max_iter: int = 25
    kmeans_tol: float = 1e-4

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 1 <= self.c_bits <= 16:
            raise ValueError(f"c_bits must be in 1..16, got {self.c_bits}")
        if self.kmeans_max_iter < 1:
            raise ValueError("kmeans_max_iter must be positive")
        if self.kmeans_tol < 0:
            raise ValueError("kmeans_tol must be non-negative")

    @property
    def k_centroids(self) -> int:
        return 1 << self.c_bits


@dataclass(frozen=True)
class PQCodebook:
    """Per-partition centroid tables: m x k_centroids x (D/m), float32."""

    config: PQConfig
    dim: int
    centroids: np.ndarray

    def __post_init__(self):
        m, k = self.config.m, self.config.k_centroids
        want = (m, k, self.dim // m)
        if self.centroids.shape != want:
            raise ValueError(f"centroid table shape {self.centroids.shape} != {want}")
        if self.centroids.dtype != np.float32:
            raise ValueError("centroids must be float32")
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids contain non-finite values")

    @property
    def subdim(self) -> int:
        return self.dim // self.config.m


@dataclass(frozen=True)
class PQCodes:
    """Code matrix, one row of m centroid ids per encoded vector."""

    codes: np.ndarray

    def __post_init__(self):
        if self.codes.ndim != 2:
            raise ValueError("codes must be an n x m matrix")
        if self.codes.dtype not in (np.uint8, np.uint16):
            raise ValueError(f"codes must be uint8/uint16, got {self.codes.dtype}")

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def m(self) -> int:
        return self.codes.shape[1]


def _as_matrix(x: np.ndarray, name: str = "points") -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got rank {x.ndim}")
    return x


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Exact squared L2 distances (float64), n x k, chunked over rows."""
    n, d = x.shape
    k = centroids.shape[0]
    xd = x.astype(np.float64)
    cd = centroids.astype(np.float64)
    out = np.empty((n, k), dtype=np.float64)
    rows = max(1, _CHUNK_ELEMS // (k * d))
    for s in range(0, n, rows):
        diff = xd[s : s + rows, None, :] - cd[None, :, :]
        out[s : s + rows] = np.einsum("nkd,nkd->nk", diff, diff)
    return out


def _inertia(x: np.ndarray, centroids: np.ndarray, assign: np.ndarray) -> float:
    diff = x.astype(np.float64) - centroids[assign].astype(np.float64)
    return float(np.einsum("nd,nd->n", diff, diff).sum())


def _kmeanspp_init(
    x: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Seeded k-means++ start; duplicates points once the data is exhausted."""
    n = x.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = _sq_dists(x, x[chosen[:1]])[:, 0]
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            chosen[i] = rng.integers(n)
        else:
            chosen[i] = rng.choice(n, p=d2 / total)
            d2 = np.minimum(d2, _sq_dists(x, x[chosen[i] : chosen[i] + 1])[:, 0])
    return x[chosen].copy()


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 25,
    tol: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray]:
    """Lloyd's algorithm with seeded k-means++ initialization.

    Stops after `max_iter` update steps or once the relative inertia
    improvement falls below `tol`. Empty clusters are re-seeded with the
    point currently farthest from its centroid. Assignment ties break
    toward the lowest centroid index. Returns (centroids k x d float32,
    assignments length n).
    """
    points = _as_matrix(points)
    n, d = points.shape
    if n == 0:
        raise ValueError("cannot run k-means on an empty matrix")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not np.all(np.isfinite(points)):
        raise ValueError("k-means input contains non-finite values")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, k, rng)
    prev_inertia = np.inf
    prev_state = None

    for it in range(max_iter + 1):
        dists = _sq_dists(points, centroids)
        assign = dists.argmin(axis=1)

        counts = np.bincount(assign, minlength=k)
        if np.any(counts == 0):
            mind = dists[np.arange(n), assign].copy()
            for c in np.flatnonzero(counts == 0):
                if mind.max() < 0.0:
                    break  # every point already consumed (k > n)
                far = int(mind.argmax())
                centroids[c] = points[far]
                assign[far] = c
                mind[far] = -1.0

        inertia = _inertia(points, centroids, assign)
        if inertia > prev_inertia:
            # float32 centroid rounding can wiggle by an ulp; keep the best
            centroids, assign, inertia = prev_state
            break
        prev_state = (centroids.copy(), assign, inertia)
        if prev_inertia - inertia < tol * prev_inertia or it == max_iter:
            break
        prev_inertia = inertia

        counts = np.bincount(assign, minlength=k).astype(np.float64)
        sums = np.empty((k, d), dtype=np.float64)
        for j in range(d):
            sums[:, j] = np.bincount(assign, weights=points[:, j], minlength=k)
        nonempty = counts > 0
        centroids = centroids.copy()
        centroids[nonempty] = (sums[nonempty] / counts[nonempty, None]).astype(
            np.float32
        )

    return centroids, assign


def fit_codebook(train: np.ndarray, cfg: PQConfig) -> PQCodebook:
    """Learn one k-means codebook per contiguous column partition."""
    train = _as_matrix(train, "train")
    n, dim = train.shape
    if n == 0:
        raise ValueError("cannot fit a codebook on an empty matrix")
    if dim % cfg.m != 0:
        raise ValueError(f"dim {dim} not divisible by m={cfg.m}")
    ds = dim // cfg.m
    centroids = np.empty((cfg.m, cfg.k_centroids, ds), dtype=np.float32)
    for j in range(cfg.m):
        sub = train[:, j * ds : (j + 1) * ds]
        centroids[j], _ = kmeans(
            sub,
            cfg.k_centroids,
            seed=cfg.seed + j,
            max_iter=cfg.kmeans_max_iter,
            tol=cfg.kmeans_tol,
        )
    return PQCodebook(config=cfg, dim=dim, centroids=centroids)


def encode(cb: PQCodebook, vectors: np.ndarray) -> PQCodes:
    """Map each subvector to its nearest centroid id (ties: lowest index)."""
    vectors = _as_matrix(vectors, "vectors")
    if vectors.shape[1] != cb.dim:
        raise ValueError(f"vectors have dim {vectors.shape[1]}, codebook {cb.dim}")
    m, ds = cb.config.m, cb.subdim
    dtype = np.uint8 if cb.config.c_bits <= 8 else np.uint16
    codes = np.empty((vectors.shape[0], m), dtype=dtype)
    for j in range(m):
        sub = vectors[:, j * ds : (j + 1) * ds]
        codes[:, j] = _sq_dists(sub, cb.centroids[j]).argmin(axis=1)
    return PQCodes(codes=codes)


def reconstruct(cb: PQCodebook, code: np.ndarray) -> np.ndarray:
    """Concatenate the selected centroid of every partition."""
    code = np.asarray(code)
    if code.shape != (cb.config.m,):
        raise ValueError(f"code must have {cb.config.m} entries, got {code.shape}")
    if np.any(code >= cb.config.k_centroids):
        raise ValueError("code id out of range for this codebook")
    return cb.centroids[np.arange(cb.config.m), code].reshape(-1).copy()


def build_lut(cb: PQCodebook, query: np.ndarray) -> np.ndarray:
    """Squared L2 from each query subvector to every centroid: m x k float32."""
    query = np.asarray(query, dtype=np.float32)
    if query.shape != (cb.dim,):
        raise ValueError(f"query must have dim {cb.dim}, got {query.shape}")
    subs = query.reshape(cb.config.m, 1, cb.subdim).astype(np.float64)
    diff = subs - cb.centroids.astype(np.float64)
    return np.einsum("mkd,mkd->mk", diff, diff).astype(np.float32)


def _check_lut_codes(lut: np.ndarray, codes: np.ndarray) -> None:
    m, k = lut.shape
    if codes.shape[-1] != m:
        raise ValueError(f"codes have {codes.shape[-1]} partitions, lut has {m}")
    if np.any(codes >= k):
        raise ValueError("code id out of range for this lookup table")


def adc_distance(lut: np.ndarray, code: np.ndarray) -> float:
    """Approximate squared distance: sum of one table entry per partition."""
    code = np.asarray(code)
    _check_lut_codes(lut, code)
    return float(lut[np.arange(lut.shape[0]), code].sum(dtype=np.float64))


def _top_k(dists: np.ndarray, k: int) -> list[tuple[int, float]]:
    if k == 1:
        i = int(dists.argmin())
        return [(i, float(dists[i]))]
    order = np.argsort(dists, kind="stable")[:k]
    return [(int(i), float(dists[i])) for i in order]


def knn_quantized(
    cb: PQCodebook, codes: PQCodes, query: np.ndarray, k: int
) -> list[tuple[int, float]]:
    """k smallest table-lookup distances over all codes, ascending, full scan."""
    if codes.n == 0:
        raise ValueError("cannot search an empty index")
    if not 1 <= k <= codes.n:
        raise ValueError(f"k must be in 1..{codes.n}, got {k}")
    lut = build_lut(cb, query)
    _check_lut_codes(lut, codes.codes)
    gathered = lut[np.arange(codes.m)[None, :], codes.codes]
    dists = gathered.sum(axis=1, dtype=np.float64)
    return _top_k(dists, k)


def exact_sq_dists(database: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Exact squared L2 distance from query to every database row (float64)."""
    database = _as_matrix(database, "database")
    query = np.asarray(query, dtype=np.float32)
    if query.shape != (database.shape[1],):
        raise ValueError(
            f"query dim {query.shape} does not match database dim {database.shape[1]}"
        )
    n, d = database.shape
    qd = query.astype(np.float64)
    out = np.empty(n, dtype=np.float64)
    rows = max(1, _CHUNK_ELEMS // max(d, 1))
    for s in range(0, n, rows):
        diff = database[s : s + rows].astype(np.float64) - qd
        out[s : s + rows] = np.einsum("nd,nd->n", diff, diff)
    return out


def knn_exact(
    database: np.ndarray, query: np.ndarray, k: int
) -> list[tuple[int, float]]:
    """k nearest database rows by exact squared L2, ascending."""
    database = _as_matrix(database, "database")
    if database.shape[0] == 0:
        raise ValueError("cannot search an empty database")
    if not 1 <= k <= database.shape[0]:
        raise ValueError(f"k must be in 1..{database.shape[0]}, got {k}")
    return _top_k(exact_sq_dists(database, query), k)
