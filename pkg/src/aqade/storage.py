"""Bit-exact binary containers for tensors, model weights and PQ indexes.

Three little-endian formats, all validated on read and written atomically
(temp file + rename, so a failed write never leaves partial output):

AEDT tensor file:
    magic "AEDT" | version u32 | dtype u8 (0=f32, 1=u8) | rank u8 (1..4)
    | dims rank x u64 | payload row-major

AEDW weight container:
    magic "AEDW" | version u32 | entry_count u32 | entries of
    { name_len u16 | name utf-8 | rank u8 | dims rank x u64 | f32 payload }

AEDI quantized index:
    magic "AEDI" | version u32 | D u32 | m u32 | c_bits u8 | n u64
    | centroids m x 2^c_bits x (D/m) f32
    | codes bit-packed c_bits per code, rows padded to a byte boundary

Plus the two text side-formats: score CSV files (`index,score`) and JSON
evaluation reports.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from typing import Iterable, Mapping

import numpy as np

from .cae import ModelSpec, required_weight_names
from .pq import PQCodebook, PQCodes, PQConfig

__all__ = [
    "FormatError",
    "write_tensor",
    "read_tensor",
    "write_weights",
    "read_weights",
    "write_index",
    "read_index",
    "write_scores_csv",
    "read_scores_csv",
    "write_report_json",
    "write_sweep_csv",
]

FORMAT_VERSION = 1
_DTYPE_CODES = {0: np.dtype("<f4"), 1: np.dtype("u1")}
_MAX_RANK = 4


class FormatError(ValueError):
    """Raised for malformed or mismatched container files."""


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    """Cursor over a byte buffer with truncation checks."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise FormatError(
                f"{self.path}: {len(self.data) - self.pos} trailing bytes"
            )


def _check_header(r: _Reader, magic: bytes) -> None:
    got = r.take(4)
    if got != magic:
        raise FormatError(
            f"{r.path}: bad magic {got!r}, expected {magic.decode()} file"
        )
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise FormatError(f"{r.path}: unsupported version {version}")


def _check_dims(dims: tuple[int, ...], path: str) -> None:
    if not 1 <= len(dims) <= _MAX_RANK:
        raise FormatError(f"{path}: rank must be 1..{_MAX_RANK}, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise FormatError(f"{path}: all dims must be >= 1, got {dims}")


def _tensor_bytes(t: np.ndarray) -> bytes:
    if t.dtype == np.float32:
        code, dt = 0, np.dtype("<f4")
    elif t.dtype == np.uint8:
        code, dt = 1, np.dtype("u1")
    else:
        raise FormatError(f"unsupported tensor dtype {t.dtype}")
    _check_dims(t.shape, "<write>")
    head = b"AEDT" + struct.pack("<IBB", FORMAT_VERSION, code, t.ndim)
    head += struct.pack(f"<{t.ndim}Q", *t.shape)
    return head + np.ascontiguousarray(t, dtype=dt).tobytes()


def write_tensor(path: str, t: np.ndarray) -> None:
    _atomic_write(path, _tensor_bytes(np.asarray(t)))


def read_tensor(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"AEDT")
    code, rank = r.unpack("<BB")
    if code not in _DTYPE_CODES:
        raise FormatError(f"{path}: unknown dtype code {code}")
    if not 1 <= rank <= _MAX_RANK:
        raise FormatError(f"{path}: rank must be 1..{_MAX_RANK}, got {rank}")
    dims = r.unpack(f"<{rank}Q")
    _check_dims(dims, path)
    dt = _DTYPE_CODES[code]
    count = int(np.prod(dims, dtype=object))
    payload = r.take(count * dt.itemsize)
    r.expect_end()
    return np.frombuffer(payload, dtype=dt).reshape(dims).copy()


def write_weights(path: str, weights: Mapping[str, np.ndarray]) -> None:
    """Write a named-tensor archive; entry order follows the mapping."""
    seen = set()
    parts = [b"AEDW", struct.pack("<II", FORMAT_VERSION, len(weights))]
    for name, arr in weights.items():
        if name in seen:
            raise FormatError(f"duplicate weight name {name!r}")
        seen.add(name)
        arr = np.asarray(arr, dtype="<f4")
        _check_dims(arr.shape, "<write>")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise FormatError(f"weight name too long: {name[:40]}...")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}Q", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    _atomic_write(path, b"".join(parts))


def read_weights(path: str, spec: ModelSpec | None = None) -> dict[str, np.ndarray]:
    """Read an AEDW archive; with a spec, also check required names exist."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"AEDW")
    (count,) = r.unpack("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        if name in out:
            raise FormatError(f"{path}: duplicate weight name {name!r}")
        (rank,) = r.unpack("<B")
        if not 1 <= rank <= _MAX_RANK:
            raise FormatError(f"{path}: entry {name!r} has bad rank {rank}")
        dims = r.unpack(f"<{rank}Q")
        _check_dims(dims, path)
        n_elems = int(np.prod(dims, dtype=object))
        payload = r.take(n_elems * 4)
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    r.expect_end()
    if spec is not None:
        missing = [n for n in required_weight_names(spec) if n not in out]
        if missing:
            raise FormatError(f"{path}: missing required weights {missing}")
    return out


def _pack_codes(codes: np.ndarray, c_bits: int) -> bytes:
    """Little-endian bit packing, each row padded to a whole byte."""
    n, m = codes.shape
    if np.any(codes >= (1 << c_bits)):
        raise FormatError(f"code value does not fit in {c_bits} bits")
    shifts = np.arange(c_bits, dtype=np.uint16)
    bits = ((codes.astype(np.uint16)[:, :, None] >> shifts) & 1).astype(np.uint8)
    packed = np.packbits(bits.reshape(n, m * c_bits), axis=1, bitorder="little")
    return packed.tobytes()


def _unpack_codes(buf: bytes, n: int, m: int, c_bits: int) -> np.ndarray:
    row_bytes = (m * c_bits + 7) // 8
    packed = np.frombuffer(buf, dtype=np.uint8).reshape(n, row_bytes)
    bits = np.unpackbits(packed, axis=1, bitorder="little", count=m * c_bits)
    weights = 1 << np.arange(c_bits, dtype=np.uint32)
    vals = (bits.reshape(n, m, c_bits).astype(np.uint32) * weights).sum(axis=2)
    return vals.astype(np.uint8 if c_bits <= 8 else np.uint16)


def write_index(path: str, cb: PQCodebook, codes: PQCodes) -> None:
    cfg = cb.config
    if codes.m != cfg.m:
        raise FormatError(f"codes have {codes.m} partitions, codebook {cfg.m}")
    head = b"AEDI" + struct.pack(
        "<IIIBQ", FORMAT_VERSION, cb.dim, cfg.m, cfg.c_bits, codes.n
    )
    body = np.ascontiguousarray(cb.centroids, dtype="<f4").tobytes()
    body += _pack_codes(codes.codes, cfg.c_bits)
    _atomic_write(path, head + body)


def read_index(path: str) -> tuple[PQCodebook, PQCodes]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"AEDI")
    dim, m, c_bits, n = r.unpack("<IIBQ")
    if m < 1 or not 1 <= c_bits <= 16:
        raise FormatError(f"{path}: bad quantizer parameters m={m}, c_bits={c_bits}")
    if dim % m != 0:
        raise FormatError(f"{path}: dim {dim} not divisible by m={m}")
    k = 1 << c_bits
    sub = dim // m
    cents = np.frombuffer(r.take(m * k * sub * 4), dtype="<f4")
    cents = cents.reshape(m, k, sub).copy()
    row_bytes = (m * c_bits + 7) // 8
    codes = _unpack_codes(r.take(n * row_bytes), n, m, c_bits)
    r.expect_end()
    cb = PQCodebook(config=PQConfig(m=m, c_bits=c_bits), dim=dim, centroids=cents)
    return cb, PQCodes(codes=codes)


def write_scores_csv(path: str, scores: np.ndarray) -> None:
    # repr: shortest decimal that round-trips the exact float64 value
    lines = ["index,score"]
    lines += [f"{i},{float(s)!r}" for i, s in enumerate(np.asarray(scores))]
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def read_scores_csv(path: str) -> np.ndarray:
    scores = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line or (lineno == 0 and line.startswith("index")):
                continue
            try:
                _, score = line.split(",")
                scores.append(float(score))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno + 1}: bad score line") from exc
    return np.asarray(scores, dtype=np.float64)


def write_report_json(path: str, report: dict) -> None:
    _atomic_write(path, (json.dumps(report, indent=2, sort_keys=True) + "\n").encode())


def write_sweep_csv(path: str, rows: Iterable) -> None:
    """Rows need m, c, auc, query_seconds, error attributes (see SweepResult)."""

    def cell(v, fmt=repr):
        return "" if v is None else fmt(v)

    lines = ["m,c,auc,query_seconds,error"]
    for row in rows:
        name = "exact" if row.m is None else str(row.m)
        lines.append(",".join([
            name,
            cell(row.c, str),
            cell(row.auc),
            cell(row.query_seconds, "{:.6g}".format),
            row.error or "",
        ]))
    _atomic_write(path, ("\n".join(lines) + "\n").encode())
