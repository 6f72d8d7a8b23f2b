"""Binary container writers for the engine's file formats.

Deliberately independent of the engine's own serializer: the trainer talks
to the engine only through the documented formats, so parity tests exercise
a genuine cross-implementation boundary.

AEDT tensor:  "AEDT" | version u32=1 | dtype u8 (0=f32, 1=u8) | rank u8
              | dims rank x u64 | row-major little-endian payload
AEDW weights: "AEDW" | version u32=1 | entry_count u32 | per entry:
              name_len u16 | utf-8 name | rank u8 | dims rank x u64 | f32 data
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np
import torch

from .model import BRANCH_KERNELS, InceptionCAE

VERSION = 1


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


def write_tensor(path: str, t: np.ndarray) -> None:
    if t.dtype == np.float32:
        code = 0
    elif t.dtype == np.uint8:
        code = 1
    else:
        raise ValueError(f"unsupported dtype {t.dtype}")
    if not 1 <= t.ndim <= 4 or any(d < 1 for d in t.shape):
        raise ValueError(f"bad tensor shape {t.shape}")
    head = b"AEDT" + struct.pack("<IBB", VERSION, code, t.ndim)
    head += struct.pack(f"<{t.ndim}Q", *t.shape)
    _atomic_write(path, head + np.ascontiguousarray(t).tobytes())


def read_tensor(path: str) -> np.ndarray:
    raw = open(path, "rb").read()
    if raw[:4] != b"AEDT":
        raise ValueError(f"{path}: not an AEDT file")
    version, code, rank = struct.unpack("<IBB", raw[4:10])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    dims = struct.unpack(f"<{rank}Q", raw[10 : 10 + 8 * rank])
    dt = np.dtype("<f4") if code == 0 else np.dtype("u1")
    payload = raw[10 + 8 * rank :]
    return np.frombuffer(payload, dtype=dt).reshape(dims).copy()


def write_weights(path: str, weights: dict[str, np.ndarray]) -> None:
    parts = [b"AEDW", struct.pack("<II", VERSION, len(weights))]
    for name, arr in weights.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<B{arr.ndim}Q", arr.ndim, *arr.shape))
        parts.append(arr.tobytes())
    _atomic_write(path, b"".join(parts))


def read_weights(path: str) -> dict[str, np.ndarray]:
    raw = open(path, "rb").read()
    if raw[:4] != b"AEDW":
        raise ValueError(f"{path}: not an AEDW file")
    version, count = struct.unpack("<II", raw[4:12])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (rank,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        dims = struct.unpack_from(f"<{rank}Q", raw, pos)
        pos += 8 * rank
        n = int(np.prod(dims))
        out[name] = np.frombuffer(raw, dtype="<f4", count=n, offset=pos).reshape(dims).copy()
        pos += 4 * n
    return out


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().cpu().numpy().astype(np.float32)


def weights_from_model(model: InceptionCAE) -> dict[str, np.ndarray]:
    """Flatten a trained model into the canonical engine naming scheme.

    Conv kernels go out as Kh x Kw x Cin x Cout (torch stores Cout x Cin x
    Kh x Kw); batch-norm entries carry the moving statistics.
    """
    out: dict[str, np.ndarray] = {}

    def put_block(stage: str, block) -> None:
        for branch, _ in BRANCH_KERNELS:
            b = getattr(block, branch)
            prefix = f"{stage}.{branch}"
            out[f"{prefix}.conv.w"] = _np(b.conv.weight.permute(2, 3, 1, 0))
            out[f"{prefix}.conv.b"] = _np(b.conv.bias)
            out[f"{prefix}.bn.gamma"] = _np(b.bn.weight)
            out[f"{prefix}.bn.beta"] = _np(b.bn.bias)
            out[f"{prefix}.bn.mean"] = _np(b.bn.running_mean)
            out[f"{prefix}.bn.var"] = _np(b.bn.running_var)

    for i, block in enumerate(model.encoder):
        put_block(f"enc{i + 1}", block)
    for i, block in enumerate(model.decoder):
        put_block(f"dec{i + 1}", block)
    out["final.conv.w"] = _np(model.final.weight.permute(2, 3, 1, 0))
    out["final.conv.b"] = _np(model.final.bias)
    out["meta.bn_epsilon"] = np.array([model.bn_eps], dtype=np.float32)
    out["meta.alpha"] = np.array([model.alpha], dtype=np.float32)
    out["meta.n_channels"] = np.array([model.n_channels], dtype=np.float32)
    return out


def embed_images(model: InceptionCAE, images_nhwc: np.ndarray,
                 batch_size: int = 256) -> np.ndarray:
    """Trainer-side embedding pass (eval mode), NHWC float input."""
    model.eval()
    chunks = []
    with torch.no_grad():
        for s in range(0, len(images_nhwc), batch_size):
            x = torch.from_numpy(images_nhwc[s : s + batch_size]).permute(0, 3, 1, 2)
            chunks.append(model.embed(x.to(next(model.parameters()).dtype)))
    return torch.cat(chunks).cpu().numpy().astype(np.float32)


def export_artifacts(
    model: InceptionCAE,
    train_images: np.ndarray,
    test_images: np.ndarray,
    test_labels: np.ndarray,
    out_dir: str,
) -> dict[str, str]:
    """Write weights, train embeddings, test images and labels."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "weights": os.path.join(out_dir, "weights.aedw"),
        "train_embeddings": os.path.join(out_dir, "train_embeddings.aedt"),
        "test_images": os.path.join(out_dir, "test_images.aedt"),
        "test_labels": os.path.join(out_dir, "test_labels.aedt"),
    }
    write_weights(paths["weights"], weights_from_model(model))
    write_tensor(paths["train_embeddings"], embed_images(model, train_images))
    write_tensor(paths["test_images"], test_images.astype(np.float32))
    write_tensor(paths["test_labels"], test_labels.astype(np.uint8))
    return paths
