"""One-vs-rest dataset splits and synthetic stand-ins.

Real datasets are read from a local cache directory (``--data-dir`` or the
``AQADE_DATA_DIR`` environment variable, torchvision layout) and are never
downloaded implicitly. Images come back as N x 32 x 32 x C float32 in
[0, 1]; 28x28 grayscale sets are zero-padded to 32x32.
"""

from __future__ import annotations

import os
import pickle

import numpy as np

DATASETS = ("mnist", "fashion-mnist", "cifar10", "cifar100-coarse")

N_CLASSES = {"mnist": 10, "fashion-mnist": 10, "cifar10": 10, "cifar100-coarse": 20}


def data_dir(override: str | None = None) -> str:
    return override or os.environ.get("AQADE_DATA_DIR", "data")


def _pad_to_32(images: np.ndarray) -> np.ndarray:
    """Zero-pad N x 28 x 28 to N x 32 x 32 (2 pixels per side)."""
    return np.pad(images, ((0, 0), (2, 2), (2, 2)))


def _scale01(images: np.ndarray) -> np.ndarray:
    return (images.astype(np.float32) / 255.0).astype(np.float32)


def _load_torchvision(name: str, root: str):
    try:
        from torchvision import datasets
    except ImportError as exc:
        raise RuntimeError("torchvision is required for real datasets") from exc
    cls = {"mnist": datasets.MNIST, "fashion-mnist": datasets.FashionMNIST,
           "cifar10": datasets.CIFAR10}[name]
    try:
        train = cls(root=root, train=True, download=False)
        test = cls(root=root, train=False, download=False)
    except RuntimeError as exc:
        raise FileNotFoundError(
            f"dataset {name!r} not found under {root!r}; place it there "
            f"(torchvision layout) or set AQADE_DATA_DIR"
        ) from exc
    return train, test


def _grayscale_arrays(ds) -> tuple[np.ndarray, np.ndarray]:
    images = ds.data.numpy() if hasattr(ds.data, "numpy") else np.asarray(ds.data)
    labels = np.asarray(ds.targets)
    images = _scale01(_pad_to_32(images))[:, :, :, None]
    return images, labels


def _cifar100_coarse(root: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # torchvision only exposes fine labels; read the original pickles
    base = os.path.join(root, "cifar-100-python")
    if not os.path.isdir(base):
        raise FileNotFoundError(
            f"dataset 'cifar100-coarse' not found under {root!r} "
            f"(expected {base}); set AQADE_DATA_DIR"
        )

    def load(split):
        with open(os.path.join(base, split), "rb") as fh:
            d = pickle.load(fh, encoding="bytes")
        images = d[b"data"].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
        return _scale01(images), np.asarray(d[b"coarse_labels"])

    tr_x, tr_y = load("train")
    te_x, te_y = load("test")
    return tr_x, tr_y, te_x, te_y


def prepare_split(
    dataset: str, normal_class: int, root: str | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normal-class training images, full test split, binary test labels."""
    if dataset not in DATASETS:
        raise ValueError(f"dataset must be one of {DATASETS}, got {dataset!r}")
    if not 0 <= normal_class < N_CLASSES[dataset]:
        raise ValueError(
            f"normal_class {normal_class} out of range for {dataset} "
            f"(0..{N_CLASSES[dataset] - 1})"
        )
    root = data_dir(root)
    if dataset == "cifar100-coarse":
        tr_x, tr_y, te_x, te_y = _cifar100_coarse(root)
    elif dataset == "cifar10":
        train, test = _load_torchvision(dataset, root)
        tr_x, tr_y = _scale01(np.asarray(train.data)), np.asarray(train.targets)
        te_x, te_y = _scale01(np.asarray(test.data)), np.asarray(test.targets)
    else:
        train, test = _load_torchvision(dataset, root)
        tr_x, tr_y = _grayscale_arrays(train)
        te_x, te_y = _grayscale_arrays(test)

    train_images = tr_x[tr_y == normal_class]
    test_labels = (te_y != normal_class).astype(np.uint8)
    return train_images, te_x, test_labels


def synthetic_images(n: int, channels: int = 1, seed: int = 0,
                     size: int = 32) -> np.ndarray:
    """Smooth blob images in [0, 1] for smoke tests and demos."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / (size - 1)
    images = np.empty((n, size, size, channels), dtype=np.float32)
    for i in range(n):
        acc = np.zeros((size, size), dtype=np.float32)
        for _ in range(3):
            cy, cx = rng.random(2)
            width = 0.05 + 0.2 * rng.random()
            acc += rng.random() * np.exp(
                -((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2)
            )
        acc = acc / max(acc.max(), 1e-6)
        for c in range(channels):
            images[i, :, :, c] = np.clip(acc * (0.5 + 0.5 * rng.random()), 0.0, 1.0)
    return images
