"""Desk-scale problems: a noisy quadratic with known curvature, synthetic Gaussian
classification data, and an IDX-format dataset loader.

Everything is deterministic per seed. Gradient noise on the quadratic is scaled so
the expected squared l2 norm of the injected noise equals noise**2 exactly, which is
the bounded-variance level the convergence harnesses reason about.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from .linalg import derive_seed, rng_gaussian

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


@dataclass(frozen=True)
class StochasticQuadratic:
    """f(x) = 0.5 x^T H x with H diagonal, eigenvalues log-spaced over the conditioning.

    The top eigenvalue is 1, so the gradient's Lipschitz constant is exactly 1.
    noisy_grad adds i.i.d. Gaussian noise with E||noise||_2^2 = noise**2.
    """

    dim: int
    noise: float = 0.0
    conditioning: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.noise < 0.0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.conditioning < 1.0:
            raise ValueError(f"conditioning must be >= 1, got {self.conditioning}")

    def eigenvalues(self) -> np.ndarray:
        if self.dim == 1:
            return np.ones(1)
        return np.logspace(-np.log10(self.conditioning), 0.0, self.dim)

    def loss(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.eigenvalues() * x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.eigenvalues() * x

    def noisy_grad(self, x: np.ndarray, trial: int, step: int) -> np.ndarray:
        g = self.grad(x)
        if self.noise == 0.0:
            return g
        eps = rng_gaussian(self.dim, 1, derive_seed(self.seed, trial, step))[:, 0]
        return g + (self.noise / np.sqrt(self.dim)) * eps

    def start_point(self, trial: int, scale: float = 2.0) -> np.ndarray:
        """A deterministic start at l2 distance `scale` from the minimizer."""
        v = rng_gaussian(self.dim, 1, derive_seed(self.seed, trial, 0))[:, 0]
        return scale * v / np.linalg.norm(v)


@dataclass(frozen=True)
class SyntheticClassification:
    """Gaussian cluster mixture per class; inputs rescaled so every ||z||_RMS <= 1."""

    dim: int
    classes: int = 4
    clusters: int = 2
    noise: float = 0.3
    train_size: int = 512
    test_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.classes < 2 or self.clusters < 1:
            raise ValueError("need dim >= 1, classes >= 2, clusters >= 1")
        if self.train_size < 1 or self.test_size < 0:
            raise ValueError("need train_size >= 1 and test_size >= 0")
        if self.noise < 0.0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")


def gen_synthetic(
    spec: SyntheticClassification,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic (train_x, train_y, test_x, test_y); x arrays are (dim, n)."""
    centers = rng_gaussian(
        spec.dim, spec.classes * spec.clusters, derive_seed(spec.seed, 0)
    )
    total = spec.train_size + spec.test_size
    labels = np.arange(total) % spec.classes
    cluster = (np.arange(total) // spec.classes) % spec.clusters
    noise = rng_gaussian(spec.dim, total, derive_seed(spec.seed, 1))
    x = centers[:, labels * spec.clusters + cluster] + spec.noise * noise
    # One global rescale keeps relative geometry while bounding every sample's RMS norm.
    rms = np.linalg.norm(x, axis=0) / np.sqrt(spec.dim)
    x = x / max(float(rms.max()), 1e-12)
    return (
        x[:, : spec.train_size],
        labels[: spec.train_size].copy(),
        x[:, spec.train_size :],
        labels[spec.train_size :].copy(),
    )


def _read_exact(fh, count: int, path: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise ValueError(f"unexpected end of file at offset {fh.tell()} in {path}")
    return data


def load_idx(path: str) -> np.ndarray:
    """Parse one big-endian IDX file: images (magic 0x00000803) come back as a
    (n, rows, cols) uint8 array, labels (magic 0x00000801) as a (n,) uint8 array."""
    size = os.path.getsize(path)
    with open(path, "rb") as fh:
        if size < 4:
            raise ValueError(f"unexpected end of file at offset {size} in {path}")
        magic = struct.unpack(">I", _read_exact(fh, 4, path))[0]
        if magic == IDX_MAGIC_LABELS:
            dims = 1
        elif magic == IDX_MAGIC_IMAGES:
            dims = 3
        else:
            raise ValueError(
                f"bad IDX magic 0x{magic:08X} in {path}: expected images "
                f"0x{IDX_MAGIC_IMAGES:08X} or labels 0x{IDX_MAGIC_LABELS:08X}"
            )
        shape = []
        for i in range(dims):
            if size - fh.tell() < 4:
                raise ValueError(f"unexpected end of file at offset {size} in {path}")
            n = struct.unpack(">I", _read_exact(fh, 4, path))[0]
            if n == 0:
                raise ValueError(f"bad IDX dimension {i}: zero length in {path}")
            shape.append(n)
        count = int(np.prod(shape))
        remaining = size - fh.tell()
        if remaining < count:
            raise ValueError(f"unexpected end of file at offset {size} in {path}")
        data = np.frombuffer(_read_exact(fh, count, path), dtype=np.uint8)
    return data.reshape(shape).copy()


def load_idx_dataset(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    """Images + labels as a classification dataset: x is (rows*cols, n) rescaled to
    [-1, 1] pixel-wise (hence ||z||_RMS <= 1), y is (n,) int labels."""
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise ValueError(f"{images_path} does not hold images")
    if labels.ndim != 1:
        raise ValueError(f"{labels_path} does not hold labels")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}"
        )
    n = images.shape[0]
    x = images.reshape(n, -1).T.astype(np.float64) / 127.5 - 1.0
    return x, labels.astype(int)
