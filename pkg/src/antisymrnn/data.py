"""Image readers (MNIST IDX, CIFAR-10 binary), pixel-sequence views, noise padding, synthetic task."""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import SeededRng

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD = 3073
CIFAR_SIDE = 32


class FormatError(ValueError):
    """A dataset file does not match its binary format."""


@dataclass
class ImageSet:
    images: np.ndarray  # (N, H, W, C) uint8
    labels: np.ndarray  # (N,) int64

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise FormatError("images must be (N, H, W, C)")
        if len(self.images) != len(self.labels):
            raise FormatError("image and label counts differ")

    def __len__(self):
        return len(self.labels)


@dataclass
class SequenceDataset:
    sequences: np.ndarray  # (N, T, m) float64
    labels: np.ndarray
    classes: int
    provenance: str = ""

    def __post_init__(self):
        self.sequences = np.asarray(self.sequences, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.sequences.ndim != 3:
            raise ValueError("sequences must be (N, T, m)")
        if len(self.sequences) != len(self.labels):
            raise ValueError("sequence and label counts differ")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.classes):
            raise ValueError("label out of range")

    def __len__(self):
        return len(self.labels)

    @property
    def T(self) -> int:
        return self.sequences.shape[1]

    @property
    def m(self) -> int:
        return self.sequences.shape[2]

    def subset(self, idx) -> "SequenceDataset":
        return SequenceDataset(self.sequences[idx], self.labels[idx], self.classes, self.provenance)


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def read_idx(images_path, labels_path) -> ImageSet:
    img = _read_bytes(images_path)
    lab = _read_bytes(labels_path)
    if len(img) < 16 or len(lab) < 8:
        raise FormatError("truncated IDX header")
    magic, count, rows, cols = struct.unpack(">IIII", img[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"wrong image magic 0x{magic:08x}")
    lmagic, lcount = struct.unpack(">II", lab[:8])
    if lmagic != IDX_LABEL_MAGIC:
        raise FormatError(f"wrong label magic 0x{lmagic:08x}")
    if count != lcount:
        raise FormatError(f"count mismatch: {count} images, {lcount} labels")
    if len(img) - 16 < count * rows * cols or len(lab) - 8 < lcount:
        raise FormatError("truncated IDX payload")
    pixels = np.frombuffer(img, dtype=np.uint8, count=count * rows * cols, offset=16)
    labels = np.frombuffer(lab, dtype=np.uint8, count=lcount, offset=8)
    return ImageSet(pixels.reshape(count, rows, cols, 1), labels.astype(np.int64))


def write_idx(images: ImageSet, images_path, labels_path) -> None:
    n, rows, cols, channels = images.images.shape
    if channels != 1:
        raise FormatError("IDX images are single-channel")
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        fh.write(images.images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, n))
        fh.write(images.labels.astype(np.uint8).tobytes())


def read_cifar10(path) -> ImageSet:
    raw = _read_bytes(path)
    if len(raw) % CIFAR_RECORD:
        raise FormatError(f"file size {len(raw)} is not a multiple of {CIFAR_RECORD}")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.size and labels.max() > 9:
        raise FormatError(f"label byte {labels.max()} > 9")
    planes = records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE)
    return ImageSet(planes.transpose(0, 2, 3, 1).copy(), labels)


def write_cifar10(images: ImageSet, path) -> None:
    planes = images.images.transpose(0, 3, 1, 2).reshape(len(images), -1)
    records = np.concatenate([images.labels.astype(np.uint8)[:, None], planes], axis=1)
    with open(path, "wb") as fh:
        fh.write(records.tobytes())


def fixed_permutation(length: int, seed: int = 42) -> np.ndarray:
    """Fisher-Yates shuffle of range(length) driven by the seeded stream."""
    if length < 1:
        raise ValueError("length must be at least 1")
    perm = np.arange(length)
    u = SeededRng(seed).uniform(length)
    for i in range(length - 1, 0, -1):
        j = min(int(u[i] * (i + 1)), i)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def sequence_view(img_set: ImageSet, order: str = "scanline", normalize: bool = True,
                  permutation: np.ndarray | None = None, perm_seed: int = 42,
                  classes: int = 10) -> SequenceDataset:
    """Turn images into sequences.

    ``scanline``: one pixel per step (T = H*W, m = C).  ``permuted``: scanline
    reordered by a fixed permutation; pass the same ``permutation`` (or
    seed) for train and test.  ``rows``: one image row per step
    (T = H, m = W*C).
    """
    imgs = img_set.images
    N, H, W, C = imgs.shape
    if order in ("scanline", "permuted"):
        seqs = imgs.reshape(N, H * W, C)
        if order == "permuted":
            perm = fixed_permutation(H * W, perm_seed) if permutation is None else np.asarray(permutation)
            seqs = seqs[:, perm, :]
            order = f"permuted(seed={perm_seed})" if permutation is None else "permuted"
    elif order == "rows":
        seqs = imgs.reshape(N, H, W * C)
    else:
        raise ValueError(f"unknown order {order!r}")
    seqs = seqs.astype(np.float64)
    if normalize:
        seqs /= 255.0
    return SequenceDataset(seqs, img_set.labels, classes, order)


def noise_pad(ds: SequenceDataset, t_total: int, seed: int = 0) -> SequenceDataset:
    """Append i.i.d. N(0, 1) steps up to ``t_total``; sample i uses substream (seed, i)."""
    if t_total < ds.T:
        raise ValueError(f"t_total {t_total} is shorter than the sequences ({ds.T})")
    if t_total == ds.T:
        return SequenceDataset(ds.sequences.copy(), ds.labels.copy(), ds.classes, ds.provenance)
    N, T, m = ds.sequences.shape
    out = np.empty((N, t_total, m))
    out[:, :T] = ds.sequences
    pad = (t_total - T) * m
    base = SeededRng(seed)
    for i in range(N):
        out[i, T:] = base.substream(i).normal(pad).reshape(t_total - T, m)
    return SequenceDataset(out, ds.labels.copy(), ds.classes, f"{ds.provenance}+noise(T={t_total},seed={seed})")


def max_orthogonal_templates(width: int) -> int:
    """Largest power of two dividing ``width``: the number of +/-1 templates built below."""
    return width & -width


def _orthogonal_templates(classes: int, width: int, rng: SeededRng) -> np.ndarray:
    k = max_orthogonal_templates(width)
    if classes > k:
        raise ValueError(f"only {k} orthogonal +/-1 templates of width {width}; asked for {classes}")
    hadamard = np.ones((1, 1))
    while hadamard.shape[0] < k:
        hadamard = np.block([[hadamard, hadamard], [hadamard, -hadamard]])
    # rows 1.. avoid the constant row; each entry repeated width/k times keeps orthogonality
    rows = hadamard[1:classes + 1] if classes < k else hadamard[:classes]
    templates = np.repeat(rows, width // k, axis=1)
    signs = np.where(rng.uniform(width) < 0.5, -1.0, 1.0)
    order = np.argsort(rng.uniform(width), kind="stable")
    return (templates * signs)[:, order]


def planted_signal_dataset(samples: int, signal_steps: int, t_total: int, m: int, classes: int = 2,
                           seed: int = 0, train_fraction: float = 0.8):
    """Synthetic long-range task; returns (train, test).

    Class c is a fixed +/-1 template (templates mutually orthogonal) over the
    first ``signal_steps`` steps plus N(0, 0.1^2) jitter; every later step is
    N(0, 1) noise.  Labels are balanced (sample i has label i mod classes
    before shuffling) and the split is disjoint.
    """
    if signal_steps >= t_total:
        raise ValueError("signal_steps must be smaller than t_total")
    if classes < 2:
        raise ValueError("need at least two classes")
    rng = SeededRng(seed)
    templates = _orthogonal_templates(classes, signal_steps * m, rng.substream(0))
    labels = np.arange(samples) % classes
    seqs = np.empty((samples, t_total, m))
    noise_rng = rng.substream(1)
    for i in range(samples):
        z = noise_rng.substream(i).normal(t_total * m).reshape(t_total, m)
        seqs[i, :signal_steps] = templates[labels[i]].reshape(signal_steps, m) + 0.1 * z[:signal_steps]
        seqs[i, signal_steps:] = z[signal_steps:]
    tr, te = planted_split_indices(samples, seed, train_fraction)
    tag = f"planted(signal={signal_steps},T={t_total},m={m},seed={seed})"
    return (SequenceDataset(seqs[tr], labels[tr], classes, tag),
            SequenceDataset(seqs[te], labels[te], classes, tag))


def planted_split_indices(samples: int, seed: int = 0, train_fraction: float = 0.8):
    order = np.argsort(SeededRng(seed).substream(2).uniform(samples), kind="stable")
    n_train = int(round(train_fraction * samples))
    return order[:n_train], order[n_train:]


def batches(ds: SequenceDataset, batch_size: int, rng: SeededRng) -> Iterator[np.ndarray]:
    """Endless stream of index batches drawn uniformly with replacement."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    if len(ds) == 0:
        raise ValueError("empty dataset")
    while True:
        yield rng.integers(len(ds), batch_size)


def parse_dataset_args(text: str) -> dict[str, str]:
    """``key=value`` pairs separated by commas."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"dataset_args entry {part!r} is not key=value")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _limit(ds: SequenceDataset, n: str | None) -> SequenceDataset:
    return ds if not n else ds.subset(slice(0, int(n)))


def load_dataset(name: str, args: dict[str, str]):
    """Build (train, test) for a CLI dataset selector.

    ``mnist``/``pmnist`` read ``dir`` with the standard IDX file names;
    ``cifar_pixel``/``cifar_noise`` read ``dir`` with ``data_batch_1..5.bin``
    and ``test_batch.bin``.  ``limit_train``/``limit_test`` truncate.
    """
    seed = int(args.get("seed", 42))
    if name == "planted":
        train, test = planted_signal_dataset(
            int(args.get("samples", 2500)), int(args.get("signal_steps", 20)), int(args.get("t_total", 120)),
            int(args.get("m", 4)), int(args.get("classes", 2)), seed)
        return train, test
    d = args.get("dir", ".")
    if name in ("mnist", "pmnist"):
        tr = read_idx(os.path.join(d, "train-images-idx3-ubyte"), os.path.join(d, "train-labels-idx1-ubyte"))
        te = read_idx(os.path.join(d, "t10k-images-idx3-ubyte"), os.path.join(d, "t10k-labels-idx1-ubyte"))
        order = "permuted" if name == "pmnist" else "scanline"
        perm = fixed_permutation(28 * 28, seed) if name == "pmnist" else None
        train = sequence_view(tr, order, permutation=perm)
        test = sequence_view(te, order, permutation=perm)
    elif name in ("cifar_pixel", "cifar_noise"):
        parts = [read_cifar10(os.path.join(d, f"data_batch_{k}.bin")) for k in range(1, 6)]
        tr = ImageSet(np.concatenate([p.images for p in parts]), np.concatenate([p.labels for p in parts]))
        te = read_cifar10(os.path.join(d, "test_batch.bin"))
        order = "scanline" if name == "cifar_pixel" else "rows"
        train, test = sequence_view(tr, order), sequence_view(te, order)
    else:
        raise ValueError(f"unknown dataset {name!r}")
    train, test = _limit(train, args.get("limit_train")), _limit(test, args.get("limit_test"))
    if name == "cifar_noise":
        t_total = int(args.get("t_total", 1000))
        train, test = noise_pad(train, t_total, seed), noise_pad(test, t_total, seed + 1)
    return train, test
