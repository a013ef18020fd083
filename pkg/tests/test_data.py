import numpy as np
import pytest
from numpy.testing import assert_array_equal

from antisymrnn.core import SeededRng
from antisymrnn.data import (
    FormatError, ImageSet, SequenceDataset, batches, fixed_permutation, load_dataset, noise_pad,
    parse_dataset_args, planted_signal_dataset, read_cifar10, read_idx, sequence_view, write_cifar10, write_idx,
)


def idx_bytes(n, magic=0x00000803, rows=28):
    return magic.to_bytes(4, "big") + n.to_bytes(4, "big") + rows.to_bytes(4, "big") * 2 + bytes(n * rows * rows)


def label_bytes(n, magic=0x00000801):
    return magic.to_bytes(4, "big") + n.to_bytes(4, "big") + bytes(range(n))


def test_idx_header(tmp_path):
    (tmp_path / "i").write_bytes(idx_bytes(2))
    (tmp_path / "l").write_bytes(label_bytes(2))
    ims = read_idx(tmp_path / "i", tmp_path / "l")
    assert ims.images.shape == (2, 28, 28, 1)
    assert len(idx_bytes(2)) == 16 + 1568


def test_idx_errors(tmp_path):
    (tmp_path / "i").write_bytes(idx_bytes(10))
    (tmp_path / "bad").write_bytes(label_bytes(10, magic=0x00000802))
    (tmp_path / "short").write_bytes(label_bytes(9))
    with pytest.raises(FormatError):
        read_idx(tmp_path / "i", tmp_path / "bad")
    with pytest.raises(FormatError):
        read_idx(tmp_path / "i", tmp_path / "short")
    (tmp_path / "trunc").write_bytes(idx_bytes(10)[:-5])
    with pytest.raises(FormatError):
        read_idx(tmp_path / "trunc", tmp_path / "short")


def random_images(n, h, w, c, seed):
    rng = SeededRng(seed)
    pix = (rng.uniform(n * h * w * c) * 256).astype(np.uint8).reshape(n, h, w, c)
    return ImageSet(pix, rng.integers(10, n))


def test_idx_round_trip(tmp_path):
    ims = random_images(5, 28, 28, 1, 1)
    write_idx(ims, tmp_path / "i", tmp_path / "l")
    back = read_idx(tmp_path / "i", tmp_path / "l")
    assert_array_equal(back.images, ims.images)
    assert_array_equal(back.labels, ims.labels)


def test_cifar_records(tmp_path):
    ims = random_images(10, 32, 32, 3, 2)
    ims.labels[0] = 7
    write_cifar10(ims, tmp_path / "b.bin")
    assert (tmp_path / "b.bin").stat().st_size == 30730
    back = read_cifar10(tmp_path / "b.bin")
    assert len(back) == 10 and back.labels[0] == 7
    assert_array_equal(back.images, ims.images)
    (tmp_path / "t.bin").write_bytes(bytes(3000))
    with pytest.raises(FormatError):
        read_cifar10(tmp_path / "t.bin")


def test_permutation():
    assert_array_equal(fixed_permutation(1), [0])
    p = fixed_permutation(784)
    assert_array_equal(np.sort(p), np.arange(784))
    assert_array_equal(p, fixed_permutation(784, 42))
    assert not np.array_equal(p, np.arange(784))


def test_views():
    mnist = random_images(2, 28, 28, 1, 3)
    cifar = random_images(2, 32, 32, 3, 4)
    s = sequence_view(mnist)
    assert (s.T, s.m) == (784, 1) and s.sequences.max() <= 1.0
    assert (sequence_view(cifar).T, sequence_view(cifar).m) == (1024, 3)
    r = sequence_view(cifar, "rows")
    assert (r.T, r.m) == (32, 96)
    a = sequence_view(mnist, "permuted")
    assert_array_equal(a.sequences[0, :, 0], s.sequences[0, fixed_permutation(784), 0])
    assert sequence_view(mnist, normalize=False).sequences.max() > 1


def test_noise_pad():
    r = sequence_view(random_images(3, 32, 32, 3, 5), "rows")
    same = noise_pad(r, 32)
    assert_array_equal(same.sequences, r.sequences)
    p = noise_pad(r, 1000, seed=1)
    assert p.T == 1000
    assert_array_equal(p.sequences[:, :32], r.sequences)
    assert abs(p.sequences[:, 32:].std() - 1) < 0.02
    # per-sample substreams: padding of sample 1 does not depend on sample 0
    assert_array_equal(p.sequences[1, 32:].reshape(-1), SeededRng(1).substream(1).normal(968 * 96))
    with pytest.raises(ValueError):
        noise_pad(r, 10)


def test_planted_structure():
    tr, te = planted_signal_dataset(1000, 20, 120, 4, 2, seed=0)
    labels = np.concatenate([tr.labels, te.labels])
    assert_array_equal(np.bincount(labels), [500, 500])
    assert (len(tr), len(te)) == (800, 200)
    sig = np.concatenate([tr.sequences, te.sequences])[:, :20].reshape(1000, -1)
    means = [sig[labels == c].mean(axis=0) for c in (0, 1)]
    assert abs(means[0] @ means[1]) < 0.05 * len(means[0])
    assert_array_equal(np.abs(np.round(means[0])), 1)
    rows = {r.tobytes() for r in np.concatenate([tr.sequences, te.sequences])}
    assert len(rows) == 1000


def test_planted_errors():
    with pytest.raises(ValueError):
        planted_signal_dataset(10, 5, 5, 2)
    with pytest.raises(ValueError):
        planted_signal_dataset(10, 3, 8, 2, classes=4)  # width 6 has 2 templates


def test_batches():
    ds = SequenceDataset(np.zeros((5, 2, 1)), np.zeros(5), 2)
    stream = batches(ds, 1, SeededRng(0))
    b = [next(stream) for _ in range(50)]
    assert all(len(x) == 1 for x in b)
    assert set(np.concatenate(b)) <= set(range(5))


def test_dataset_selector():
    assert parse_dataset_args("a=1, b=x") == {"a": "1", "b": "x"}
    with pytest.raises(ValueError):
        parse_dataset_args("oops")
    tr, te = load_dataset("planted", parse_dataset_args("samples=50,t_total=30,signal_steps=4"))
    assert (tr.T, tr.m, len(tr) + len(te)) == (30, 4, 50)
    with pytest.raises(ValueError):
        load_dataset("imagenet", {})
