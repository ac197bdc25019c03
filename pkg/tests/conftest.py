"""Shared fixtures: synthetic corpora in the real on-disk formats, plus
small trained models reused across test modules.

The corpus writers below build files byte-by-byte with struct/tobytes and
are deliberately independent of the package's parsers.
"""

import struct

import numpy as np
import pytest

from rbmgradlab import Dataset, TrainConfig, train

# ---------------------------------------------------------------------------
# synthetic image corpora


def _stroke_template(seed: int, side: int = 28, n_strokes: int = 3) -> np.ndarray:
    """Stroke-union template: a few thick random line segments, soft edges."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:side, 0:side].astype(float)
    canvas = np.zeros((side, side))
    for _ in range(n_strokes):
        a = rng.uniform(0.2 * side, 0.8 * side, 2)
        angle = rng.uniform(0, np.pi)
        length = rng.uniform(0.3 * side, 0.6 * side)
        b = a + length * np.array([np.cos(angle), np.sin(angle)])
        seg = b - a
        t = ((yy - a[0]) * seg[0] + (xx - a[1]) * seg[1]) / (seg @ seg)
        t = np.clip(t, 0.0, 1.0)
        d2 = (yy - (a[0] + t * seg[0])) ** 2 + (xx - (a[1] + t * seg[1])) ** 2
        canvas = np.maximum(canvas, np.exp(-d2 / (2 * 1.3**2)))
    return np.clip(canvas, 0.0, 1.0)


def synth_digit_images(per_digit: int, seed: int = 0):
    """Deterministic MNIST-like corpus: 10 stroke templates with per-example
    shifts and brightness jitter, globally shuffled; returns (images, labels)
    as uint8 arrays."""
    templates = [_stroke_template(1000 + d) for d in range(10)]
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for d in range(10):
        for _ in range(per_digit):
            img = templates[d]
            dy, dx = rng.integers(-2, 3, size=2)
            img = np.roll(np.roll(img, dy, axis=0), dx, axis=1)
            img = img * rng.uniform(0.8, 1.0)
            images.append((img * 255).astype(np.uint8))
            labels.append(d)
    order = rng.permutation(len(images))
    return np.stack(images)[order], np.array(labels, dtype=np.uint8)[order]


def write_idx_images(path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def write_cifar_batch(path, n_records: int, seed: int = 0) -> None:
    """Smooth sinusoid textures in CIFAR-10 binary record layout."""
    yy, xx = np.mgrid[0:32, 0:32] / 32.0
    with open(path, "wb") as f:
        for i in range(n_records):
            rng = np.random.default_rng(20_000 + seed * 1_000_000 + i)
            f.write(bytes([i % 10]))
            for _ in range(3):
                fy, fx = rng.uniform(0.5, 3.0, 2)
                phase = rng.uniform(0, 2 * np.pi)
                plane = 0.5 + 0.5 * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
                f.write((plane * 255).astype(np.uint8).tobytes())


def write_silhouettes_csv(path, n_rows: int, seed: int = 0) -> None:
    """Blob masks as 256-column 0/1 CSV rows."""
    yy, xx = np.mgrid[0:16, 0:16].astype(float)
    with open(path, "w") as f:
        for i in range(n_rows):
            rng = np.random.default_rng(30_000 + seed * 1_000_000 + i)
            cy, cx = rng.uniform(4, 12, 2)
            ry, rx = rng.uniform(2.5, 6.5, 2)
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
            f.write(",".join(str(int(v)) for v in mask.reshape(256)) + "\n")


@pytest.fixture(scope="session")
def synthetic_mnist_idx(tmp_path_factory):
    root = tmp_path_factory.mktemp("mnist")
    images, labels = synth_digit_images(per_digit=1050)
    image_path = root / "train-images-idx3-ubyte"
    label_path = root / "train-labels-idx1-ubyte"
    write_idx_images(image_path, images)
    write_idx_labels(label_path, labels)
    return image_path, label_path


@pytest.fixture(scope="session")
def synthetic_cifar_batches(tmp_path_factory):
    root = tmp_path_factory.mktemp("cifar")
    paths = [root / "data_batch_1.bin", root / "data_batch_2.bin"]
    write_cifar_batch(paths[0], 6000, seed=1)
    write_cifar_batch(paths[1], 6000, seed=2)
    return paths


@pytest.fixture(scope="session")
def synthetic_silhouettes_csv(tmp_path_factory):
    root = tmp_path_factory.mktemp("silhouettes")
    path = root / "silhouettes.csv"
    write_silhouettes_csv(path, 8641)
    return path


# ---------------------------------------------------------------------------
# small structured datasets and trained models


def pattern_dataset(n_units: int = 6, n_examples: int = 50, seed: int = 4,
                    flip: float = 0.05) -> Dataset:
    """Binary patterns drawn from two noisy prototypes; enough structure for
    CD-1 training to peak the model distribution.  The flip rate controls
    how bimodal (and hence how slowly mixing) the trained model becomes."""
    rng = np.random.default_rng(seed)
    prototypes = np.zeros((2, n_units))
    prototypes[0, : n_units // 2] = 1.0
    prototypes[1, n_units // 2:] = 1.0
    rows = []
    for i in range(n_examples):
        base = prototypes[i % 2]
        flips = rng.random(n_units) < flip
        rows.append(np.abs(base - flips.astype(float)))
    return Dataset(id="patterns", intensities=np.stack(rows),
                   source_meta="synthetic prototypes")


@pytest.fixture(scope="session")
def trained_small_model():
    """6x6 model trained hard on near-noiseless prototypes: deeply bimodal,
    so its Gibbs chain mixes very slowly (for correlation tests)."""
    data = pattern_dataset(flip=0.05)
    cfg = TrainConfig(epochs=300, minibatch_size=10, learning_rate=0.1,
                      seed=12, checkpoint_epochs=(300,))
    return train(data, cfg)[-1].params, data


@pytest.fixture(scope="session")
def mixing_trained_model():
    """6x6 model trained gently on noisier prototypes: genuinely trained but
    with a fast-mixing chain (exact k-step analysis puts the CD-100+ bias
    below 1e-5), for unbiasedness checks."""
    data = pattern_dataset(flip=0.12)
    cfg = TrainConfig(epochs=200, minibatch_size=10, learning_rate=0.02,
                      seed=12, checkpoint_epochs=(200,))
    return train(data, cfg)[-1].params, data
