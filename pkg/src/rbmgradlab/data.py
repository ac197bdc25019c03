"""Corpus ingestion and the portable RBMDS1 intensity container.

Three sources are supported, each reduced to rows of intensities in
[0, 1] that are binarized on presentation:

* MNIST-style IDX image/label pairs, reduced to 14x14 by 2x2 mean pooling,
  first ``per_digit`` examples of each digit in file order;
* CIFAR-10 binary batches, center 14x14 crop of the grayscale image;
* 16x16 black-and-white silhouettes exported as a 256-column 0/1 CSV.
"""

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, DimensionMismatchError

DATASET_MAGIC = b"RBMDS1"

_IDX_IMAGE_MAGIC = 0x00000803
_IDX_LABEL_MAGIC = 0x00000801

# ITU-R BT.601 luma weights, applied to channels normalized to [0, 1]
_LUMA = (0.299, 0.587, 0.114)

# center 14x14 window of a 32x32 image: rows/cols 9..22 inclusive
_CROP = slice(9, 23)


@dataclass(frozen=True)
class Dataset:
    """Immutable matrix of intensity rows plus provenance."""

    id: str
    intensities: np.ndarray
    source_meta: str

    def __post_init__(self):
        a = np.asarray(self.intensities, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionMismatchError(f"intensities must be 2-d, got {a.ndim}-d")
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        a.setflags(write=False)
        object.__setattr__(self, "intensities", a)

    @property
    def n_examples(self) -> int:
        return self.intensities.shape[0]

    @property
    def dim(self) -> int:
        return self.intensities.shape[1]


def binarize(row, rng: np.random.Generator) -> np.ndarray:
    """Sample each unit as Bernoulli(intensity), one uniform per unit,
    index-ascending.  Intensities 0 and 1 are deterministic."""
    row = np.asarray(row, dtype=np.float64)
    if row.ndim != 1:
        raise DimensionMismatchError(f"intensity row must be 1-d, got {row.ndim}-d")
    if row.size and (row.min() < 0.0 or row.max() > 1.0):
        raise ValueError("intensities must lie in [0, 1]")
    return (rng.random(row.size) < row).astype(np.float64)


def _read_exact(f, n: int, path, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise DataFormatError(
            f"{path}: truncated while reading {what} at offset {f.tell() - len(data)}"
        )
    return data


def _read_idx_header(f, path, expected_magic: int, n_dims: int):
    magic = struct.unpack(">I", _read_exact(f, 4, path, "magic"))[0]
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad IDX magic 0x{magic:08x} at offset 0 "
            f"(expected 0x{expected_magic:08x})"
        )
    return struct.unpack(
        f">{n_dims}I", _read_exact(f, 4 * n_dims, path, "dimensions")
    )


def load_mnist_subset(idx_image_path, idx_label_path, per_digit: int = 1000) -> Dataset:
    """First ``per_digit`` examples of each digit 0-9 in file order,
    pooled 28x28 -> 14x14 and scaled to [0, 1].

    Output rows are ordered by (digit, occurrence in file).
    """
    idx_image_path = Path(idx_image_path)
    idx_label_path = Path(idx_label_path)
    with open(idx_image_path, "rb") as f:
        n_images, rows, cols = _read_idx_header(f, idx_image_path, _IDX_IMAGE_MAGIC, 3)
        if (rows, cols) != (28, 28):
            raise DataFormatError(
                f"{idx_image_path}: expected 28x28 images, got {rows}x{cols}"
            )
        raw = _read_exact(f, n_images * rows * cols, idx_image_path, "pixel data")
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n_images, 28, 28)

    with open(idx_label_path, "rb") as f:
        (n_labels,) = _read_idx_header(f, idx_label_path, _IDX_LABEL_MAGIC, 1)
        labels = np.frombuffer(
            _read_exact(f, n_labels, idx_label_path, "label data"), dtype=np.uint8
        )
    if n_labels != n_images:
        raise DataFormatError(
            f"{idx_label_path}: {n_labels} labels for {n_images} images"
        )

    picks = []
    for digit in range(10):
        idx = np.flatnonzero(labels == digit)[:per_digit]
        if idx.size < per_digit:
            raise DataFormatError(
                f"{idx_image_path}: only {idx.size} examples of digit {digit}, "
                f"need {per_digit}"
            )
        picks.append(idx)
    selected = images[np.concatenate(picks)].astype(np.float64) / 255.0
    pooled = selected.reshape(-1, 14, 2, 14, 2).mean(axis=(2, 4))
    return Dataset(
        id="mnist14",
        intensities=pooled.reshape(-1, 196),
        source_meta=f"idx:{idx_image_path.name},{idx_label_path.name};"
        f"per_digit={per_digit};pool=2x2-mean",
    )


def load_cifar_subset(batch_paths, n_records: int = 10000) -> Dataset:
    """First ``n_records`` CIFAR records in file order: grayscale luma of
    the center 14x14 crop, scaled to [0, 1]."""
    record = 1 + 3 * 1024
    rows = []
    names = []
    for path in batch_paths:
        path = Path(path)
        names.append(path.name)
        with open(path, "rb") as f:
            while len(rows) < n_records:
                chunk = f.read(record)
                if not chunk:
                    break
                if len(chunk) != record:
                    raise DataFormatError(
                        f"{path}: truncated record at offset "
                        f"{f.tell() - len(chunk)} ({len(chunk)} of {record} bytes)"
                    )
                pixels = np.frombuffer(chunk, dtype=np.uint8)[1:]
                rgb = pixels.reshape(3, 32, 32).astype(np.float64) / 255.0
                gray = _LUMA[0] * rgb[0] + _LUMA[1] * rgb[1] + _LUMA[2] * rgb[2]
                rows.append(gray[_CROP, _CROP].reshape(196))
        if len(rows) >= n_records:
            break
    if len(rows) < n_records:
        raise DataFormatError(
            f"{names}: only {len(rows)} records, need {n_records}"
        )
    return Dataset(
        id="cifar14",
        intensities=np.stack(rows),
        source_meta=f"cifar:{','.join(names)};n={n_records};crop=9..22;luma=bt601",
    )


def load_silhouettes(csv_path) -> Dataset:
    """16x16 black-and-white images as a CSV of 256 values in {0, 1}."""
    csv_path = Path(csv_path)
    rows = []
    with open(csv_path, newline="") as f:
        for lineno, fields in enumerate(csv.reader(f), start=1):
            if len(fields) != 256:
                raise DataFormatError(
                    f"{csv_path}:{lineno}: row has {len(fields)} values, expected 256"
                )
            try:
                values = np.array([float(v) for v in fields])
            except ValueError as exc:
                raise DataFormatError(f"{csv_path}:{lineno}: {exc}") from None
            if not np.all((values == 0.0) | (values == 1.0)):
                raise DataFormatError(
                    f"{csv_path}:{lineno}: non-binary value in row"
                )
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{csv_path}: empty file")
    return Dataset(
        id="silhouettes16",
        intensities=np.stack(rows),
        source_meta=f"csv:{csv_path.name};n={len(rows)}",
    )


def save_dataset(dataset: Dataset, path) -> None:
    """Write the RBMDS1 container: magic, LE u32 n_examples, LE u32 dim,
    float32 intensities row-major."""
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<II", dataset.n_examples, dataset.dim))
        f.write(dataset.intensities.astype("<f4").tobytes(order="C"))


def load_dataset(path) -> Dataset:
    """Read an RBMDS1 container; the dataset id is the file stem."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, len(DATASET_MAGIC), path, "magic")
        if magic != DATASET_MAGIC:
            raise DataFormatError(
                f"{path}: bad magic {magic!r} at offset 0 (expected {DATASET_MAGIC!r})"
            )
        n_examples, dim = struct.unpack("<II", _read_exact(f, 8, path, "header"))
        raw = _read_exact(f, 4 * n_examples * dim, path, "intensity data")
    values = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(n_examples, dim)
    return Dataset(id=path.stem, intensities=values, source_meta=f"rbmds1:{path.name}")
