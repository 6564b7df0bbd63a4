"""MNIST IDX parsing and positive/negative sample generation.

Labels are embedded straight into the image: the first ten pixels (part
of the black border) become a one-hot slot row — pixel ``label`` is set
to 1.0 and the other nine to 0.0. Positive samples carry the true
label, negative samples a uniformly random wrong one, regenerated fresh
every epoch.
"""

import gzip
import os
import struct

import numpy as np

from .errors import DataError, FormatError, UsageError
from .ffnet import Polarity, Sample

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
NUM_CLASSES = 10
IMAGE_SIZE = 784


def _maybe_gunzip(data):
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def parse_idx_images(data):
    """(n, 784) float64 matrix scaled to [0, 1] from raw IDX bytes."""
    data = _maybe_gunzip(data)
    if len(data) < 16:
        raise FormatError("image file shorter than its 16-byte header", offset=len(data))
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != IMAGE_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}", offset=0)
    if rows != 28 or cols != 28:
        raise FormatError(f"expected 28x28 images, got {rows}x{cols}", offset=8)
    expected = count * rows * cols
    if len(data) - 16 != expected:
        raise FormatError(
            f"payload holds {len(data) - 16} bytes, expected {expected}",
            offset=16 + min(len(data) - 16, expected),
        )
    pixels = np.frombuffer(data, dtype=np.uint8, offset=16)
    return pixels.reshape(count, IMAGE_SIZE).astype(np.float64) / 255.0


def parse_idx_labels(data):
    """(n,) int64 label vector from raw IDX bytes."""
    data = _maybe_gunzip(data)
    if len(data) < 8:
        raise FormatError("label file shorter than its 8-byte header", offset=len(data))
    magic, count = struct.unpack(">II", data[:8])
    if magic != LABEL_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}", offset=0)
    if len(data) - 8 != count:
        raise FormatError(
            f"payload holds {len(data) - 8} labels, expected {count}",
            offset=8 + min(len(data) - 8, count),
        )
    labels = np.frombuffer(data, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise FormatError(f"label {labels.max()} out of range 0-9", offset=8)
    return labels


_CANDIDATE_NAMES = {
    "train_images": ["train-images-idx3-ubyte", "train-images.idx3-ubyte"],
    "train_labels": ["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"],
    "test_images": ["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"],
    "test_labels": ["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"],
}


def _find_file(directory, names):
    for name in names:
        for candidate in (name, name + ".gz"):
            path = os.path.join(directory, candidate)
            if os.path.exists(path):
                return path
    raise DataError(
        f"none of {names} (optionally .gz) found under {directory!r}"
    )


def load_mnist(directory):
    """(X_train, y_train, X_test, y_test) from the standard four files."""
    out = []
    for key, parser in (
        ("train_images", parse_idx_images),
        ("train_labels", parse_idx_labels),
        ("test_images", parse_idx_images),
        ("test_labels", parse_idx_labels),
    ):
        path = _find_file(directory, _CANDIDATE_NAMES[key])
        with open(path, "rb") as f:
            out.append(parser(f.read()))
    x_tr, y_tr, x_te, y_te = out
    if x_tr.shape[0] != y_tr.shape[0] or x_te.shape[0] != y_te.shape[0]:
        raise DataError(
            f"image/label counts disagree: train {x_tr.shape[0]}/{y_tr.shape[0]}, "
            f"test {x_te.shape[0]}/{y_te.shape[0]}"
        )
    return x_tr, y_tr, x_te, y_te


def embed_label(pixels, label):
    """Copy of the image with the label written into pixels 0-9."""
    if not 0 <= label < NUM_CLASSES:
        raise UsageError(f"label must be in 0..9, got {label}")
    out = np.array(pixels, dtype=np.float64, copy=True)
    out[:NUM_CLASSES] = 0.0
    out[label] = 1.0
    return out


def embed_label_batch(X, label):
    if not 0 <= label < NUM_CLASSES:
        raise UsageError(f"label must be in 0..9, got {label}")
    out = np.array(X, dtype=np.float64, copy=True)
    out[:, :NUM_CLASSES] = 0.0
    out[:, label] = 1.0
    return out


def neutral_batch(X):
    """Label slots zeroed: what the classifier head and baseline see."""
    out = np.array(X, dtype=np.float64, copy=True)
    out[:, :NUM_CLASSES] = 0.0
    return out


def wrong_label(true_label, rng):
    """Uniform draw from the nine labels that are not the true one."""
    draw = rng.randint(NUM_CLASSES - 1)
    return draw if draw < true_label else draw + 1


def make_negative(pixels, true_label, rng):
    embedded = embed_label(pixels, wrong_label(true_label, rng))
    return Sample(embedded, Polarity.NEGATIVE, int(true_label))


def build_training_stream(X, y, rng):
    """One positive + one fresh negative per image, shuffled together."""
    if X.shape[0] == 0:
        raise UsageError("cannot build a training stream from zero images")
    stream = []
    for i in range(X.shape[0]):
        stream.append(Sample(embed_label(X[i], int(y[i])), Polarity.POSITIVE, int(y[i])))
        stream.append(make_negative(X[i], int(y[i]), rng))
    rng.shuffle(stream)
    return stream
