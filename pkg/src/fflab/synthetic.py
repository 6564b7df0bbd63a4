"""Built-in synthetic classification task: Gaussian class blobs.

The fast CI target: per-class Gaussian blobs in a low-dimensional
feature space, with label slots prepended to the feature vector the
same way image pixels carry the label elsewhere. Two classes give the
"two-blob" toy used all over the test suite.
"""

import numpy as np

from .errors import UsageError
from .ffnet import Polarity, Sample
from .rng import Rng, derive_seed


def make_blobs(num_classes, dim, n_per_class, separation, rng):
    """(X, y): rows drawn as class_mean + unit-variance Gaussian noise.

    Class means are themselves drawn uniformly in
    [-separation, separation]^dim from the given stream.
    """
    if num_classes < 2:
        raise UsageError("need at least two classes")
    means = (rng.uniform_array(num_classes * dim).reshape(num_classes, dim) * 2 - 1) * separation
    X = np.empty((num_classes * n_per_class, dim))
    y = np.empty(num_classes * n_per_class, dtype=np.int64)
    noise = rng.normal_array(num_classes * n_per_class * dim).reshape(-1, dim)
    for c in range(num_classes):
        sl = slice(c * n_per_class, (c + 1) * n_per_class)
        X[sl] = means[c] + noise[sl]
        y[sl] = c
    return X, y


def embed_blob_label(x_raw, label, num_classes):
    """One-hot label slots prepended to the raw features."""
    if not 0 <= label < num_classes:
        raise UsageError(f"label must be in 0..{num_classes - 1}, got {label}")
    onehot = np.zeros(num_classes, dtype=np.float64)
    onehot[label] = 1.0
    return np.concatenate([onehot, np.asarray(x_raw, dtype=np.float64)])


def embed_blob_batch(X_raw, label, num_classes):
    n = X_raw.shape[0]
    onehot = np.zeros((n, num_classes), dtype=np.float64)
    onehot[:, label] = 1.0
    return np.concatenate([onehot, X_raw], axis=1)


def neutral_blob_batch(X_raw, num_classes):
    return np.concatenate(
        [np.zeros((X_raw.shape[0], num_classes)), X_raw], axis=1
    )


def build_blob_stream(X, y, num_classes, rng):
    """Balanced positive/negative stream with fresh random wrong labels."""
    if X.shape[0] == 0:
        raise UsageError("cannot build a training stream from zero rows")
    stream = []
    for i in range(X.shape[0]):
        true = int(y[i])
        stream.append(
            Sample(embed_blob_label(X[i], true, num_classes), Polarity.POSITIVE, true)
        )
        draw = rng.randint(num_classes - 1)
        wrong = draw if draw < true else draw + 1
        stream.append(
            Sample(embed_blob_label(X[i], wrong, num_classes), Polarity.NEGATIVE, true)
        )
    rng.shuffle(stream)
    return stream


def two_blob_toy(n_per_class=60, dim=8, separation=2.5, seed=7):
    """The small 2-class task the derived-example tests train on."""
    rng = Rng(derive_seed(seed, 2))
    X, y = make_blobs(2, dim, n_per_class, separation, rng)
    return X, y, rng
