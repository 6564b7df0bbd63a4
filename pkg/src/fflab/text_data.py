"""IMDb review pipeline: preprocessing, skip-gram-with-negative-sampling
embeddings, review vectorization, and sentiment-label attachment.

The embedding model deliberately stays a single-hidden-layer model with
no nonlinearity between the two tables — no gradient ever crosses a
layer boundary here either, which is what makes it an admissible
feature extractor for the local-learning network downstream.
"""

import hashlib
import json
import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import DataError, UsageError
from .ffnet import Polarity, Sample
from .kernels import sgns_epoch
from .porter import stem
from .rng import Rng

# Fixed ~150-word stop list, committed for reproducibility. Negations
# (not/no/nor/never) are deliberately kept out: this feeds a sentiment
# task. Single letters and contraction fragments cover "don't" -> don, t.
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because
been before being below between both but by can cannot could did do does
doing down during each few for from further had has have having he her
here hers herself him himself his how i if in into is it its itself just
me more most my myself now of off on once only or other our ours
ourselves out over own same she should so some such than that the their
theirs them themselves then there these they this those through to too
under until up very was we were what when where which while who whom why
will with would you your yours yourself yourselves
s t d ll m re ve
aren couldn didn doesn don hadn hasn haven isn mightn mustn needn shan
shouldn wasn weren won wouldn
""".split())

_TAG_RE = re.compile(r"<[^>]*>")
_SPLIT_RE = re.compile(r"[^a-z0-9]+")


def stem_fixpoint(token):
    """Iterate the stemmer until the token stops changing.

    Single-pass suffix stripping is not idempotent (agreed -> agre ->
    agr); the pipeline must be a fixpoint of itself, so it stems to
    convergence. Terminates: each pass shortens the token or leaves it.
    """
    s = stem(token)
    while s != token:
        token, s = s, stem(s)
    return s


def preprocess(raw_review):
    """Raw review text to a stemmed token list.

    Tags out, lowercase, split on non-alphanumerics, stop words out,
    stem to fixpoint, and drop any token whose stem landed in the stop
    list (keeps the whole pipeline a fixpoint of itself).
    """
    text = _TAG_RE.sub(" ", raw_review).lower()
    tokens = [t for t in _SPLIT_RE.split(text) if t and t not in STOPWORDS]
    stemmed = [stem_fixpoint(t) for t in tokens]
    return [t for t in stemmed if t not in STOPWORDS]


@dataclass
class Vocab:
    """Dense token universe: index 0..V-1 ordered by count desc, then token."""

    tokens: list
    index: dict
    counts: np.ndarray
    min_count: int

    def __len__(self):
        return len(self.tokens)


def build_vocab(corpus, min_count=5):
    """Count tokens across the corpus and keep those seen >= min_count times."""
    counts = {}
    for tokens in corpus:
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
    kept = sorted(
        (t for t, c in counts.items() if c >= min_count),
        key=lambda t: (-counts[t], t),
    )
    return Vocab(
        tokens=kept,
        index={t: i for i, t in enumerate(kept)},
        counts=np.array([counts[t] for t in kept], dtype=np.float64),
        min_count=min_count,
    )


def encode_corpus(corpus, vocab):
    """Token id sequences with OOV dropped, as a flat array plus offsets."""
    flat = []
    offsets = [0]
    for tokens in corpus:
        ids = [vocab.index[t] for t in tokens if t in vocab.index]
        flat.extend(ids)
        offsets.append(len(flat))
    return np.array(flat, dtype=np.int32), np.array(offsets, dtype=np.int64)


def noise_cdf(counts):
    """Cumulative unigram^0.75 noise distribution; last entry exactly 1."""
    p = counts ** 0.75
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    return cdf


def count_pairs(offsets, window):
    """Number of (center, context) pairs one epoch will visit."""
    total = 0
    for s in range(offsets.shape[0] - 1):
        L = int(offsets[s + 1] - offsets[s])
        if L < 2:
            continue
        i = np.arange(L)
        total += int(np.sum(np.minimum(i + window, L - 1) - np.maximum(i - window, 0)))
    return total


def init_embeddings(vocab_size, dim, rng):
    """word2vec-style init: inputs uniform (-0.5, 0.5)/dim, outputs zero."""
    win = (rng.uniform_array(vocab_size * dim).reshape(vocab_size, dim) - 0.5) / dim
    wout = np.zeros((vocab_size, dim), dtype=np.float64)
    return win, wout


def train_sgns(corpus, vocab, dim=100, window=5, neg_k=5, epochs=5,
               rng=None, lr0=0.025):
    """Train the embedding table on tokenized reviews. Returns (V, dim).

    Sequential per-pair updates in corpus order; learning rate decays
    linearly per pair from lr0 to lr0*1e-4 across all epochs. Negative
    targets come from the unigram^0.75 distribution; a draw that hits
    the context word is skipped (the draw still advances the stream).
    """
    if not corpus or len(vocab) == 0:
        raise UsageError("train_sgns needs a non-empty corpus and vocabulary")
    if rng is None:
        rng = Rng(0)
    tokens, offsets = encode_corpus(corpus, vocab)
    win, wout = init_embeddings(len(vocab), dim, rng)
    if epochs == 0:
        return win
    cdf = noise_cdf(vocab.counts)
    per_epoch = count_pairs(offsets, window)
    if per_epoch == 0:
        return win
    total_pairs = per_epoch * epochs
    state = rng.next_u64()  # decorrelated in-kernel draw stream
    done = 0
    for _ in range(epochs):
        state, done, _ = sgns_epoch(
            tokens, offsets, win, wout, cdf, window, neg_k,
            lr0, lr0 * 1e-4, done, total_pairs, state,
        )
    return win


def vectorize_review(tokens, vocab, table):
    """Mean of the embedding rows of in-vocab tokens; zeros if none."""
    rows = [vocab.index[t] for t in tokens if t in vocab.index]
    if not rows:
        return np.zeros(table.shape[1], dtype=np.float64)
    return table[rows].mean(axis=0)


NUM_SENTIMENTS = 2


def attach_sentiment_label(features, label, polarity):
    """Append the 2-slot one-hot label; negatives embed the flipped label."""
    if not 0 <= label < NUM_SENTIMENTS:
        raise UsageError(f"sentiment label must be 0 or 1, got {label}")
    embedded = label if int(polarity) == int(Polarity.POSITIVE) else 1 - label
    onehot = np.zeros(NUM_SENTIMENTS, dtype=np.float64)
    onehot[embedded] = 1.0
    return Sample(
        np.concatenate([np.asarray(features, dtype=np.float64), onehot]),
        Polarity(int(polarity)),
        int(label),
    )


def embed_sentiment_batch(X_raw, label):
    """Candidate-label embedding for the sweep: features plus one-hot."""
    n = X_raw.shape[0]
    onehot = np.zeros((n, NUM_SENTIMENTS), dtype=np.float64)
    onehot[:, label] = 1.0
    return np.concatenate([X_raw, onehot], axis=1)


def neutral_sentiment_batch(X_raw):
    return np.concatenate(
        [X_raw, np.zeros((X_raw.shape[0], NUM_SENTIMENTS))], axis=1
    )


# ---------------------------------------------------------------------------
# embedding cache: plain text "V d" header then one "token v1 .. vd" per line


def corpus_fingerprint(corpus, params):
    """sha256 over the token stream and the training hyperparameters."""
    h = hashlib.sha256()
    for tokens in corpus:
        h.update(" ".join(tokens).encode("utf-8"))
        h.update(b"\n")
    h.update(json.dumps(params, sort_keys=True).encode("utf-8"))
    return h.hexdigest()


def save_embeddings(path, vocab, table, fingerprint=None):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{table.shape[0]} {table.shape[1]}\n")
        for i, tok in enumerate(vocab.tokens):
            f.write(tok + " " + " ".join(repr(float(v)) for v in table[i]) + "\n")
    if fingerprint is not None:
        with open(path + ".meta.json", "w", encoding="utf-8") as f:
            json.dump({"fingerprint": fingerprint}, f)


def load_embeddings(path):
    """Returns (tokens, table) from the text format."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        v, d = int(header[0]), int(header[1])
        tokens = []
        table = np.empty((v, d), dtype=np.float64)
        for i in range(v):
            parts = f.readline().rstrip("\n").split(" ")
            tokens.append(parts[0])
            table[i] = [float(x) for x in parts[1 : d + 1]]
    return tokens, table


def load_cached_embeddings(path, fingerprint):
    """(tokens, table) if the sidecar fingerprint matches, else None."""
    meta_path = path + ".meta.json"
    if not (os.path.exists(path) and os.path.exists(meta_path)):
        return None
    with open(meta_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    if meta.get("fingerprint") != fingerprint:
        return None
    return load_embeddings(path)


# ---------------------------------------------------------------------------
# aclImdb directory layout: {train,test}/{pos,neg}/*.txt


def load_imdb_split(root, split, limit=0):
    """Sorted deterministic read of one split. Returns (texts, labels 0/1)."""
    texts, labels = [], []
    for label_name, label in (("neg", 0), ("pos", 1)):
        d = os.path.join(root, split, label_name)
        if not os.path.isdir(d):
            raise DataError(f"missing IMDb directory {d!r}")
        names = sorted(os.listdir(d))
        if limit:
            names = names[: limit // 2]
        for name in names:
            if not name.endswith(".txt"):
                continue
            with open(os.path.join(d, name), "r", encoding="utf-8") as f:
                texts.append(f.read())
            labels.append(label)
    if not texts:
        raise DataError(f"no review files under {root!r}/{split}")
    return texts, np.array(labels, dtype=np.int64)


def build_sentiment_stream(X_raw, labels, rng):
    """One positive + one negative sample per review, shuffled."""
    if X_raw.shape[0] == 0:
        raise UsageError("cannot build a training stream from zero reviews")
    stream = []
    for i in range(X_raw.shape[0]):
        stream.append(attach_sentiment_label(X_raw[i], int(labels[i]), Polarity.POSITIVE))
        stream.append(attach_sentiment_label(X_raw[i], int(labels[i]), Polarity.NEGATIVE))
    rng.shuffle(stream)
    return stream
