"""Weight statistics, PGM heatmap export, and goodness diagnostics.

Everything here is a pure function of a checkpoint (plus data for the
goodness report): re-running on the same inputs is bit-identical.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .ffnet import Polarity, goodness_batch
from .thresholds import resolve as resolve_theta


def weight_matrices(net):
    """All weight matrices in layer order (baseline nets include the output layer)."""
    mats = [layer.W for layer in net.layers]
    out = getattr(net, "out_layer", None)
    if out is not None:
        mats.append(out.W)
    return mats


def weight_stats(net):
    """Per-layer {min, max, mean, var}; population variance."""
    stats = []
    for W in weight_matrices(net):
        stats.append(
            {
                "min": float(W.min()),
                "max": float(W.max()),
                "mean": float(W.mean()),
                "var": float(W.var()),
            }
        )
    return stats


def write_weight_stats_csv(path, stats):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["layer", "min", "max", "mean", "var"])
        for i, s in enumerate(stats):
            w.writerow([i, repr(s["min"]), repr(s["max"]), repr(s["mean"]), repr(s["var"])])


def export_heatmap(W, path):
    """Write W as a binary PGM (P5, maxval 255), min->0 and max->255.

    A constant matrix maps to mid-gray 128.
    """
    W = np.asarray(W, dtype=np.float64)
    if not np.all(np.isfinite(W)):
        raise UsageError("heatmap export needs finite weights")
    lo, hi = float(W.min()), float(W.max())
    if hi == lo:
        bytes_ = np.full(W.shape, 128, dtype=np.uint8)
    else:
        scaled = np.rint((W - lo) / (hi - lo) * 255.0)
        bytes_ = np.clip(scaled, 0, 255).astype(np.uint8)
    header = f"P5\n{W.shape[1]} {W.shape[0]}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header + bytes_.tobytes())


def read_pgm(path):
    """Decode a binary P5 PGM back into a uint8 matrix."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise UsageError(f"{path!r} is not a binary PGM")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    cols, rows, maxval = fields
    if maxval != 255:
        raise UsageError(f"expected maxval 255, got {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, offset=pos, count=rows * cols)
    return pixels.reshape(rows, cols).copy()


def label_pixel_spike(W, num_label_cols=10):
    """(mean |w| over label columns, mean |w| over the rest) of one matrix."""
    A = np.abs(np.asarray(W, dtype=np.float64))
    return float(A[:, :num_label_cols].mean()), float(A[:, num_label_cols:].mean())


@dataclass
class GoodnessReport:
    bin_edges: list        # per layer, (bins+1,) array over [0, max G observed]
    pos_counts: list       # per layer, (bins,) int array
    neg_counts: list
    frac_pos_above: np.ndarray
    frac_neg_below: np.ndarray
    thetas: np.ndarray


def goodness_report(net, samples, strategy, epoch, bins=50, batch_size=512):
    """Histograms of per-layer goodness, split by polarity, plus the
    fraction of positives above theta and negatives below it."""
    if not samples:
        raise UsageError("goodness_report needs samples")
    signs = np.array([float(s.polarity) for s in samples])
    pos_mask = signs > 0
    depth = len(net.layers)
    G_all = [[] for _ in range(depth)]
    for start in range(0, len(samples), batch_size):
        X = np.stack([s.features for s in samples[start : start + batch_size]])
        stages = net.forward_batch(X)
        for li in range(depth):
            G_all[li].append(goodness_batch(stages[li][2]))
    thetas = np.array(
        [resolve_theta(strategy, i, net.layers[i].out_dim, epoch) for i in range(depth)]
    )

    edges, pos_counts, neg_counts = [], [], []
    frac_pos = np.zeros(depth)
    frac_neg = np.zeros(depth)
    for li in range(depth):
        G = np.concatenate(G_all[li])
        top = float(G.max())
        e = np.linspace(0.0, top if top > 0 else 1.0, bins + 1)
        pos_counts.append(np.histogram(G[pos_mask], bins=e)[0])
        neg_counts.append(np.histogram(G[~pos_mask], bins=e)[0])
        edges.append(e)
        frac_pos[li] = float(np.mean(G[pos_mask] > thetas[li]))
        frac_neg[li] = float(np.mean(G[~pos_mask] < thetas[li]))
    return GoodnessReport(edges, pos_counts, neg_counts, frac_pos, frac_neg, thetas)


def write_goodness_csv(path, report):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["layer", "bin_lo", "bin_hi", "pos_count", "neg_count"])
        for li, edges in enumerate(report.bin_edges):
            for b in range(len(edges) - 1):
                w.writerow(
                    [
                        li,
                        repr(float(edges[b])),
                        repr(float(edges[b + 1])),
                        int(report.pos_counts[li][b]),
                        int(report.neg_counts[li][b]),
                    ]
                )


def ks_2sample(a, b):
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise UsageError("ks_2sample needs non-empty samples")
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / n
    cdf_b = np.searchsorted(b, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    n_eff = n * m / (n + m)
    lam = (np.sqrt(n_eff) + 0.12 + 0.11 / np.sqrt(n_eff)) * d
    if lam < 0.1:
        return d, 1.0  # survival probability is 1 to double precision there
    terms = np.arange(1, 101)
    p = 2.0 * np.sum((-1.0) ** (terms - 1) * np.exp(-2.0 * (terms * lam) ** 2))
    return d, float(min(max(p, 0.0), 1.0))
