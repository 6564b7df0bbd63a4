"""Experiment runner: datasets, training loops, per-epoch evaluation,
metrics CSVs, checkpoints, and analysis artifacts.

Reproducibility contract: everything an artifact contains is a pure
function of (config, seed, code version) — with the single exception of
the wall-clock ``seconds`` column in the metrics CSVs, which is real
measured time and therefore exempt from byte-identity.
"""

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import mnist_data, synthetic, text_data
from .bp_baseline import BPNetwork, bp_predict_batch, bp_train_epoch
from .checkpoint import save_network
from .config import threshold_strategy
from .errors import DataError, UsageError
from .ffnet import FFNetwork, train_epoch
from .analysis import (
    export_heatmap,
    goodness_report,
    weight_stats,
    write_goodness_csv,
    write_weight_stats_csv,
)
from .inference import (
    default_included_layers,
    predict_head_batch,
    predict_sweep_batch,
    train_head,
)
from .rng import Rng, derive_seed

# independent streams derived from the config seed
_STREAM_NET = 0
_STREAM_DATA = 1
_STREAM_HEAD = 2
_STREAM_BASELINE = 3
_STREAM_EMBED = 4
_STREAM_ANALYSIS = 5


@dataclass
class DatasetBundle:
    """A task adapter: raw features plus label embedding conventions."""

    name: str
    num_classes: int
    input_dim: int
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    embed_batch: callable      # (X_raw, label) -> embedded matrix
    neutral_batch: callable    # (X_raw,) -> label-neutral matrix
    make_stream: callable      # (rng,) -> list[Sample], fresh negatives


def _subset(X, y, limit):
    if limit and limit > 0:
        return X[:limit], y[:limit]
    return X, y


def build_bundle(cfg):
    """Load and adapt the configured dataset."""
    name = cfg["dataset"]
    seed = cfg.seed
    if name == "synthetic":
        return _blob_bundle(cfg, seed)
    if name == "mnist":
        X_tr, y_tr, X_te, y_te = mnist_data.load_mnist(cfg["data.mnist_dir"])
        X_tr, y_tr = _subset(X_tr, y_tr, cfg["data.train_subset"])
        X_te, y_te = _subset(X_te, y_te, cfg["data.test_subset"])
        return DatasetBundle(
            name="mnist",
            num_classes=mnist_data.NUM_CLASSES,
            input_dim=mnist_data.IMAGE_SIZE,
            X_train=X_tr,
            y_train=y_tr,
            X_test=X_te,
            y_test=y_te,
            embed_batch=mnist_data.embed_label_batch,
            neutral_batch=mnist_data.neutral_batch,
            make_stream=lambda rng: mnist_data.build_training_stream(X_tr, y_tr, rng),
        )
    if name == "imdb":
        return _imdb_bundle(cfg)
    raise DataError(f"unknown dataset {name!r}")


def _blob_bundle(cfg, seed):
    C = cfg["synthetic.classes"]
    dim = cfg["synthetic.dim"]
    rng = Rng(derive_seed(seed, _STREAM_DATA))
    sep = cfg["synthetic.separation"]
    n_train = cfg["synthetic.train_per_class"]
    n_test = cfg["synthetic.test_per_class"]
    # one mean set for both splits: draw train+test per class together
    means = (rng.uniform_array(C * dim).reshape(C, dim) * 2 - 1) * sep
    noise = rng.normal_array(C * (n_train + n_test) * dim).reshape(-1, dim)
    X_tr = np.empty((C * n_train, dim))
    y_tr = np.empty(C * n_train, dtype=np.int64)
    X_te = np.empty((C * n_test, dim))
    y_te = np.empty(C * n_test, dtype=np.int64)
    pos = 0
    for c in range(C):
        tr = slice(c * n_train, (c + 1) * n_train)
        te = slice(c * n_test, (c + 1) * n_test)
        X_tr[tr] = means[c] + noise[pos : pos + n_train]
        pos += n_train
        X_te[te] = means[c] + noise[pos : pos + n_test]
        pos += n_test
        y_tr[tr] = c
        y_te[te] = c
    return DatasetBundle(
        name="synthetic",
        num_classes=C,
        input_dim=C + dim,
        X_train=X_tr,
        y_train=y_tr,
        X_test=X_te,
        y_test=y_te,
        embed_batch=lambda X, c: synthetic.embed_blob_batch(X, c, C),
        neutral_batch=lambda X: synthetic.neutral_blob_batch(X, C),
        make_stream=lambda rng: synthetic.build_blob_stream(X_tr, y_tr, C, rng),
    )


def _imdb_bundle(cfg):
    root = cfg["data.imdb_dir"]
    if not os.path.isdir(root):
        raise DataError(f"IMDb directory not found: {root!r}")
    limit = cfg["data.train_subset"]
    texts_tr, y_tr = text_data.load_imdb_split(root, "train", limit=limit)
    texts_te, y_te = text_data.load_imdb_split(root, "test", limit=cfg["data.test_subset"])

    corpus_tr = [text_data.preprocess(t) for t in texts_tr]
    corpus_te = [text_data.preprocess(t) for t in texts_te]
    vocab = text_data.build_vocab(corpus_tr, min_count=cfg["sgns.min_count"])
    if len(vocab) == 0:
        raise DataError("IMDb vocabulary is empty at this min_count")

    params = {
        "dim": cfg["sgns.dim"],
        "window": cfg["sgns.window"],
        "neg_k": cfg["sgns.neg_k"],
        "epochs": cfg["sgns.epochs"],
        "min_count": cfg["sgns.min_count"],
        "lr": cfg["sgns.lr"],
        "seed": cfg.seed,
    }
    fingerprint = text_data.corpus_fingerprint(corpus_tr, params)
    cache = cfg["data.embedding_cache"]
    table = None
    if cache:
        hit = text_data.load_cached_embeddings(cache, fingerprint)
        if hit is not None and hit[0] == vocab.tokens:
            table = hit[1]
    if table is None:
        rng = Rng(derive_seed(cfg.seed, _STREAM_EMBED))
        table = text_data.train_sgns(
            corpus_tr,
            vocab,
            dim=cfg["sgns.dim"],
            window=cfg["sgns.window"],
            neg_k=cfg["sgns.neg_k"],
            epochs=cfg["sgns.epochs"],
            rng=rng,
            lr0=cfg["sgns.lr"],
        )
        if cache:
            text_data.save_embeddings(cache, vocab, table, fingerprint)

    X_tr = np.stack([text_data.vectorize_review(t, vocab, table) for t in corpus_tr])
    X_te = np.stack([text_data.vectorize_review(t, vocab, table) for t in corpus_te])
    return DatasetBundle(
        name="imdb",
        num_classes=text_data.NUM_SENTIMENTS,
        input_dim=cfg["sgns.dim"] + text_data.NUM_SENTIMENTS,
        X_train=X_tr,
        y_train=y_tr,
        X_test=X_te,
        y_test=y_te,
        embed_batch=text_data.embed_sentiment_batch,
        neutral_batch=text_data.neutral_sentiment_batch,
        make_stream=lambda rng: text_data.build_sentiment_stream(X_tr, y_tr, rng),
    )


def _error_rate(pred, truth):
    return float(np.mean(pred != truth))


@dataclass
class RunResult:
    out_dir: str
    final_err: dict            # mode -> (train_err, test_err)
    best_err: dict             # mode -> (test_err, epoch)
    checkpoint: str
    bp_checkpoint: str = ""
    bp_final_err: tuple = ()


def _fmt(x):
    return repr(float(x))


def run_experiment(cfg):
    """Train, evaluate both inference routes each epoch, write artifacts."""
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config_echo.txt"), "w", encoding="utf-8") as f:
        from .config import echo_config

        f.write(echo_config(cfg))

    bundle = build_bundle(cfg)
    seed = cfg.seed
    rng_net = Rng(derive_seed(seed, _STREAM_NET))
    rng_data = Rng(derive_seed(seed, _STREAM_DATA) ^ 0x5EED)
    rng_head = Rng(derive_seed(seed, _STREAM_HEAD))

    net = FFNetwork(bundle.input_dim, cfg["arch"], cfg["activation"], cfg["lr"], rng_net)
    strategy = threshold_strategy(cfg, len(net.layers))
    included = default_included_layers(
        len(net.layers), skip_first=cfg["inference.skip_first_layer"]
    )

    X_train_neutral = bundle.neutral_batch(bundle.X_train)
    X_test_neutral = bundle.neutral_batch(bundle.X_test)

    mode = cfg["inference.mode"]
    metrics_rows = []
    mode_rows = []
    best = {"head": (np.inf, -1), "sweep": (np.inf, -1)}
    final = {}
    head = None

    for epoch in range(cfg["epochs"]):
        t0 = time.perf_counter()
        stream = bundle.make_stream(rng_data)
        em = train_epoch(net, stream, strategy, epoch, cfg["batch_size"], rng_data)

        head = train_head(
            net,
            X_train_neutral,
            bundle.y_train,
            bundle.num_classes,
            epochs=cfg["head.epochs"],
            batch_size=cfg["head.batch_size"],
            lr=cfg["head.lr"],
            rng=rng_head,
            included_layers=included,
        )
        errs = {}
        errs["head"] = (
            _error_rate(predict_head_batch(net, head, X_train_neutral), bundle.y_train),
            _error_rate(predict_head_batch(net, head, X_test_neutral), bundle.y_test),
        )
        errs["sweep"] = (
            _error_rate(
                predict_sweep_batch(
                    net, bundle.X_train, bundle.num_classes, bundle.embed_batch, included
                ),
                bundle.y_train,
            ),
            _error_rate(
                predict_sweep_batch(
                    net, bundle.X_test, bundle.num_classes, bundle.embed_batch, included
                ),
                bundle.y_test,
            ),
        )
        seconds = time.perf_counter() - t0

        for m in ("head", "sweep"):
            if errs[m][1] < best[m][0]:
                best[m] = (errs[m][1], epoch)
        final = errs

        for li in range(len(net.layers)):
            metrics_rows.append(
                [
                    epoch,
                    li,
                    _fmt(em.mean_loss[li]),
                    _fmt(em.mean_g_pos[li]),
                    _fmt(em.mean_g_neg[li]),
                    _fmt(em.thetas[li]),
                    _fmt(errs[mode][0]),
                    _fmt(errs[mode][1]),
                    f"{seconds:.3f}",
                ]
            )
        mode_rows.append(
            [
                epoch,
                _fmt(errs["head"][0]),
                _fmt(errs["head"][1]),
                _fmt(errs["sweep"][0]),
                _fmt(errs["sweep"][1]),
            ]
        )

    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            [
                "epoch",
                "layer",
                "mean_loss",
                "mean_G_pos",
                "mean_G_neg",
                "theta",
                "train_err",
                "test_err",
                "seconds",
            ]
        )
        w.writerows(metrics_rows)
    with open(os.path.join(out_dir, "eval_modes.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(
            ["epoch", "head_train_err", "head_test_err", "sweep_train_err", "sweep_test_err"]
        )
        w.writerows(mode_rows)

    ckpt = os.path.join(out_dir, "checkpoint.ffn1")
    save_network(ckpt, net, head)

    write_weight_stats_csv(os.path.join(out_dir, "weight_stats.csv"), weight_stats(net))
    export_heatmap(net.layers[0].W, os.path.join(out_dir, "layer0_weights.pgm"))
    rng_an = Rng(derive_seed(seed, _STREAM_ANALYSIS))
    report = goodness_report(
        net, bundle.make_stream(rng_an), strategy, cfg["epochs"] - 1
    )
    write_goodness_csv(os.path.join(out_dir, "goodness_hist.csv"), report)

    result = RunResult(
        out_dir=out_dir,
        final_err=final,
        best_err={m: best[m] for m in best},
        checkpoint=ckpt,
    )

    if cfg["baseline.enabled"]:
        result.bp_checkpoint, result.bp_final_err = _run_baseline(cfg, bundle, net, out_dir)

    _write_report(cfg, out_dir, result, included)
    return result


def _run_baseline(cfg, bundle, ff_net, out_dir):
    """Matched-architecture backprop baseline on label-neutral inputs."""
    rng = Rng(derive_seed(cfg.seed, _STREAM_BASELINE))
    net = BPNetwork(
        bundle.input_dim,
        cfg["arch"],
        bundle.num_classes,
        cfg["activation"],
        cfg["baseline.lr"],
        rng,
    )
    X_tr = bundle.neutral_batch(bundle.X_train)
    X_te = bundle.neutral_batch(bundle.X_test)
    epochs = cfg["baseline.epochs"] or cfg["epochs"]
    rows = []
    final = ()
    for epoch in range(epochs):
        t0 = time.perf_counter()
        em = bp_train_epoch(net, X_tr, bundle.y_train, cfg["batch_size"], rng)
        tr = _error_rate(bp_predict_batch(net, X_tr), bundle.y_train)
        te = _error_rate(bp_predict_batch(net, X_te), bundle.y_test)
        rows.append([epoch, _fmt(em.mean_loss), _fmt(tr), _fmt(te),
                     f"{time.perf_counter() - t0:.3f}"])
        final = (tr, te)
    with open(os.path.join(out_dir, "bp_metrics.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "mean_loss", "train_err", "test_err", "seconds"])
        w.writerows(rows)
    ckpt = os.path.join(out_dir, "checkpoint.bpn1")
    save_network(ckpt, net)
    write_weight_stats_csv(os.path.join(out_dir, "bp_weight_stats.csv"), weight_stats(net))
    return ckpt, final


def _write_report(cfg, out_dir, result, included):
    lines = [
        f"dataset: {cfg['dataset']}",
        f"arch: {cfg['arch']}",
        f"threshold: {cfg['threshold.strategy']}",
        f"inference mode for metrics.csv: {cfg['inference.mode']}",
        f"layers scored at inference (0-based): {list(included)}",
        f"final head error: train {result.final_err['head'][0]:.4f}, "
        f"test {result.final_err['head'][1]:.4f}",
        f"final sweep error: train {result.final_err['sweep'][0]:.4f}, "
        f"test {result.final_err['sweep'][1]:.4f}",
        f"best head test error: {result.best_err['head'][0]:.4f} "
        f"(epoch {result.best_err['head'][1]})",
        f"best sweep test error: {result.best_err['sweep'][0]:.4f} "
        f"(epoch {result.best_err['sweep'][1]})",
    ]
    if result.bp_final_err:
        lines.append(
            f"baseline (lr={cfg['baseline.lr']}) final error: "
            f"train {result.bp_final_err[0]:.4f}, test {result.bp_final_err[1]:.4f}"
        )
    text = "\n".join(lines) + "\n"
    with open(os.path.join(out_dir, "final_report.txt"), "w", encoding="utf-8") as f:
        f.write(text)
    print(text, end="")


def run_sweep(cfg, key, raw_values, parser=float):
    """One run per value of ``key``; returns rows for the summary table."""
    if key not in ("threshold.k", "k"):
        raise UsageError(f"sweep supports threshold.k, got {key!r}")
    root = cfg["output_dir"]
    os.makedirs(root, exist_ok=True)
    rows = []
    for raw in raw_values:
        v = parser(raw)
        sub = dict(cfg.values)
        sub["threshold.k"] = v
        sub["threshold.strategy"] = "constant"
        sub["output_dir"] = os.path.join(root, f"k_{raw}")
        from .config import ExperimentConfig

        result = run_experiment(ExperimentConfig(sub))
        mode = cfg["inference.mode"]
        rows.append(
            [
                raw,
                _fmt(result.final_err[mode][1]),
                _fmt(result.best_err[mode][0]),
                result.best_err[mode][1],
            ]
        )
    with open(os.path.join(root, "sweep_summary.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["k", "final_test_err", "best_test_err", "best_epoch"])
        w.writerows(rows)
    return rows
