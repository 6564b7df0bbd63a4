"""``ff-lab``: train / sweep / analyze / eval.

Exit codes: 0 success, 1 configuration error, 2 data error.
"""

import argparse
import os
import sys

import numpy as np

from .analysis import (
    export_heatmap,
    goodness_report,
    weight_matrices,
    weight_stats,
    write_goodness_csv,
    write_weight_stats_csv,
)
from .checkpoint import load_network
from .config import parse_config, threshold_strategy
from .errors import ConfigError, DataError, FormatError, UsageError
from .ffnet import FFNetwork
from .inference import predict_head_batch, predict_sweep_batch
from .rng import Rng, derive_seed


def _add_common(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--dataset", help="mnist | imdb | synthetic")
    p.add_argument("--arch", help="comma-separated layer widths")
    p.add_argument("--activation")
    p.add_argument("--lr")
    p.add_argument("--epochs")
    p.add_argument("--batch-size", dest="batch_size")
    p.add_argument("--seed")
    p.add_argument("--output", dest="output_dir", help="output directory")
    p.add_argument("--full", action="store_true",
                   help="lift the desk-scale training subset caps")


def _overrides(args):
    out = {}
    for kv in args.set:
        if "=" not in kv:
            raise ConfigError(f"--set expects KEY=VALUE, got {kv!r}")
        k, _, v = kv.partition("=")
        out[k.strip()] = v.strip()
    for key in ("dataset", "arch", "activation", "lr", "epochs",
                "batch_size", "seed", "output_dir"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "full", False):
        out["full"] = "true"
    return out


def _cmd_train(args):
    from .experiment import run_experiment

    cfg = parse_config(args.config, _overrides(args))
    result = run_experiment(cfg)
    mode = cfg["inference.mode"]
    print(f"final {mode} test error: {result.final_err[mode][1]:.4f}")
    return 0


def _cmd_sweep(args):
    from .experiment import run_sweep

    cfg = parse_config(args.config, _overrides(args))
    key, _, values = args.sweep.partition("=")
    if not values:
        raise ConfigError("--sweep expects k=v1,v2,... (e.g. k=0.1,0.5,1)")
    rows = run_sweep(cfg, key.strip(), [v.strip() for v in values.split(",") if v.strip()])
    print("k,final_test_err,best_test_err,best_epoch")
    for row in rows:
        print(",".join(str(x) for x in row))
    return 0


def _cmd_analyze(args):
    net, _ = load_network(args.checkpoint)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.checkpoint))
    os.makedirs(out_dir, exist_ok=True)
    stats = weight_stats(net)
    write_weight_stats_csv(os.path.join(out_dir, "weight_stats.csv"), stats)
    for i, W in enumerate(weight_matrices(net)):
        export_heatmap(W, os.path.join(out_dir, f"layer{i}_weights.pgm"))
    for i, s in enumerate(stats):
        print(f"layer {i}: min {s['min']:.4f} max {s['max']:.4f} "
              f"mean {s['mean']:.6f} var {s['var']:.6f}")

    if args.config and isinstance(net, FFNetwork):
        from .experiment import build_bundle

        cfg = parse_config(args.config, _overrides(args))
        bundle = build_bundle(cfg)
        strategy = threshold_strategy(cfg, len(net.layers))
        rng = Rng(derive_seed(cfg.seed, 5))
        report = goodness_report(net, bundle.make_stream(rng), strategy, cfg["epochs"] - 1)
        write_goodness_csv(os.path.join(out_dir, "goodness_hist.csv"), report)
        for li in range(len(net.layers)):
            print(f"layer {li}: pos>theta {report.frac_pos_above[li]:.3f}, "
                  f"neg<theta {report.frac_neg_below[li]:.3f}")
    return 0


def _cmd_eval(args):
    from .experiment import build_bundle

    cfg = parse_config(args.config, _overrides(args))
    net, head = load_network(args.checkpoint)
    if not isinstance(net, FFNetwork):
        raise UsageError("eval expects an FFN1 checkpoint")
    bundle = build_bundle(cfg)
    if args.mode == "head":
        if head is None:
            raise UsageError("checkpoint has no trained head section")
        pred = predict_head_batch(net, head, bundle.neutral_batch(bundle.X_test))
    else:
        included = None
        if head is not None:
            included = head.included_layers
        pred = predict_sweep_batch(
            net, bundle.X_test, bundle.num_classes, bundle.embed_batch, included
        )
    err = float(np.mean(pred != bundle.y_test))
    print(f"{args.mode} test error: {err:.4f}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ff-lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run one training experiment")
    _add_common(p_train)

    p_sweep = sub.add_parser("sweep", help="run one experiment per threshold factor")
    _add_common(p_sweep)
    p_sweep.add_argument("--sweep", required=True, metavar="k=V1,V2,...",
                         help="threshold factors to sweep")

    p_an = sub.add_parser("analyze", help="weight stats and heatmaps for a checkpoint")
    p_an.add_argument("--checkpoint", required=True)
    p_an.add_argument("--out", help="artifact directory (default: next to the checkpoint)")
    _add_common(p_an)

    p_ev = sub.add_parser("eval", help="evaluate a checkpoint on the configured test set")
    p_ev.add_argument("--checkpoint", required=True)
    p_ev.add_argument("--mode", choices=["head", "sweep"], default="head")
    _add_common(p_ev)

    args = parser.parse_args(argv)
    handlers = {
        "train": _cmd_train,
        "sweep": _cmd_sweep,
        "analyze": _cmd_analyze,
        "eval": _cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, UsageError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except (DataError, FormatError, FileNotFoundError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
