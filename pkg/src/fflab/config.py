"""Experiment configuration: a key=value file plus flag overrides.

Grammar: UTF-8 lines of ``section.key = value`` (or bare ``key = value``),
``#`` comments. Unknown keys are hard errors, naming the key and line.
Command-line overrides use the same dotted keys and win over the file.
"""

import os
from dataclasses import dataclass, field

from .errors import ConfigError
from .thresholds import ConstantK, Pyramidal, Scheduled


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s):
    return [int(x) for x in s.replace("[", "").replace("]", "").split(",") if x.strip()]


def _parse_float_list(s):
    return [float(x) for x in s.replace("[", "").replace("]", "").split(",") if x.strip()]


# key -> (parser, default). None defaults mean "must come from file/flags
# or stay None"; seed is the one genuinely required key.
SCHEMA = {
    "dataset": (str, "synthetic"),
    "arch": (_parse_int_list, [2000, 2000, 2000, 2000]),
    "activation": (str, "relu"),
    "lr": (float, 0.01),
    "epochs": (int, 100),
    "batch_size": (int, 128),
    "seed": (int, None),
    "output_dir": (str, "runs/latest"),
    "full": (_parse_bool, False),
    "data.mnist_dir": (str, "data/mnist"),
    "data.imdb_dir": (str, "data/aclImdb"),
    "data.embedding_cache": (str, ""),
    "data.train_subset": (int, -1),   # -1: dataset default cap; 0: everything
    "data.test_subset": (int, 0),
    "threshold.strategy": (str, "constant"),
    "threshold.k": (float, 0.005),
    "threshold.k_per_layer": (_parse_float_list, [0.3, 0.5, 0.7, 0.9]),
    "threshold.k_start": (float, 0.1),
    "threshold.k_end": (float, 0.5),
    "threshold.ramp_epochs": (int, 10),
    "threshold.base": (str, "constant"),
    "inference.mode": (str, "head"),
    "inference.skip_first_layer": (_parse_bool, True),
    "head.epochs": (int, 8),
    "head.lr": (float, 1e-3),
    "head.batch_size": (int, 128),
    "baseline.enabled": (_parse_bool, False),
    "baseline.lr": (float, 1e-3),
    "baseline.epochs": (int, 0),      # 0: same as epochs
    "sgns.dim": (int, 100),
    "sgns.window": (int, 5),
    "sgns.neg_k": (int, 5),
    "sgns.epochs": (int, 5),
    "sgns.min_count": (int, 5),
    "sgns.lr": (float, 0.025),
    "synthetic.classes": (int, 10),
    "synthetic.dim": (int, 20),
    "synthetic.train_per_class": (int, 200),
    "synthetic.test_per_class": (int, 50),
    "synthetic.separation": (float, 2.0),
}

_DATASETS = ("mnist", "imdb", "synthetic")
_DESK_SUBSET = {"mnist": 10000, "imdb": 5000, "synthetic": 0}


@dataclass
class ExperimentConfig:
    """Fully-resolved run description; attribute names use _ for dots."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def seed(self):
        return self.values["seed"]


def _set_value(values, key, raw, line=None):
    if key not in SCHEMA:
        raise ConfigError(f"unknown config key {key!r}", line=line)
    parser, _ = SCHEMA[key]
    try:
        values[key] = parser(raw) if isinstance(raw, str) else raw
    except (ValueError, TypeError):
        raise ConfigError(
            f"bad value {raw!r} for key {key!r} (expected {parser.__name__.lstrip('_parse').strip('_') or parser.__name__})",
            line=line,
        ) from None


def parse_config(path=None, overrides=None):
    """Resolve file + overrides + defaults into an ExperimentConfig."""
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path!r}")
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw_line in enumerate(f, start=1):
                line = raw_line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
                key, _, raw = line.partition("=")
                _set_value(values, key.strip(), raw.strip(), line=lineno)

    for key, raw in (overrides or {}).items():
        _set_value(values, key, raw)

    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)

    _validate(values)
    return ExperimentConfig(values)


def _validate(values):
    if values["seed"] is None:
        raise ConfigError("seed is required (no wall-clock seeding); pass seed=<int>")
    if values["dataset"] not in _DATASETS:
        raise ConfigError(
            f"dataset must be one of {_DATASETS}, got {values['dataset']!r}"
        )
    if values["epochs"] < 1:
        raise ConfigError("epochs must be >= 1")
    if values["batch_size"] < 1:
        raise ConfigError("batch_size must be >= 1")
    if not values["arch"] or any(w < 1 for w in values["arch"]):
        raise ConfigError(f"arch widths must all be >= 1, got {values['arch']}")
    if values["inference.mode"] not in ("head", "sweep"):
        raise ConfigError(
            f"inference.mode must be head or sweep, got {values['inference.mode']!r}"
        )
    if values["threshold.strategy"] not in ("constant", "pyramidal", "scheduled"):
        raise ConfigError(
            "threshold.strategy must be constant, pyramidal or scheduled, "
            f"got {values['threshold.strategy']!r}"
        )
    if values["threshold.base"] not in ("constant", "pyramidal"):
        raise ConfigError(
            f"threshold.base must be constant or pyramidal, got {values['threshold.base']!r}"
        )
    # --full clears the desk-scale training subset cap
    if values["full"]:
        values["data.train_subset"] = 0
    elif values["data.train_subset"] < 0:
        values["data.train_subset"] = _DESK_SUBSET[values["dataset"]]


def threshold_strategy(cfg, depth):
    """Build the configured strategy, checking pyramidal length against depth."""
    kind = cfg["threshold.strategy"]
    if kind == "constant":
        return ConstantK(cfg["threshold.k"])
    if kind == "pyramidal":
        ks = cfg["threshold.k_per_layer"]
        if len(ks) != depth:
            raise ConfigError(
                f"threshold.k_per_layer has {len(ks)} entries for a depth-{depth} network"
            )
        return Pyramidal(tuple(ks))
    # scheduled: the ramp carries the magnitude (k_start -> k_end), the
    # base carries only the per-layer shape, so a constant base is k=1
    if cfg["threshold.base"] == "constant":
        base = ConstantK(1.0)
    else:
        if len(cfg["threshold.k_per_layer"]) != depth:
            raise ConfigError(
                f"threshold.k_per_layer has {len(cfg['threshold.k_per_layer'])} entries "
                f"for a depth-{depth} network"
            )
        base = Pyramidal(tuple(cfg["threshold.k_per_layer"]))
    return Scheduled(
        cfg["threshold.k_start"],
        cfg["threshold.k_end"],
        cfg["threshold.ramp_epochs"],
        base=base,
    )


def echo_config(cfg):
    """Canonical provenance text: every key, sorted, one per line."""
    lines = []
    for key in sorted(cfg.values):
        v = cfg.values[key]
        if isinstance(v, list):
            v = ",".join(str(x) for x in v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
