"""Experiment configuration: JSON <-> dataclasses with field-path validation.

Defaults follow the reference training setup: Adam lr 0.001, batch 8,
weight decay 1e-4, clipping norm 1.0, 70/10/20 split.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

TOPOLOGIES = ("mps", "ttn", "mera")
BLOCKS = ("simple", "strong")
HEADS = ("dense", "gap")
AGGREGATIONS = ("mean", "weighted")
SOURCES = ("synth", "csv", "pgm_dir")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class DatasetConfig:
    source: str = "synth"
    path: str | None = None
    labels: str | None = None
    n: int = 800
    h: int = 8
    w: int = 8
    noise_sd: float = 0.15
    seed: int | None = None


@dataclass
class PartitionConfig:
    fractions: list[float] | None = field(default_factory=lambda: [0.48, 0.25, 0.15, 0.12])
    counts: list[list[int]] | None = None
    stratified: bool = True
    clients: list[str] | None = None


@dataclass
class DPSettings:
    enabled: bool = False
    clip: float = 1.0
    epsilon: float = 0.0


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    downscale: list[int] | None = None
    split: list[float] = field(default_factory=lambda: [0.70, 0.10, 0.20])
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    topology: str = "ttn"
    block: str = "simple"
    layers: int = 1
    patch_side: int = 2
    head: str = "gap"
    rounds: int = 30
    local_epochs: int = 1
    batch_size: int = 8
    lr: float = 0.001
    weight_decay: float = 1e-4
    server_lr: float = 1.0
    aggregation: str = "mean"
    dp: DPSettings = field(default_factory=DPSettings)
    target_accuracy: float | None = None
    patience: int = 1
    seed: int = 0
    output_dir: str = "runs/default"

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    @classmethod
    def from_dict(cls, obj) -> "ExperimentConfig":
        cfg = _build(cls, obj, "")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError("<root>", f"invalid JSON: {e}") from None
        return cls.from_dict(obj)

    def validate(self):
        def need(ok, path, msg):
            if not ok:
                raise ConfigError(path, msg)

        need(self.dataset.source in SOURCES, "dataset.source", f"must be one of {SOURCES}")
        if self.dataset.source in ("csv", "pgm_dir"):
            need(bool(self.dataset.path), "dataset.path", "required for file sources")
        if self.dataset.source == "pgm_dir":
            need(bool(self.dataset.labels), "dataset.labels", "required for pgm_dir")
        if self.dataset.source == "synth":
            need(self.dataset.n >= 2, "dataset.n", "must be >= 2")
            need(min(self.dataset.h, self.dataset.w) >= 4, "dataset.h", "synthetic images need h, w >= 4")
            need(self.dataset.noise_sd >= 0, "dataset.noise_sd", "must be >= 0")
        if self.downscale is not None:
            need(len(self.downscale) == 2 and min(self.downscale) >= 1, "downscale", "must be [h, w] >= 1")
        need(len(self.split) == 3 and min(self.split) >= 0 and abs(sum(self.split) - 1) <= 1e-9,
             "split", "must be three non-negative fractions summing to 1")
        p = self.partition
        need((p.fractions is None) != (p.counts is None), "partition", "give exactly one of fractions / counts")
        if p.fractions is not None:
            need(len(p.fractions) >= 1 and min(p.fractions) >= 0 and abs(sum(p.fractions) - 1) <= 1e-9,
                 "partition.fractions", "must be non-negative and sum to 1")
        if p.counts is not None:
            need(len(p.counts) >= 1 and all(len(c) == 2 and min(c) >= 0 for c in p.counts),
                 "partition.counts", "must be a list of [n_label0, n_label1] pairs")
        n_clients = len(p.fractions if p.fractions is not None else p.counts)
        if p.clients is not None:
            need(len(p.clients) == n_clients and len(set(p.clients)) == n_clients,
                 "partition.clients", "needs one unique name per client")
        need(self.topology in TOPOLOGIES, "topology", f"must be one of {TOPOLOGIES}")
        need(self.block in BLOCKS, "block", f"must be one of {BLOCKS}")
        need(self.layers >= 1, "layers", "must be >= 1")
        need(self.head in HEADS, "head", f"must be one of {HEADS}")
        need(self.patch_side >= 1, "patch_side", "must be >= 1")
        q = self.patch_side**2
        if self.topology == "mps":
            need(q >= 2, "patch_side", "mps needs at least 2 qubits")
        else:
            need(q >= (4 if self.topology == "mera" else 2) and q & (q - 1) == 0, "patch_side",
                 f"{self.topology} needs patch_side^2 to be a power of two (got {q} qubits)")
        need(self.rounds >= 0, "rounds", "must be >= 0")
        need(self.local_epochs >= 1, "local_epochs", "must be >= 1")
        need(self.batch_size >= 1, "batch_size", "must be >= 1")
        need(self.lr > 0, "lr", "must be > 0")
        need(self.weight_decay >= 0, "weight_decay", "must be >= 0")
        need(self.server_lr > 0, "server_lr", "must be > 0")
        need(self.aggregation in AGGREGATIONS, "aggregation", f"must be one of {AGGREGATIONS}")
        need(self.dp.clip > 0, "dp.clip", "must be > 0")
        need(self.dp.epsilon >= 0, "dp.epsilon", "must be >= 0")
        if self.target_accuracy is not None:
            need(0 <= self.target_accuracy <= 1, "target_accuracy", "must lie in [0, 1]")
        need(self.patience >= 1, "patience", "must be >= 1")
        need(self.seed >= 0, "seed", "must be >= 0")


_NESTED = {"dataset": DatasetConfig, "partition": PartitionConfig, "dp": DPSettings}
# type exemplars for fields whose default is None
_OPTIONAL = {"path": "", "labels": "", "seed": 0, "downscale": [], "fractions": [], "counts": [],
             "clients": [], "target_accuracy": 0.0}


def _coerce(value, default, path):
    """Check a scalar/list against the type of its default."""
    if value is None:
        raise ConfigError(path, "must not be null")
    if default is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(path, f"expected a list, got {value!r}")
        return value
    return value


def _build(cls, obj, prefix):
    if not isinstance(obj, dict):
        raise ConfigError(prefix or "<root>", "expected an object")
    names = {f.name for f in fields(cls)}
    for key in obj:
        if key not in names:
            raise ConfigError(f"{prefix}{key}", "unknown field")
    default = cls()
    kwargs = {}
    for f in fields(cls):
        if f.name not in obj:
            continue
        path = f"{prefix}{f.name}"
        if f.name in _NESTED and cls is ExperimentConfig:
            kwargs[f.name] = _build(_NESTED[f.name], obj[f.name], path + ".")
        else:
            exemplar = getattr(default, f.name)
            if exemplar is None:
                if obj[f.name] is None:
                    kwargs[f.name] = None
                    continue
                exemplar = _OPTIONAL.get(f.name)
            kwargs[f.name] = _coerce(obj[f.name], exemplar, path)
    if cls is PartitionConfig and obj.get("counts") is not None and "fractions" not in obj:
        kwargs["fractions"] = None
    return cls(**kwargs)
