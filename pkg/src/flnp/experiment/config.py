"""Declarative experiment configuration.

Configs load from a JSON file whose structure mirrors the dataclasses
below; any field can be overridden on the command line with repeated
`--set dotted.path=value` flags (values are parsed as JSON when they
parse, else taken as strings).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Any

from ..data import IMBALANCED_RATIOS, MaskingConfig, PartitionSpec
from ..models import preset
from ..models.config import ConfigError, ModelConfig

MODES = ("centralized", "standalone", "federated")
PHASES = ("pretrain_mlm", "finetune_classify", "pretrain_then_finetune")
MODEL_NAMES = ("bert", "bert_mini", "lstm")
DEFAULT_AUTH_TOKEN = "flnp-shared-token"


@dataclass(frozen=True)
class Seeds:
    corpus: int = 1
    partition: int = 2
    init: int = 3
    batch: int = 4


@dataclass(frozen=True)
class DataConfig:
    source: str = "synthetic"  # synthetic | file
    path: str | None = None
    n_records: int = 2000
    min_len: int = 16
    max_len: int = 64
    prevalence: float = 0.21
    label_noise: float = 0.05
    vocab_max_size: int = 2000
    val_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.source not in ("synthetic", "file"):
            raise ConfigError(f"unknown data source '{self.source}'")
        if self.source == "file" and not self.path:
            raise ConfigError("data.source=file requires data.path")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")


@dataclass(frozen=True)
class PartitionConfig:
    n_clients: int = 8
    mode: str = "balanced"  # balanced | imbalanced | small
    ratios: tuple[float, ...] | None = None

    def spec(self) -> PartitionSpec:
        ratios = self.ratios
        if ratios is None:
            ratios = IMBALANCED_RATIOS if self.n_clients == 8 else tuple(
                [1.0 / self.n_clients] * self.n_clients
            )
        return PartitionSpec(n_clients=self.n_clients, mode=self.mode, ratios=tuple(ratios))


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "federated"
    phase: str = "pretrain_mlm"
    model: str = "bert_mini"
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    rounds: int = 10
    local_epochs: int = 1
    batch_size: int = 32
    lr: float = 1e-2
    max_seq_len: int = 64
    seeds: Seeds = field(default_factory=Seeds)
    transport: str = "channel"  # channel | tcp
    addr: str = "127.0.0.1:7878"
    data: DataConfig = field(default_factory=DataConfig)
    masking: MaskingConfig = field(default_factory=MaskingConfig)
    holdout_frac: float = 0.2
    reset_optimizer: bool = True
    weighted_aggregation: bool = True
    allow_single_client: bool = False
    finetune_from_pretrained: bool = True
    pretrain_rounds: int | None = None
    pretrained_params_path: str | None = None
    auth_token: str = DEFAULT_AUTH_TOKEN
    run_id: str | None = None
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got '{self.mode}'")
        if self.phase not in PHASES:
            raise ConfigError(f"phase must be one of {PHASES}, got '{self.phase}'")
        if self.model not in MODEL_NAMES:
            raise ConfigError(f"model must be one of {MODEL_NAMES}, got '{self.model}'")
        if self.model == "lstm" and self.phase in ("pretrain_mlm", "pretrain_then_finetune"):
            raise ConfigError("the lstm preset cannot pretrain with MLM")
        if self.transport not in ("channel", "tcp"):
            raise ConfigError(f"transport must be channel or tcp, got '{self.transport}'")
        if self.rounds < 0 or self.local_epochs < 0:
            raise ConfigError("rounds and local_epochs must be non-negative")
        if (
            self.mode == "federated"
            and self.effective_clients() < 2
            and not self.allow_single_client
        ):
            raise ConfigError(
                "federated mode needs at least 2 clients "
                "(set allow_single_client=true for the equivalence test)"
            )

    def effective_clients(self) -> int:
        return 1 if self.partition.mode == "small" else self.partition.n_clients

    def model_config(self, vocab_size: int) -> ModelConfig:
        return preset(self.model, vocab_size=vocab_size, max_seq_len=self.max_seq_len)

    def derived_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        return f"{self.phase}-{self.mode}-{self.model}-i{self.seeds.init}"

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.addr.rpartition(":")
        if not host:
            raise ConfigError(f"addr must look like host:port, got '{self.addr}'")
        return host, int(port)


def _build(cls, value: Any):
    """Recursively construct a (frozen) dataclass tree from plain JSON data."""
    if value is None or not dataclasses.is_dataclass(cls):
        return value
    if not isinstance(value, dict):
        raise ConfigError(f"expected an object for {cls.__name__}, got {type(value).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in value.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{key}' for {cls.__name__}")
        ftype = known[key].type
        target = _DATACLASS_FIELDS.get((cls, key))
        if target is not None:
            kwargs[key] = _build(target, raw)
        elif isinstance(raw, list):
            kwargs[key] = tuple(raw)
        else:
            kwargs[key] = raw
        del ftype
    return cls(**kwargs)


_DATACLASS_FIELDS = {
    (ExperimentConfig, "partition"): PartitionConfig,
    (ExperimentConfig, "seeds"): Seeds,
    (ExperimentConfig, "data"): DataConfig,
    (ExperimentConfig, "masking"): MaskingConfig,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return json.loads(json.dumps(dataclasses.asdict(cfg)))


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply `dotted.path=value` assignments onto a plain config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = path.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into '{part}' of '{path}'")
        node[parts[-1]] = value
    return data


def load_config(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if overrides:
        apply_overrides(data, overrides)
    return config_from_dict(data)
