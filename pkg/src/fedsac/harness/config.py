"""Experiment configuration: INI-style sections of typed key/value pairs.

Example::

    [experiment]
    method = fedsac
    num_clients = 10
    rounds = 20
    seed = 0

    [partition]
    scheme = dirichlet
    alpha = 0.1

Unknown sections or keys are rejected. ``canonical_json`` gives the fully
resolved configuration as written into each run directory.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ConfigError, InvalidInput
from ..server import ServerConfig

OUTPUT_DIR_ENV = "FEDSAC_OUTPUT_DIR"

METHODS = ("fedsac", "fedavg", "local", "hetero")
SCHEMES = ("homo", "dirichlet", "pathological")
SOURCES = ("synthetic", "idx", "csv")


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "synthetic"
    num_classes: int = 10
    feature_dim: int = 32
    samples_per_class: int = 500
    class_sep: float = 3.0
    shift_scale: float = 3.0
    noise: float = 1.0
    covariate_level: float = 0.0
    concept_level: float = 0.0
    images_path: str = ""
    labels_path: str = ""
    csv_path: str = ""


@dataclass(frozen=True)
class PartitionConfig:
    scheme: str = "dirichlet"
    alpha: float = 0.1
    classes_per_client: int = 2
    min_size: int = 10


@dataclass(frozen=True)
class ModelConfig:
    hidden_dims: tuple[int, ...] = (84,)


@dataclass(frozen=True)
class ClientConfig:
    lr: float = 0.05
    local_iters: int = 100
    batch_size: int = 64
    lam: float = 0.01
    subsample_m: int = 256


@dataclass(frozen=True)
class HeteroConfig:
    # One hidden-width tuple per architecture group; clients are split into contiguous blocks.
    groups: tuple[tuple[int, ...], ...] = ((84,), (64, 84))


@dataclass(frozen=True)
class ExperimentConfig:
    method: str = "fedsac"
    num_clients: int = 10
    rounds: int = 20
    seed: int = 0
    output_dir: str = "runs/default"
    workers: int = 1
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    client: ClientConfig = field(default_factory=ClientConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    hetero: HeteroConfig = field(default_factory=HeteroConfig)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.rounds < 1 or self.num_clients < 1:
            raise ConfigError("rounds and num_clients must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.partition.scheme not in SCHEMES:
            raise ConfigError(f"partition scheme must be one of {SCHEMES}")
        if self.dataset.source not in SOURCES:
            raise ConfigError(f"dataset source must be one of {SOURCES}")
        if self.dataset.source == "idx" and not (self.dataset.images_path and self.dataset.labels_path):
            raise ConfigError("idx source needs images_path and labels_path")
        if self.dataset.source == "csv" and not self.dataset.csv_path:
            raise ConfigError("csv source needs csv_path")
        if self.method == "hetero" and len(self.hetero.groups) < 1:
            raise ConfigError("hetero method needs at least one architecture group")

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields or ``section__key`` nested fields changed."""
        top, nested = {}, {}
        for key, value in changes.items():
            if "__" in key:
                section, name = key.split("__", 1)
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        for section, values in nested.items():
            top[section] = dataclasses.replace(getattr(self, section), **values)
        return dataclasses.replace(self, **top)


SECTION_TYPES = {
    "dataset": DatasetConfig,
    "partition": PartitionConfig,
    "model": ModelConfig,
    "client": ClientConfig,
    "server": ServerConfig,
    "hetero": HeteroConfig,
}


def _int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


def _convert(text: str, tp, key: str):
    text = text.strip()
    try:
        if tp is bool:
            return text.lower() in ("1", "true", "yes", "on")
        if tp is int:
            return int(text)
        if tp is float:
            return float(text)
        if tp is str:
            return text
        if tp == tuple[int, ...]:
            return _int_tuple(text)
        if tp == tuple[tuple[int, ...], ...]:
            return tuple(_int_tuple(g) for g in text.split(";") if g.strip())
        if tp == (int | None) or tp == typing.Optional[int]:
            return None if text.lower() in ("", "none") else int(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {tp}") from None
    raise ConfigError(f"{key}: unsupported field type {tp}")


def _build(cls, values: dict, where: str):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    kwargs = {k: _convert(v, hints[k], f"{where}.{k}") for k, v in values.items()}
    return kwargs


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}") from None
    unknown = set(parser.sections()) - set(SECTION_TYPES) - {"experiment"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    try:
        sections = {
            name: cls(**_build(cls, dict(parser[name]), name)) if parser.has_section(name) else cls()
            for name, cls in SECTION_TYPES.items()
        }
        top = _build(ExperimentConfig, dict(parser["experiment"]) if parser.has_section("experiment") else {}, "experiment")
        if set(top) & set(SECTION_TYPES):
            raise ConfigError("sections cannot be set as [experiment] keys")
        return ExperimentConfig(**top, **sections)
    except (InvalidInput, TypeError) as e:
        raise ConfigError(str(e)) from None


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    """Read a config file, applying ``--seed`` and the output-directory env override."""
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    cfg = parse_config(text)
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        cfg = cfg.replace(output_dir=env_dir)
    return cfg


def to_dict(cfg: ExperimentConfig) -> dict:
    def plain(v):
        if isinstance(v, tuple):
            return [plain(x) for x in v]
        return v

    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            out[f.name] = {g.name: plain(getattr(v, g.name)) for g in dataclasses.fields(v)}
        else:
            out[f.name] = plain(v)
    return out


def canonical_json(cfg: ExperimentConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def to_ini(cfg: ExperimentConfig) -> str:
    """Serialize back to the INI format; ``parse_config(to_ini(cfg)) == cfg``."""

    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, tuple):
            if v and isinstance(v[0], tuple):
                return "; ".join(fmt(g) for g in v)
            return ", ".join(str(x) for x in v)
        return repr(v) if isinstance(v, float) else str(v)

    lines = ["[experiment]"]
    for f in dataclasses.fields(cfg):
        if f.name not in SECTION_TYPES:
            lines.append(f"{f.name} = {fmt(getattr(cfg, f.name))}")
    for name in SECTION_TYPES:
        section = getattr(cfg, name)
        lines += ["", f"[{name}]"]
        lines += [f"{g.name} = {fmt(getattr(section, g.name))}" for g in dataclasses.fields(section)]
    return "\n".join(lines) + "\n"
