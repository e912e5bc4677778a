"""Configuration dataclasses and the TOML loader.

Unset keys take the defaults below (D=64, minibatch 2048, tau=1,
alpha+=0.8, alpha-=1.2, four views, one negative per positive).
"""

from __future__ import annotations

import dataclasses
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .graph import RelationKind
from .objective import LossConfig

SAMPLERS = ("stochastic", "heuristic")


@dataclass(frozen=True)
class AugmentConfig:
    r_ub: float = 0.1
    r_ui: float = 0.1
    r_bi: float = 0.1
    alpha: float = 0.5
    alpha_plus: float = 0.8
    alpha_minus: float = 1.2
    num_views: int = 4
    batch_size: int = 1024
    sampler: str = "heuristic"
    max_batches: int = 20000

    def __post_init__(self):
        for name in ("r_ub", "r_ui", "r_bi"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"augment.{name} must lie in [0, 1), got {getattr(self, name)}")
        if not 0 <= self.alpha <= 1:
            raise ConfigError(f"augment.alpha must lie in [0, 1], got {self.alpha}")
        if not self.alpha_plus > 0:
            raise ConfigError("augment.alpha_plus must be > 0")
        if not self.alpha_minus > 0:
            raise ConfigError("augment.alpha_minus must be > 0")
        if self.num_views < 1:
            raise ConfigError("augment.num_views must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("augment.batch_size must be >= 1")
        if self.max_batches < 1:
            raise ConfigError("augment.max_batches must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"augment.sampler must be one of {SAMPLERS}, got {self.sampler!r}")

    def ratio(self, kind: RelationKind) -> float:
        return getattr(self, f"r_{RelationKind(kind).value}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    lr_decay: float = 1.0
    lr_decay_step: int = 10
    epochs: int = 100
    minibatch_size: int = 2048
    embedding_dim: int = 64
    layers: int = 2
    seed: int = 0
    pretrain_epochs: int = 100
    early_stop_patience: int | None = None
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("train.learning_rate must be > 0")
        if not self.lr_decay > 0:
            raise ConfigError("train.lr_decay must be > 0")
        if self.lr_decay_step < 1:
            raise ConfigError("train.lr_decay_step must be >= 1")
        if self.epochs < 1:
            raise ConfigError("train.epochs must be >= 1")
        if self.minibatch_size < 1:
            raise ConfigError("train.minibatch_size must be >= 1")
        if self.embedding_dim < 1:
            raise ConfigError("train.embedding_dim must be >= 1")
        if self.layers < 0:
            raise ConfigError("train.layers must be >= 0")
        if self.pretrain_epochs < 0:
            raise ConfigError("train.pretrain_epochs must be >= 0")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ConfigError("train.early_stop_patience must be >= 1")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.7
    valid: float = 0.1
    test: float = 0.2
    seed: int = 0

    def __post_init__(self):
        fr = (self.train, self.valid, self.test)
        if any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must be >= 0 and sum to 1, got {fr}")


@dataclass(frozen=True)
class DataConfig:
    ub: Path | None = None
    ui: Path | None = None
    bi: Path | None = None
    num_users: int | None = None
    num_items: int | None = None
    num_bundles: int | None = None

    def __post_init__(self):
        for name in ("ub", "ui", "bi"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"data.{name}: file not found: {p}")
        for name in ("num_users", "num_items", "num_bundles"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"data.{name} must be >= 1")


@dataclass(frozen=True)
class TheoryConfig:
    epsilon: float = 0.1
    delta: float = 0.05
    eta: float = 0.1
    hypothesis_count: float = 1e6


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    out: Path = Path("clbr-out")
    seed: int = 0
    threads: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitSpec = field(default_factory=SplitSpec)
    theory: TheoryConfig = field(default_factory=TheoryConfig)

    def __post_init__(self):
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")

    @property
    def loss(self) -> LossConfig:
        return self.train.loss

    @property
    def augment(self) -> AugmentConfig:
        return self.train.augment

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


_SECTIONS = {
    "theory": None,
    "data": DataConfig,
    "train": TrainConfig,
    "loss": LossConfig,
    "augment": AugmentConfig,
    "split": SplitSpec,
}


def _coerce(section: str, key: str, value, hint, base: Path):
    where = f"{section}.{key}" if section else key
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union or (origin is not None and type(None) in args):
        inner = [a for a in args if a is not type(None)]
        return _coerce(section, key, value, inner[0], base)
    if hint is Path:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a path string, got {type(value).__name__}")
        p = Path(value)
        return p if p.is_absolute() else base / p
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected a boolean")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported value")


def _build(cls, section: str, raw: dict, base: Path, skip=()):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)} - set(skip)
    kwargs = {}
    for key, value in raw.items():
        if key not in names or isinstance(value, dict):
            raise ConfigError(f"unknown config key: {section + '.' if section else ''}{key}")
        kwargs[key] = _coerce(section, key, value, hints[key], base)
    return cls(**kwargs)


def config_from_dict(raw: dict, base: Path | str = ".") -> PipelineConfig:
    base = Path(base)
    raw = dict(raw)
    sections = {}
    for name in _SECTIONS:
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"{name}: expected a section")
            sections[name] = raw.pop(name)
    top = _build(PipelineConfig, "", raw, base, skip=("data", "train", "split", "theory"))
    loss = _build(LossConfig, "loss", sections.get("loss", {}), base)
    augment = _build(AugmentConfig, "augment", sections.get("augment", {}), base)
    train_raw = sections.get("train", {})
    # stage seeds come from the master seed, so nested seed keys are rejected
    train = _build(TrainConfig, "train", train_raw, base, skip=("loss", "augment", "seed"))
    train = dataclasses.replace(train, loss=loss, augment=augment, seed=top.seed)
    split = _build(SplitSpec, "split", sections.get("split", {}), base, skip=("seed",))
    return dataclasses.replace(
        top,
        data=_build(DataConfig, "data", sections.get("data", {}), base),
        train=train,
        split=dataclasses.replace(split, seed=top.seed),
        theory=_build(TheoryConfig, "theory", sections.get("theory", {}), base),
    )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    return config_from_dict(raw, base=path.parent)


def config_to_dict(cfg: PipelineConfig) -> dict:
    """Plain-data snapshot suitable for TOML/JSON; None values omitted."""

    def clean(obj):
        if dataclasses.is_dataclass(obj):
            return {f.name: clean(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                    if getattr(obj, f.name) is not None}
        if isinstance(obj, Path):
            return str(obj)
        return obj

    d = clean(cfg)
    d["split"].pop("seed")
    train = d.pop("train")
    train.pop("seed")
    d["loss"] = train.pop("loss")
    d["augment"] = train.pop("augment")
    d["train"] = train
    return d
