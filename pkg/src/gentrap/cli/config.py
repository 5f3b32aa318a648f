"""Run configuration: one structured-text file (YAML or JSON) with a schema version."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from ..errors import ConfigError
from ..models import ARCHITECTURES, ModelConfig
from ..synthgen import ScenarioConfig
from ..training import COMPARISON_MODELS, FRACTIONS, TrainConfig

SCHEMA_VERSION = 1


@dataclass
class DatasetOptions:
    window: int = 5
    max_k: int = 3
    drop_threshold: float = 0.20
    n_folds: int = 5


@dataclass
class ExperimentOptions:
    model: str = "gentrap"                      # architecture for train / evaluate
    fold: int = 1                               # fold for train / evaluate / generalize
    folds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    models: list[str] = field(default_factory=lambda: list(COMPARISON_MODELS))
    fractions: list[float] = field(default_factory=lambda: list(FRACTIONS))
    generalize_models: list[str] = field(default_factory=lambda: ["gentrap", "lstmplus"])


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/default"
    data_dir: str | None = None                 # scenario tables; defaults to <out_dir>/data
    checkpoint: str | None = None               # defaults to <out_dir>/checkpoints/<model>-fold<k>.npz
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    dataset: DatasetOptions = field(default_factory=DatasetOptions)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    experiment: ExperimentOptions = field(default_factory=ExperimentOptions)
    source: str | None = None                   # file the config was read from

    def __post_init__(self):
        e = self.experiment
        for tag in [e.model, *e.models, *e.generalize_models]:
            if tag not in ARCHITECTURES:
                raise ConfigError(f"unknown architecture {tag!r}; expected one of {sorted(ARCHITECTURES)}")
        if not 1 <= e.fold <= self.dataset.n_folds or any(not 1 <= f <= self.dataset.n_folds for f in e.folds):
            raise ConfigError(f"fold numbers must lie in 1..{self.dataset.n_folds}")
        if any(not 0 < f <= 1 for f in e.fractions):
            raise ConfigError("fractions must lie in (0, 1]")
        if self.train.max_k != self.model.max_k or self.dataset.max_k != self.model.max_k:
            raise ConfigError("dataset.max_k, model.max_k and train.max_k must agree")

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    @property
    def data(self) -> Path:
        return Path(self.data_dir) if self.data_dir else self.out / "data"

    @property
    def store(self) -> Path:
        return self.out / "preprocessed"

    def checkpoint_path(self) -> Path:
        if self.checkpoint:
            return Path(self.checkpoint)
        e = self.experiment
        return self.out / "checkpoints" / f"{e.model}-fold{e.fold}.npz"

    def with_overrides(self, seed: int | None = None, out: str | None = None) -> "RunConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = seed
        if out is not None:
            d["out_dir"] = out
        return from_dict(d, self.source)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "data_dir": self.data_dir,
            "checkpoint": self.checkpoint,
            "scenario": {k: v for k, v in self.scenario.to_dict().items() if k != "seed"},
            "dataset": vars(self.dataset).copy(),
            "model": _plain(self.model.to_dict()),
            "train": {k: v for k, v in self.train.to_dict().items() if k != "seed"},
            "experiment": vars(self.experiment).copy(),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _section(cls, d, name):
    if d is None:
        return cls()
    if not isinstance(d, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    bad = set(d) - known
    if bad:
        raise ConfigError(f"unknown field(s) in {name!r}: {sorted(bad)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigError(f"bad {name!r} section: {exc}") from exc


def from_dict(d: dict, source: str | None = None) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    d = dict(d)
    version = d.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    known = {"seed", "out_dir", "data_dir", "checkpoint", "scenario", "dataset", "model", "train", "experiment"}
    bad = set(d) - known
    if bad:
        raise ConfigError(f"unknown top-level field(s): {sorted(bad)}")
    seed = int(d.get("seed", 0))
    scenario = dict(d.get("scenario") or {})
    train = dict(d.get("train") or {})
    if "seed" in scenario or "seed" in train:
        raise ConfigError("set the seed once at the top level")
    model = d.get("model") or {}
    if not isinstance(model, dict):
        raise ConfigError("section 'model' must be a mapping")
    return RunConfig(
        seed=seed,
        out_dir=str(d.get("out_dir", "runs/default")),
        data_dir=d.get("data_dir"),
        checkpoint=d.get("checkpoint"),
        scenario=ScenarioConfig.from_dict({**scenario, "seed": seed}),
        dataset=_section(DatasetOptions, d.get("dataset"), "dataset"),
        model=ModelConfig.from_dict(model),
        train=_section(TrainConfig, {**train, "seed": seed}, "train"),
        experiment=_section(ExperimentOptions, d.get("experiment"), "experiment"),
        source=source,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        d = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return from_dict(d or {}, str(path))
