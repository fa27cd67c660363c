"""Run configuration read from TOML.

Every field has a default, so an empty file (or no file) is a valid
configuration.  Unknown sections and keys are rejected.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:  # Python 3.11+
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .audio import MelParams
from .errors import ConfigError, DataError
from .laughter import PeakConfig
from .losses import LossConfig
from .model import ModelConfig
from .train import TrainConfig


@dataclass(frozen=True)
class ClusterSection:
    k: int = 2
    n_init: int = 10
    max_iter: int = 300
    pooled: bool = True  # cluster the peaks of all input files jointly


@dataclass(frozen=True)
class DatasetSection:
    n_s: float = 8.0
    fps: float = 1.0
    neg_ratio: float = 1.0
    guard_s: float = 1.0
    test_fraction: float = 0.2
    augment_copies: int = 0
    max_shift_s: float = 0.5
    max_noise: float = 0.005


@dataclass(frozen=True)
class ModelSection:
    n_proj: int = 512
    hidden: int = 512
    d: int = 512
    dropout: float = 0.1
    pooled: bool = False
    m_audio: int = 8
    m_visual: int = 8
    m_text: int = 4
    d_text: int = 128


@dataclass(frozen=True)
class EvalSection:
    iou_thresholds: tuple[float, ...] = (0.3, 0.7)
    resolution_s: float = 0.01
    stride_s: float = 1.0
    batch_size: int = 128


@dataclass(frozen=True)
class RunConfig:
    mel: MelParams = field(default_factory=MelParams)
    peaks: PeakConfig = field(default_factory=PeakConfig)
    cluster: ClusterSection = field(default_factory=ClusterSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSection = field(default_factory=EvalSection)

    @property
    def seed(self) -> int:
        return self.train.seed

    def model_config(self) -> ModelConfig:
        m = self.model
        return ModelConfig(
            d_raw={"visual": ModelConfig().d_raw["visual"], "text": m.d_text, "audio": 2 * self.mel.n_mels},
            n_proj=m.n_proj, hidden=m.hidden, d=m.d, dropout=m.dropout, pooled=m.pooled,
            init_seed=self.seed)

    def token_counts(self) -> dict[str, int]:
        return {"visual": self.model.m_visual, "text": self.model.m_text, "audio": self.model.m_audio}

    def to_dict(self) -> dict:
        return {f.name: asdict(getattr(self, f.name)) for f in fields(self)}


def _coerce(section: str, key: str, default, value):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"[{section}] {key} must be true or false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key} must be an integer")
        return value
    if isinstance(default, float) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"[{section}] {key} must be a list of numbers")
        return tuple(float(v) for v in value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"[{section}] {key} must be a string")
        return value
    raise ConfigError(f"[{section}] {key}: unsupported value")  # pragma: no cover


def from_dict(doc: dict) -> RunConfig:
    sections = {}
    known = {f.name: f for f in fields(RunConfig)}
    for name, body in doc.items():
        if name not in known:
            raise ConfigError(f"unknown config section [{name}]")
        if not isinstance(body, dict):
            raise ConfigError(f"[{name}] must be a table")
        default = known[name].default_factory()
        keys = {f.name for f in fields(default)}
        values = {}
        for key, value in body.items():
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            values[key] = _coerce(name, key, getattr(default, key), value)
        try:
            sections[name] = type(default)(**{**asdict(default), **values})
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}") from exc
    return RunConfig(**sections)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise DataError(f"config file not found: {path}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc)
