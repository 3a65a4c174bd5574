"""Run configuration loaded from a single JSON file.

Every default reproduces the published hyperparameters: 512-wide layers,
dropout 0.5, 200 epochs at learning rate 1e-3 with decay 1e-3/200, 100
stochastic passes with alpha 0.5, acc_min 0.9 and d_min 0.5, an 80/20
source split and a 20/80 split with at least 10 overlapping attributes for
recognition. Relative paths are resolved against the config file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ._io import config_hash
from .datamodel.synthetic import SyntheticSpec
from .errors import ConfigError
from .mac import ReliabilityConfig, TrainingConfig
from .pipeline import CalibrationConfig, MacSettings, PipelineConfig


@dataclass
class DatasetPaths:
    name: str
    embeddings: str
    annotations: str | None = None
    schema: str | None = None


@dataclass
class CleaningSettings:
    window: int = 10
    required_correct: int = 9
    step: float = 0.02


@dataclass
class RecognitionSettings:
    min_overlap: int = 10
    fmr_targets: list = field(default_factory=lambda: [1e-3, 1e-2, 1e-1])
    fusion_mode: str = "complement"
    train_fraction: float = 0.2
    unenrolled_fraction: float = 0.2
    max_genuine_per_subject: int = 50
    imposter_ratio: float = 1.0
    l2: float = 1e-3
    attributes: list | None = None  # optional subset, e.g. attributes visible under a face mask


@dataclass
class RunConfig:
    seed: int = 0
    workers: int = 1
    schema: str | None = None
    sources: list[DatasetPaths] = field(default_factory=list)
    target: DatasetPaths | None = None
    mac: MacSettings = field(default_factory=MacSettings)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    reliability: ReliabilityConfig = field(default_factory=ReliabilityConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    train_fraction: float = 0.8
    priority: list | None = None
    strict_plausibility: bool = False
    cleaning: CleaningSettings = field(default_factory=CleaningSettings)
    recognition: RecognitionSettings = field(default_factory=RecognitionSettings)
    synthetic: dict | None = None
    base_dir: str = "."

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d

    def hash(self) -> str:
        return config_hash(self.to_dict())

    def meta(self) -> dict:
        return {"seed": self.seed, "config_hash": self.hash()}

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            mac=self.mac,
            training=self.training,
            reliability=self.reliability,
            calibration=self.calibration,
            train_fraction=self.train_fraction,
            seed=self.seed,
            priority=self.priority,
            strict_plausibility=self.strict_plausibility,
            workers=self.workers,
        )

    def synthetic_spec(self):
        """``(SyntheticSpec, per-source attribute subsets or None)`` from the ``synthetic`` section."""
        raw = dict(self.synthetic or {})
        subsets = raw.pop("source_attributes", None)
        classes = raw.pop("classes", None)
        names = raw.pop("attribute_names", None)
        spec = _build(SyntheticSpec, raw, "synthetic")
        if names or classes:
            from .datamodel import AttributeSchema

            names = names or [f"attr{k}" for k in range(spec.n_attributes)]
            spec = replace(spec, schema=AttributeSchema.simple(names, classes), n_attributes=len(names))
        return spec, subsets

    def source(self, name) -> tuple[int, DatasetPaths]:
        for i, s in enumerate(self.sources):
            if s.name == name:
                return i, s
        raise ConfigError(f"no source named {name!r} in config (have {[s.name for s in self.sources]})")


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(raw: dict, base_dir=".") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    simple = {"seed", "workers", "schema", "train_fraction", "priority", "strict_plausibility", "synthetic"}
    sections = {
        "mac": MacSettings,
        "training": TrainingConfig,
        "reliability": ReliabilityConfig,
        "calibration": CalibrationConfig,
        "cleaning": CleaningSettings,
        "recognition": RecognitionSettings,
    }
    unknown = sorted(set(raw) - simple - set(sections) - {"sources", "target"})
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    kw = {k: raw[k] for k in simple if k in raw}
    for key, cls in sections.items():
        if key in raw:
            kw[key] = _build(cls, raw[key], key)
    kw["sources"] = [_build(DatasetPaths, s, f"sources[{i}]") for i, s in enumerate(raw.get("sources", []))]
    if raw.get("target") is not None:
        kw["target"] = _build(DatasetPaths, raw["target"], "target")
    cfg = RunConfig(base_dir=str(base_dir), **kw)
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigError("train_fraction must lie in (0, 1)")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    return cfg


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (or start from defaults) and apply top-level ``overrides``."""
    raw: dict = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        base = path.parent
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    return config_from_dict(raw, base)


def require_files(cfg: RunConfig, *paths):
    missing = [str(cfg.resolve(p)) for p in paths if p is not None and not cfg.resolve(p).is_file()]
    if missing:
        raise ConfigError(f"missing input files: {missing}")
