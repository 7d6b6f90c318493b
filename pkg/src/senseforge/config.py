"""Pipeline configuration: file loading, defaults, digests."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .expansion import DEFAULT_PROMPT_TEMPLATE, LemmaMatchPolicy
from .forge import ForgeConfig
from .util import SenseforgeError, config_digest


class ConfigError(SenseforgeError):
    pass


@dataclass
class PathsConfig:
    dictionary: Optional[str] = None
    cache_dir: str = "cache"
    output_dir: str = "out"


@dataclass
class ExpansionConfig:
    backend: str = "http"  # http | template
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    api_key_env: str = "OPENAI_API_KEY"
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 1.0
    max_tokens: int = 256
    n_generations: int = 10
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE
    retries: int = 3
    max_workers: int = 1


@dataclass
class PolicyConfig:
    kind: str = "stem-prefix"
    min_stem_length: int = 4
    case_sensitive: bool = False

    def to_policy(self) -> LemmaMatchPolicy:
        return LemmaMatchPolicy(self.kind, self.min_stem_length, self.case_sensitive)


@dataclass
class ScorerConfig:
    kind: str = "overlap"  # oracle | random | overlap | remote
    url: Optional[str] = None
    batch_size: int = 100
    seed: int = 0


@dataclass
class ThresholdSettings:
    multiplier: float = 1.2
    grid: list[float] = field(default_factory=lambda: [round(1.0 + 0.1 * i, 1) for i in range(11)])


@dataclass
class PipelineConfig:
    """All knobs for a pipeline run; every seed is explicit, never wall-clock."""

    paths: PathsConfig = field(default_factory=PathsConfig)
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    forge: ForgeConfig = field(default_factory=ForgeConfig)
    split_seed: int = 0
    validation_fraction: float = 0.10
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    threshold: ThresholdSettings = field(default_factory=ThresholdSettings)

    def digest(self) -> str:
        return config_digest(dataclasses.asdict(self))


def _build(cls, obj: dict, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return obj


def load_config(path: str | Path) -> PipelineConfig:
    """Load a YAML or JSON config file; unknown keys are an error."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    if data is None:
        data = {}
    data = _build(PipelineConfig, data, str(path))

    cfg = PipelineConfig()
    nested = {
        "paths": (PathsConfig, "paths"),
        "expansion": (ExpansionConfig, "expansion"),
        "policy": (PolicyConfig, "policy"),
        "forge": (ForgeConfig, "forge"),
        "scorer": (ScorerConfig, "scorer"),
        "threshold": (ThresholdSettings, "threshold"),
    }
    for key, value in data.items():
        if key in nested:
            cls, name = nested[key]
            setattr(cfg, name, cls(**_build(cls, value, f"{path}:{key}")))
        else:
            setattr(cfg, key, value)
    if not (0.0 < cfg.validation_fraction < 1.0):
        raise ConfigError("validation_fraction must be in (0, 1)")
    return cfg
