"""Pipeline configuration: a YAML key-value tree over nested dataclasses.

Every tunable the pipeline exposes lives here with its default; configs
round-trip through to_dict/from_dict unchanged so run manifests can embed
an exact snapshot. Env vars override credentials only (see providers).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError


@dataclass
class InputsConfig:
    notes: str = ""
    queries: str = ""
    format: str = ""          # csv | jsonl | "" (infer from suffix)
    strict_queries: bool = False


@dataclass
class Bm25Config:
    k1: float = 1.5
    b: float = 0.75
    top_k: int = 100


@dataclass
class SemanticConfig:
    enabled: bool = True
    threshold: float = 0.75
    inclusive: bool = True


@dataclass
class EmbeddingConfig:
    provider: str = "hash"    # hash | http
    endpoint: str = ""
    dimension: int = 1024
    seed: int = 0


@dataclass
class LlmConfig:
    provider: str = "http"    # http | replay
    endpoint: str = ""
    model: str = ""
    temperature: float = 0.0
    max_tokens: int = 4096
    max_retries: int = 3
    backoff: float = 0.5
    timeout: float = 120.0
    concurrency: int = 4
    replay_dir: str = ""


@dataclass
class PairingConfig:
    strategy: str = "adjacent"   # adjacent | all | window
    window: int = 2


@dataclass
class SplitConfig:
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0


@dataclass
class PipelineConfig:
    chunk_size: int = 5
    context_tokens: int = 10
    inputs: InputsConfig = field(default_factory=InputsConfig)
    bm25: Bm25Config = field(default_factory=Bm25Config)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    embedding: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    pairing: PairingConfig = field(default_factory=PairingConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    stop_phrase_file: str = ""
    # drop events with no token overlap with any prompted chunk (default:
    # such events are only flagged via a null source_chunk_id)
    strict_chunk_membership: bool = False
    output_dir: str = "out"

    def to_dict(self) -> dict[str, Any]:
        def unpack(value):
            if dataclasses.is_dataclass(value):
                return {f.name: unpack(getattr(value, f.name))
                        for f in dataclasses.fields(value)}
            if isinstance(value, tuple):
                return list(value)
            return value
        return unpack(self)


def _build(cls, data: dict[str, Any], prefix: str):
    kwargs: dict[str, Any] = {}
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{prefix}{key}", "unknown config key")
        f = known[key]
        if key in _NESTED and cls is PipelineConfig:
            if not isinstance(value, dict):
                raise ConfigError(f"{prefix}{key}", "expected a mapping")
            kwargs[key] = _build(_NESTED[key], value, f"{prefix}{key}.")
        elif f.name == "fractions":
            kwargs[key] = tuple(float(v) for v in value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


_NESTED = {
    "inputs": InputsConfig,
    "bm25": Bm25Config,
    "semantic": SemanticConfig,
    "embedding": EmbeddingConfig,
    "llm": LlmConfig,
    "pairing": PairingConfig,
    "split": SplitConfig,
}


def from_dict(data: dict[str, Any]) -> PipelineConfig:
    return _build(PipelineConfig, data or {}, "")


def load_config(path: str | Path) -> PipelineConfig:
    with Path(path).open(encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config file must be a mapping")
    return from_dict(data)


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)


def validate(cfg: PipelineConfig) -> None:
    """Range checks for every numeric field; raises ConfigError naming the
    offending field."""
    if cfg.chunk_size < 1:
        raise ConfigError("chunk_size", "must be >= 1")
    if cfg.context_tokens < 0:
        raise ConfigError("context_tokens", "must be >= 0")
    if cfg.bm25.k1 <= 0:
        raise ConfigError("bm25.k1", "must be > 0")
    if not 0.0 <= cfg.bm25.b <= 1.0:
        raise ConfigError("bm25.b", "must be in [0, 1]")
    if cfg.bm25.top_k < 1:
        raise ConfigError("bm25.top_k", "must be >= 1")
    if not -1.0 <= cfg.semantic.threshold <= 1.0:
        raise ConfigError("semantic.threshold", "must be in [-1, 1]")
    if cfg.embedding.provider not in ("hash", "http"):
        raise ConfigError("embedding.provider", "must be 'hash' or 'http'")
    if cfg.embedding.dimension < 1:
        raise ConfigError("embedding.dimension", "must be >= 1")
    if cfg.llm.provider not in ("http", "replay"):
        raise ConfigError("llm.provider", "must be 'http' or 'replay'")
    if cfg.llm.temperature < 0:
        raise ConfigError("llm.temperature", "must be >= 0")
    if cfg.llm.max_tokens < 1:
        raise ConfigError("llm.max_tokens", "must be >= 1")
    if cfg.llm.max_retries < 0:
        raise ConfigError("llm.max_retries", "must be >= 0")
    if cfg.llm.concurrency < 1:
        raise ConfigError("llm.concurrency", "must be >= 1")
    if cfg.pairing.strategy not in ("adjacent", "all", "window"):
        raise ConfigError("pairing.strategy", "must be adjacent, all, or window")
    if cfg.pairing.strategy == "window" and cfg.pairing.window < 1:
        raise ConfigError("pairing.window", "must be >= 1")
    if len(cfg.split.fractions) != 3:
        raise ConfigError("split.fractions", "expected three fractions")
    if any(f < 0 for f in cfg.split.fractions):
        raise ConfigError("split.fractions", "must be non-negative")
    if abs(sum(cfg.split.fractions) - 1.0) > 1e-9:
        raise ConfigError("split.fractions", "must sum to 1")
