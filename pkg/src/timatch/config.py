"""Run configuration with strict key checking."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from timatch.dataset import load_schema, validate_schema
from timatch.errors import TimError
from timatch.pipeline import PipelineOptions

DEFAULT_SEED = 2025


class ConfigError(TimError):
    pass


@dataclass
class RunConfig:
    input: Optional[str] = None
    schema: Optional[Union[dict, str]] = None
    bins_per_column: dict = field(default_factory=dict)
    normalize: bool = True
    reuse_controls: bool = True
    weight_by_treated: bool = False
    weight_l1_by_inverse_score: bool = False
    l1_bins_per_column: dict = field(default_factory=dict)
    importance_method: str = "regression"
    ridge: float = 1e-6
    irls_tol: float = 1e-8
    irls_max_iter: int = 100
    seed: int = DEFAULT_SEED
    threads: int = 1
    output_dir: str = "tim_out"
    scenario: Optional[str] = None
    replicates: int = 100
    n: Optional[int] = None
    treatment_effect: float = 1.0
    confounding: float = 1.0

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {unknown}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def validate(self) -> None:
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        for name in ("bins_per_column", "l1_bins_per_column"):
            for col, b in getattr(self, name).items():
                if int(b) < 2:
                    raise ConfigError(f"{name}[{col!r}] must be >= 2")

    def resolved_schema(self) -> dict:
        if self.schema is None:
            raise ConfigError("no schema given (config key 'schema' or --schema)")
        if isinstance(self.schema, str):
            return load_schema(self.schema)
        validate_schema(self.schema)
        return dict(self.schema)

    def pipeline_options(self) -> PipelineOptions:
        return PipelineOptions(
            bins_per_column=dict(self.bins_per_column),
            normalize=self.normalize,
            reuse_controls=self.reuse_controls,
            weight_by_treated=self.weight_by_treated,
            weight_l1_by_inverse_score=self.weight_l1_by_inverse_score,
            l1_bins_per_column=dict(self.l1_bins_per_column),
            importance_method=self.importance_method,
            ridge=self.ridge,
            irls_tol=self.irls_tol,
            irls_max_iter=self.irls_max_iter,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
