"""
Scenario files: ``key = value`` lines describing one synthetic ensemble

See docs/CONFIG_SCHEMA.md for the keys. Unknown keys, duplicates and
invalid values raise ConfigError naming the key and its line.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from gfa.errors import ConfigError
from gfa.synthesis.generators import (
    gen_aggregate,
    gen_factor_model,
    gen_idiosyncratic,
    gen_pd_stationary,
    gen_separable_field,
    loading_matrix,
)
from gfa.synthesis.specs import LineSpec, LoadingSpec, NoiseSpec, SpaceSpec, TimeSpec, parse_call

logger = logging.getLogger(__name__)

REQUIRED_KEYS = {
    "aggregate": ("N", "M", "loadings"),
    "idiosyncratic": ("N", "M", "noise"),
    "factor_model": ("N", "M", "loadings"),
    "pd_stationary": ("N", "M"),
    "field": ("N", "T", "time"),
}


def _split(value: str) -> list:
    return [part.strip() for part in value.split(";") if part.strip()]


class ScenarioConfig(BaseModel):
    """Validated scenario description"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    scenario: Literal["aggregate", "idiosyncratic", "factor_model", "pd_stationary", "field"]
    name: Optional[str] = None
    N: Optional[int] = Field(default=None, ge=1)
    M: Optional[int] = Field(default=None, ge=1)
    T: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    loadings: Tuple[LoadingSpec, ...] = ()
    noise: Optional[NoiseSpec] = None
    lines: Tuple[LineSpec, ...] = ()
    space: Optional[Tuple[float, float]] = None
    space_factors: Optional[Tuple[float, ...]] = None
    time: Optional[TimeSpec] = None

    @field_validator("loadings", mode="before")
    @classmethod
    def _parse_loadings(cls, value):
        return tuple(LoadingSpec.parse(s) for s in _split(value)) if isinstance(value, str) else value

    @field_validator("noise", mode="before")
    @classmethod
    def _parse_noise(cls, value):
        return NoiseSpec.parse(value) if isinstance(value, str) else value

    @field_validator("lines", mode="before")
    @classmethod
    def _parse_lines(cls, value):
        return tuple(LineSpec.parse(s) for s in _split(value)) if isinstance(value, str) else value

    @field_validator("space", mode="before")
    @classmethod
    def _parse_space(cls, value):
        if not isinstance(value, str):
            return value
        name, args = parse_call(value)
        if name != "exchangeable" or len(args) != 2:
            raise ValueError("space must be exchangeable(sigma2, rho)")
        return tuple(args)

    @field_validator("space_factors", mode="before")
    @classmethod
    def _parse_factors(cls, value):
        return tuple(float(v) for v in value.split(",")) if isinstance(value, str) else value

    @field_validator("time", mode="before")
    @classmethod
    def _parse_time(cls, value):
        return TimeSpec.parse(value) if isinstance(value, str) else value

    @model_validator(mode="after")
    def _check_required(self):
        for key in REQUIRED_KEYS[self.scenario]:
            if not getattr(self, key):
                raise ValueError(f"key '{key}' is required for scenario '{self.scenario}'")
        if self.scenario == "field" and self.space is None and not (self.loadings or self.noise):
            raise ValueError("field scenario needs 'space' or 'loadings'/'noise'")
        return self

    def space_spec(self) -> SpaceSpec:
        if self.space is not None:
            return SpaceSpec.exchangeable(*self.space)
        return SpaceSpec(loadings=self.loadings, noise=self.noise, factor_values=self.space_factors)


def parse_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """Parse a scenario file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file {path} not found")
    return parse_scenario_text(path.read_text())


def parse_scenario_text(text: str) -> ScenarioConfig:
    """
    Parse scenario text

    Raises:
        ConfigError: with the offending key and line
    """
    entries: Dict[str, str] = {}
    where: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("missing key before '='", line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {where[key]})", key=key, line=lineno)
        entries[key] = value
        where[key] = lineno

    try:
        return ScenarioConfig(**entries)
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else None
        message = "unknown key" if err["type"] == "extra_forbidden" else err["msg"].replace("Value error, ", "")
        raise ConfigError(message, key=key, line=where.get(key))


@dataclass
class SynthResult:
    """Generated data plus the ground truth retained by the generator"""
    data: np.ndarray
    kind: str
    truth: Dict[str, Any] = field(default_factory=dict)


def run_scenario(cfg: ScenarioConfig, seed: int = None) -> SynthResult:
    """Generate the ensemble or field a scenario describes"""
    seed = cfg.seed if seed is None else seed
    logger.info("Generating scenario '%s' (%s) with seed %d", cfg.name or cfg.scenario, cfg.scenario, seed)
    if cfg.scenario == "aggregate":
        ensemble, x = gen_aggregate(cfg.loadings, cfg.N, cfg.M, seed)
        truth = {"loadings": loading_matrix(cfg.loadings, cfg.N), "factors": x}
        return SynthResult(np.array(ensemble.data), "replicates", truth)
    if cfg.scenario == "idiosyncratic":
        ensemble = gen_idiosyncratic(cfg.noise, cfg.N, cfg.M, seed)
        return SynthResult(np.array(ensemble.data), "replicates", {"noise": str(cfg.noise)})
    if cfg.scenario == "factor_model":
        ensemble, truth = gen_factor_model(cfg.loadings, cfg.noise, cfg.N, cfg.M, seed)
        truth = {"loadings": truth["loadings"], "factors": truth["factors"]}
        return SynthResult(np.array(ensemble.data), "replicates", truth)
    if cfg.scenario == "pd_stationary":
        ensemble, truth = gen_pd_stationary(cfg.lines, cfg.N, cfg.M, seed)
        data = np.array(ensemble.data)
        if cfg.noise is not None:
            data += gen_idiosyncratic(cfg.noise, cfg.N, cfg.M, seed).data
        return SynthResult(data, "timeseries", truth)

    fld = gen_separable_field(cfg.space_spec(), cfg.time, cfg.N, cfg.T, seed)
    truth = {key: fld.truth[key] for key in ("loadings", "z", "v", "u")}
    return SynthResult(np.array(fld.data), "field", truth)
