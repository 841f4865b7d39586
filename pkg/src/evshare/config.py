"""Scenario configuration (YAML)."""
from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .diaries import LOCATIONS


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SyntheticDiaries(_Strict):
    person_days: dict[str, int] = Field(default_factory=lambda: {"metropolis": 500, "small_city": 500})
    archetype_weights: Optional[dict[str, float]] = None
    day_type_weights: Optional[dict[str, float]] = None


class DiariesCfg(_Strict):
    source: Literal["synthetic", "file"] = "synthetic"
    path: Optional[Path] = None
    column_mapping: Optional[Path] = None
    synthetic: SyntheticDiaries = Field(default_factory=SyntheticDiaries)

    @model_validator(mode="after")
    def _path(self):
        if self.source == "file" and self.path is None:
            raise ValueError("diaries.path is required when diaries.source is 'file'")
        return self


class ClusteringCfg(_Strict):
    k: int = Field(6, ge=1)
    max_per_stratum: int = Field(2000, ge=2)
    exclude_clusters: list[int] = Field(default_factory=lambda: [1, 2])
    memory_limit_gb: float = Field(2.0, gt=0)


class DistributionsCfg(_Strict):
    n_max: int = Field(48, ge=1)


class SynthCfg(_Strict):
    private_per_cell: int = Field(5, ge=1)
    shared_per_cell: int = Field(5, ge=1)
    battery_kwh: dict[str, float] = Field(default_factory=lambda: {"private": 58.0, "shared": 100.0,
                                                                   "long_range": 100.0})
    # private cars in these clusters get the long_range battery (default: the shared size)
    long_range_clusters: list[int] = Field(default_factory=lambda: [1])
    availability: Optional[dict[str, Any]] = None
    shared_consumption_scale: float = Field(1.0, gt=0)
    # fixed rule behind the exogenous series used for uncontrolled charging
    uncontrolled_rule: Literal["immediate", "balanced"] = "immediate"
    draw_budget: int = Field(1000, ge=1)

    @field_validator("battery_kwh")
    @classmethod
    def _battery(cls, v):
        for k in ("private", "shared"):
            if v.get(k, 0) <= 0:
                raise ValueError(f"battery_kwh.{k} must be positive")
        return v


class FleetCfg(_Strict):
    total_bevs: float = Field(15_000_000, gt=0)
    # location -> cluster -> share; None: built-in fixture shares
    cell_shares: Optional[dict[str, dict[int, float]]] = None
    # uptake regime -> list of "location/cluster"; None: built-in mapping
    uptake_cells: Optional[dict[str, list[str]]] = None
    uptake: Literal["none", "low", "high"] = "high"
    framework: Literal["shared_only", "shared_plus_other"] = "shared_plus_other"
    substitution_rate: float = Field(5.0, gt=0)


class PowerCfg(_Strict):
    strategy: Literal["uncontrolled", "smart", "bidirectional"] = "smart"
    renewable_floor: float = Field(0.8, ge=0, le=1)
    share_basis: Literal["generation", "final_demand"] = "final_demand"
    hydrogen: bool = False
    params_file: Optional[Path] = None
    param_overrides: dict[str, Any] = Field(default_factory=dict)
    inputs_file: Optional[Path] = None
    base_load_twh: float = Field(480.0, ge=0)
    heat_pump_twh: float = Field(52.0, ge=0)
    weather_seed: int = 2030
    solver: Literal["highs", "embedded"] = "highs"


class StagesCfg(_Strict):
    ingest: bool = True
    cluster: bool = True
    distributions: bool = True
    synth: bool = True
    solve: bool = True
    compare: bool = True


class ScenarioConfig(_Strict):
    seed: int = 42
    horizon_hours: int = Field(168, ge=24, le=8760)
    start_hour: int = Field(0, ge=0)
    jobs: int = Field(1, ge=1)
    out: Path = Path("run")
    stages: StagesCfg = Field(default_factory=StagesCfg)
    diaries: DiariesCfg = Field(default_factory=DiariesCfg)
    clustering: ClusteringCfg = Field(default_factory=ClusteringCfg)
    distributions: DistributionsCfg = Field(default_factory=DistributionsCfg)
    synth: SynthCfg = Field(default_factory=SynthCfg)
    fleet: FleetCfg = Field(default_factory=FleetCfg)
    power: PowerCfg = Field(default_factory=PowerCfg)
    # demo/study: solve every strategy x uptake combination
    study_strategies: list[Literal["uncontrolled", "smart", "bidirectional"]] = Field(default_factory=list)
    study_uptakes: list[Literal["none", "low", "high"]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self):
        if self.horizon_hours % 24:
            raise ValueError("horizon_hours must be a whole number of days")
        if self.start_hour % 24:
            raise ValueError("start_hour must fall on midnight")
        if self.start_hour + self.horizon_hours > 8760:
            raise ValueError("start_hour + horizon_hours exceeds one year")
        for loc in self.diaries.synthetic.person_days:
            if loc not in LOCATIONS:
                raise ValueError(f"unknown location type {loc!r}")
        return self


def _resolve(cfg: ScenarioConfig, base: Path) -> ScenarioConfig:
    """Relative paths in a config file are relative to that file."""
    def fix(p):
        return p if p is None or p.is_absolute() else (base / p)
    cfg.diaries.path = fix(cfg.diaries.path)
    cfg.diaries.column_mapping = fix(cfg.diaries.column_mapping)
    cfg.power.params_file = fix(cfg.power.params_file)
    cfg.power.inputs_file = fix(cfg.power.inputs_file)
    return cfg


def config_from_dict(d: dict | None, base: Path | None = None) -> ScenarioConfig:
    try:
        cfg = ScenarioConfig.model_validate(d or {})
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(str(x) for x in e['loc'])}: {e['msg']}" for e in exc.errors())
        raise ConfigError(f"invalid configuration: {msgs}") from None
    return _resolve(cfg, base) if base is not None else cfg


def load_config(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return config_from_dict({})
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        d = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: not valid YAML ({exc})") from None
    if d is not None and not isinstance(d, dict):
        raise ConfigError(f"{p}: top level must be a mapping")
    return config_from_dict(d, p.parent)


def demo_config_text() -> str:
    return resources.files("evshare.data").joinpath("demo.yaml").read_text()


def demo_config() -> ScenarioConfig:
    return config_from_dict(yaml.safe_load(demo_config_text()))


def snapshot(cfg: ScenarioConfig) -> str:
    """YAML of the effective configuration. The output directory is left
    out so that identical runs in different places write identical files."""
    d = cfg.model_dump(mode="json")
    d.pop("out", None)
    return yaml.safe_dump(d, sort_keys=True)
