"""Technology and storage parameters."""
from __future__ import annotations

import copy
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import yaml

TECHNOLOGIES = ("lignite", "hard_coal", "CCGT", "OCGT", "biomass",
                "run_of_river", "pv", "wind_onshore", "wind_offshore")
RENEWABLES = ("biomass", "run_of_river", "pv", "wind_onshore", "wind_offshore")
VARIABLE_RENEWABLES = ("pv", "wind_onshore", "wind_offshore")
STORAGES = ("li_ion", "pumped_hydro", "h2_longduration")


def annuity(interest: float, lifetime: float) -> float:
    if interest == 0:
        return 1.0 / lifetime
    return interest / (1.0 - (1.0 + interest) ** -lifetime)


@dataclass(frozen=True)
class TechnologyParams:
    name: str
    annualized_investment_eur_per_mw: float
    fixed_om_eur_per_mw: float
    variable_cost_eur_per_mwh: float
    max_capacity_mw: float = float("inf")
    availability: str | float = 1.0   # series name, or a scalar for dispatchables

    def __post_init__(self):
        for f in ("annualized_investment_eur_per_mw", "fixed_om_eur_per_mw", "variable_cost_eur_per_mwh",
                  "max_capacity_mw"):
            if getattr(self, f) < 0:
                raise ValueError(f"{self.name}: {f} must be >= 0")
        if not isinstance(self.availability, str) and not 0 <= self.availability <= 1:
            raise ValueError(f"{self.name}: availability must lie in [0, 1]")

    @property
    def renewable(self) -> bool:
        return self.name in RENEWABLES

    @property
    def fixed_cost_eur_per_mw(self) -> float:
        return self.annualized_investment_eur_per_mw + self.fixed_om_eur_per_mw


@dataclass(frozen=True)
class StorageParams:
    """For ``h2_longduration`` charge power is the electrolyser, discharge
    power the hydrogen turbine and energy the hydrogen store."""
    name: str
    charge_power_eur_per_mw: float
    discharge_power_eur_per_mw: float
    energy_eur_per_mwh: float
    charge_efficiency: float
    discharge_efficiency: float
    max_power_mw: float = float("inf")
    max_energy_mwh: float = float("inf")

    def __post_init__(self):
        for f in ("charge_power_eur_per_mw", "discharge_power_eur_per_mw", "energy_eur_per_mwh",
                  "max_power_mw", "max_energy_mwh"):
            if getattr(self, f) < 0:
                raise ValueError(f"{self.name}: {f} must be >= 0")
        for f in ("charge_efficiency", "discharge_efficiency"):
            if not 0 < getattr(self, f) <= 1:
                raise ValueError(f"{self.name}: {f} must lie in (0, 1]")

    @property
    def round_trip_efficiency(self) -> float:
        return self.charge_efficiency * self.discharge_efficiency


@dataclass(frozen=True)
class HydrogenParams:
    annual_demand_mwh_h2: float
    electrolysis_efficiency: float
    electrolysis_eur_per_mw: float     # annualised
    store_eur_per_mwh: float           # annualised


@dataclass(frozen=True)
class PowerParams:
    technologies: dict[str, TechnologyParams]
    storages: dict[str, StorageParams]
    hydrogen: HydrogenParams
    v2g_cost_eur_per_mwh: float = 15.0


def variable_cost(fuel: float, efficiency: float, emission: float, co2_price: float, other: float) -> float:
    """EUR/MWh electric from fuel price, CO2 intensity and efficiency."""
    if efficiency <= 0:
        raise ValueError("efficiency must be positive")
    return (fuel + emission * co2_price) / efficiency + other


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def default_params_dict() -> dict:
    text = resources.files("evshare.data").joinpath("default_params.yaml").read_text()
    return yaml.safe_load(text)


def params_from_dict(d: Mapping) -> PowerParams:
    i = float(d.get("interest_rate", 0.04))
    co2 = float(d.get("co2_price_eur_per_t", 130.0))
    techs = {}
    for name, t in d["technologies"].items():
        if name not in TECHNOLOGIES:
            raise ValueError(f"unknown technology {name!r}")
        a = annuity(i, t["lifetime_a"])
        var = 0.0
        if "variable_cost_eur_per_mwh" in t:
            var = float(t["variable_cost_eur_per_mwh"])
        elif "efficiency" in t:
            var = variable_cost(t.get("fuel_eur_per_mwh_th", 0.0), t["efficiency"],
                                t.get("emission_t_per_mwh_th", 0.0), co2, t.get("other_variable_eur_per_mwh", 0.0))
        techs[name] = TechnologyParams(
            name, t["overnight_eur_per_kw"] * 1000 * a, t.get("fixed_om_eur_per_kw", 0.0) * 1000, var,
            float(t.get("max_capacity_mw", float("inf"))), t.get("availability", 1.0))
    stores = {}
    for name, s in d["storages"].items():
        if name not in STORAGES:
            raise ValueError(f"unknown storage {name!r}")
        a = annuity(i, s["lifetime_a"])
        stores[name] = StorageParams(
            name, s["charge_power_eur_per_kw"] * 1000 * a, s["discharge_power_eur_per_kw"] * 1000 * a,
            s["energy_eur_per_kwh"] * 1000 * a, s["charge_efficiency"], s["discharge_efficiency"],
            float(s.get("max_power_mw", float("inf"))), float(s.get("max_energy_mwh", float("inf"))))
    h = d["hydrogen"]
    ah = annuity(i, h["lifetime_a"])
    hyd = HydrogenParams(float(h["annual_demand_mwh_h2"]), float(h["electrolysis_efficiency"]),
                         h["electrolysis_eur_per_kw"] * 1000 * ah, h["store_eur_per_kwh"] * 1000 * ah)
    if not 0 < hyd.electrolysis_efficiency <= 1:
        raise ValueError("electrolysis efficiency must lie in (0, 1]")
    return PowerParams(techs, stores, hyd, float(d.get("ev", {}).get("v2g_cost_eur_per_mwh", 15.0)))


def load_params(path: str | Path | None = None, overrides: Mapping | None = None) -> PowerParams:
    """Defaults, optionally merged with a YAML file and then ``overrides``."""
    d = default_params_dict()
    if path is not None:
        d = _merge(d, yaml.safe_load(Path(path).read_text()) or {})
    if overrides:
        d = _merge(d, overrides)
    return params_from_dict(d)
