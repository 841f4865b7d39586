"""Solve a power model and turn the solution into reports and KPIs."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from ..lp import LpSolution, SolverError, solve
from .model import PowerModel
from .params import VARIABLE_RENEWABLES
from .timeseries import HOURS_PER_YEAR


class ModelInfeasibleError(RuntimeError):
    def __init__(self, message, solution: LpSolution):
        super().__init__(message)
        self.solution = solution


@dataclass
class SolutionReport:
    status: str
    hours: int
    objective_eur: float                       # over the horizon
    capacity_mw: dict[str, float]
    generation_mwh: dict[str, float]           # over the horizon
    curtailment_mwh: dict[str, float]
    storage: dict[str, dict[str, float]]
    renewable_share: float
    renewable_floor: float
    balance_residual_max: float
    hourly: pd.DataFrame
    hydrogen: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def annual_cost_eur(self) -> float:
        return self.objective_eur * HOURS_PER_YEAR / self.hours

    def summary(self) -> dict:
        return {
            "status": self.status, "hours": self.hours, "objective_eur": self.objective_eur,
            "annual_cost_eur": self.annual_cost_eur, "renewable_share": self.renewable_share,
            "renewable_floor": self.renewable_floor, "balance_residual_max_mwh": self.balance_residual_max,
            "capacity_mw": self.capacity_mw, "generation_mwh": self.generation_mwh,
            "curtailment_mwh": self.curtailment_mwh, "storage": self.storage, "hydrogen": self.hydrogen,
            "meta": self.meta,
        }

    def write(self, directory: str | Path):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "summary.json").write_text(json.dumps(_jsonable(self.summary()), indent=2, sort_keys=True) + "\n")
        self.hourly.to_csv(d / "hourly.csv", index_label="hour", float_format="%.9g", lineterminator="\n")
        rows = [{"technology": k, "capacity_mw": self.capacity_mw[k], "generation_mwh": self.generation_mwh[k],
                 "curtailment_mwh": self.curtailment_mwh[k]} for k in self.capacity_mw]
        pd.DataFrame(rows).to_csv(d / "technologies.csv", index=False, float_format="%.9g", lineterminator="\n")
        srows = [{"storage": k, **v} for k, v in self.storage.items()]
        pd.DataFrame(srows).to_csv(d / "storages.csv", index=False, float_format="%.9g", lineterminator="\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return None if not math.isfinite(v) else v
    if isinstance(x, np.integer):
        return int(x)
    return x


def load_report(directory: str | Path) -> SolutionReport:
    """Inverse of :meth:`SolutionReport.write`."""
    d = Path(directory)
    s = json.loads((d / "summary.json").read_text())
    hourly = pd.read_csv(d / "hourly.csv", index_col="hour")
    hourly.index.name = None
    return SolutionReport(s["status"], s["hours"], s["objective_eur"], s["capacity_mw"], s["generation_mwh"],
                          s["curtailment_mwh"], s["storage"], s["renewable_share"], s["renewable_floor"],
                          s["balance_residual_max_mwh"], hourly, s.get("hydrogen", {}), s.get("meta", {}))


def solve_model(model: PowerModel, method: str = "highs", tol: float = 1e-9) -> tuple[SolutionReport, LpSolution]:
    """Solve and extract. Infeasible or unbounded models raise
    :class:`ModelInfeasibleError` carrying the solver status."""
    sol = solve(model.lp, method=method, tol=tol)
    if not sol.optimal:
        raise ModelInfeasibleError(f"model {model.lp.name} is {sol.status}: {sol.message}", sol)
    return extract_report(model, sol), sol


def extract_report(model: PowerModel, sol: LpSolution) -> SolutionReport:
    x = sol.x
    cols = model.cols
    T = model.hours
    hourly: dict[str, np.ndarray] = {}
    cap, gen, curt = {}, {}, {}
    techs = [k.split(":", 1)[1] for k in cols if k.startswith("cap:")]
    for tn in techs:
        c = float(x[cols[f"cap:{tn}"][0]])
        g = x[cols[f"gen:{tn}"]]
        cap[tn], gen[tn] = c, float(g.sum())
        curt[tn] = float(np.maximum(c * model.availability[tn] - g, 0).sum()) if tn in model.renewables else 0.0
        hourly[f"gen_{tn}"] = g
    storage = {}
    for sn in [k.split(":", 1)[1] for k in cols if k.startswith("sto_e:")]:
        ch, dis = x[cols[f"sto_ch:{sn}"]], x[cols[f"sto_dis:{sn}"]]
        storage[sn] = {"charge_mw": float(x[cols[f"sto_pin:{sn}"][0]]),
                       "discharge_mw": float(x[cols[f"sto_pout:{sn}"][0]]),
                       "energy_mwh": float(x[cols[f"sto_e:{sn}"][0]]),
                       "charged_mwh": float(ch.sum()), "discharged_mwh": float(dis.sum())}
        hourly[f"sto_ch_{sn}"] = ch
        hourly[f"sto_dis_{sn}"] = dis
        hourly[f"sto_lvl_{sn}"] = x[cols[f"sto_lvl:{sn}"]]
    hydrogen = {}
    el = np.zeros(T)
    if "h2_el" in cols:
        el = x[cols["h2_el"]]
        hydrogen = {"electrolysis_mw": float(x[cols["h2_elcap"][0]]), "store_mwh": float(x[cols["h2_store"][0]]),
                    "electricity_mwh": float(el.sum())}
    groups = sorted({p.group for p in model.profiles})
    ev_ch, ev_dis, ev_soc = np.zeros(T), np.zeros(T), np.zeros(T)
    by_group = {g: [np.zeros(T), np.zeros(T), np.zeros(T)] for g in groups}
    for p in model.profiles:
        if f"ev_ch:{p.profile_id}" in cols:
            c, d, s = (x[cols[f"ev_{k}:{p.profile_id}"]] for k in ("ch", "dis", "soc"))
        else:
            c, d, s = p.weight / 1000.0 * np.asarray(p.demand_kwh, float), np.zeros(T), np.full(T, np.nan)
        for acc, v in zip(by_group[p.group], (c, d, s)):
            acc += v
        ev_ch += c
        ev_dis += d
        ev_soc += s
    hourly["base_load"] = model.exogenous["base_load"]
    hourly["heat_pump_load"] = model.exogenous["heat_pump_load"]
    hourly["ev_charge"] = ev_ch
    hourly["ev_discharge"] = ev_dis
    hourly["ev_soc"] = ev_soc
    for g, (c, d, s) in by_group.items():
        hourly[f"ev_charge_{g}"] = c
        hourly[f"ev_discharge_{g}"] = d
        hourly[f"ev_soc_{g}"] = s
    hourly["electrolysis"] = el
    vre = sum((cap[tn] * model.availability[tn] for tn in techs if tn in VARIABLE_RENEWABLES), np.zeros(T))
    hourly["vre_potential"] = vre
    hourly["residual_load"] = model.exogenous["base_load"] + model.exogenous["heat_pump_load"] - vre
    hourly["price"] = sol.y_eq[model.balance_rows] if sol.y_eq is not None else np.full(T, np.nan)

    lp = model.lp
    resid = lp.A_eq[model.balance_rows] @ x - lp.b_eq[model.balance_rows]
    total_gen = sum(gen.values())
    ren = sum(gen[tn] for tn in model.renewables)
    if model.config.share_basis == "generation":
        denom = total_gen
    else:
        denom = float((model.exogenous["base_load"] + model.exogenous["heat_pump_load"]
                       + model.exogenous["ev_uncontrolled"]).sum()) + float((ev_ch - ev_dis).sum() if
                                                                            model.config.strategy != "uncontrolled"
                                                                            else 0.0) + float(el.sum())
    share = ren / denom if denom > 0 else float("nan")
    meta = {"strategy": model.config.strategy, "hydrogen": model.config.hydrogen, "share_basis": model.config.share_basis,
            "cars": float(sum(p.weight for p in model.profiles)),
            "cars_by_group": {g: float(sum(p.weight for p in model.profiles if p.group == g)) for g in groups},
            "profiles": len(model.profiles), "solver_iterations": sol.iterations}
    return SolutionReport("optimal", T, float(sol.objective), cap, gen, curt, storage, share,
                          model.config.renewable_floor, float(np.abs(resid).max(initial=0.0)),
                          pd.DataFrame(hourly), hydrogen, meta)


@dataclass
class KpiReport:
    delta_cost_eur_per_a: float
    substituted_cars: float
    delta_cost_per_car_eur_per_a: float | None
    reference_cost_eur_per_a: float
    scenario_cost_eur_per_a: float
    renewable_share: dict[str, float]
    capacity_delta_mw: dict[str, float]
    generation_delta_mwh_per_a: dict[str, float]
    storage_delta: dict[str, dict[str, float]]
    hourly: pd.DataFrame

    def summary(self) -> dict:
        return _jsonable({
            "delta_cost_eur_per_a": self.delta_cost_eur_per_a, "substituted_cars": self.substituted_cars,
            "delta_cost_per_car_eur_per_a": self.delta_cost_per_car_eur_per_a,
            "per_car_note": None if self.delta_cost_per_car_eur_per_a is not None else
            "undefined: no substituted cars",
            "reference_cost_eur_per_a": self.reference_cost_eur_per_a,
            "scenario_cost_eur_per_a": self.scenario_cost_eur_per_a,
            "renewable_share": self.renewable_share, "capacity_delta_mw": self.capacity_delta_mw,
            "generation_delta_mwh_per_a": self.generation_delta_mwh_per_a, "storage_delta": self.storage_delta,
        })


def compute_kpis(scenario: SolutionReport, reference: SolutionReport, substituted_cars: float) -> KpiReport:
    """Scenario minus reference, annualised by 8760/T."""
    if scenario.hours != reference.hours:
        raise ValueError(f"horizons differ: scenario {scenario.hours} h, reference {reference.hours} h")
    ann = HOURS_PER_YEAR / scenario.hours
    d = scenario.annual_cost_eur - reference.annual_cost_eur
    per_car = d / substituted_cars if substituted_cars > 0 else None
    keys = sorted(set(scenario.capacity_mw) | set(reference.capacity_mw))
    cap = {k: scenario.capacity_mw.get(k, 0.0) - reference.capacity_mw.get(k, 0.0) for k in keys}
    gen = {k: (scenario.generation_mwh.get(k, 0.0) - reference.generation_mwh.get(k, 0.0)) * ann for k in keys}
    sto = {}
    for k in sorted(set(scenario.storage) | set(reference.storage)):
        a, b = scenario.storage.get(k, {}), reference.storage.get(k, {})
        sto[k] = {f: a.get(f, 0.0) - b.get(f, 0.0) for f in ("charge_mw", "discharge_mw", "energy_mwh")}
    cols = ["residual_load", "ev_charge", "ev_discharge", "ev_soc", "price"]
    hourly = pd.concat([reference.hourly[cols].add_prefix("reference_"),
                        scenario.hourly[cols].add_prefix("scenario_")], axis=1)
    for c in scenario.hourly.columns:
        if c.startswith(("ev_charge_", "ev_discharge_", "ev_soc_")):
            hourly[f"scenario_{c}"] = scenario.hourly[c]
    return KpiReport(d, float(substituted_cars), per_car, reference.annual_cost_eur, scenario.annual_cost_eur,
                     {"reference": reference.renewable_share, "scenario": scenario.renewable_share},
                     cap, gen, sto, hourly)


__all__ = ["KpiReport", "ModelInfeasibleError", "SolutionReport", "SolverError", "compute_kpis",
           "extract_report", "load_report", "solve_model"]
