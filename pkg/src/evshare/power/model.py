"""Hourly capacity expansion and dispatch LP with BEV coupling."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..lp import StandardFormLp
from .params import PowerParams
from .timeseries import HOURS_PER_YEAR, HourlyInputs

log = logging.getLogger(__name__)

STRATEGIES = ("uncontrolled", "smart", "bidirectional")
SHARE_BASES = ("generation", "final_demand")


class ModelInputError(ValueError):
    pass


class InfeasibleProfileError(ModelInputError):
    def __init__(self, profile_id: str, reason: str):
        super().__init__(f"profile {profile_id}: {reason}")
        self.profile_id = profile_id


@dataclass
class ProfileInput:
    """Hourly series of one representative vehicle; ``weight`` is the number
    of cars it stands for."""
    profile_id: str
    weight: float
    battery_kwh: float
    consumption_kwh: np.ndarray
    rating_kw: np.ndarray
    demand_kwh: np.ndarray | None = None
    charge_efficiency: float = 0.9
    discharge_efficiency: float = 0.9
    group: str = "private"


@dataclass
class ModelConfig:
    strategy: str = "smart"
    renewable_floor: float = 0.8
    share_basis: str = "final_demand"
    hydrogen: bool = False
    scale_fixed_costs: bool = True
    technologies: Sequence[str] | None = None   # None: all in params
    storages: Sequence[str] | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ModelInputError(f"unknown charging strategy {self.strategy!r}")
        if self.share_basis not in SHARE_BASES:
            raise ModelInputError(f"unknown renewable share basis {self.share_basis!r}")
        if not 0 <= self.renewable_floor <= 1:
            raise ModelInputError("renewable floor must lie in [0, 1]")


class _Builder:
    def __init__(self):
        self.names: list[str] = []
        self.lb: list[np.ndarray] = []
        self.ub: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.n = 0
        self.rows = {"eq": ([], [], [], [], []), "ub": ([], [], [], [], [])}   # r, c, v, rhs, names
        self.m = {"eq": 0, "ub": 0}

    def var(self, block: str, keys: Sequence, lb=0.0, ub=np.inf, cost=0.0) -> np.ndarray:
        k = len(keys)
        idx = np.arange(self.n, self.n + k)
        self.names.extend(f"{block}[{key}]" for key in keys)
        self.lb.append(np.broadcast_to(np.asarray(lb, float), (k,)).copy())
        self.ub.append(np.broadcast_to(np.asarray(ub, float), (k,)).copy())
        self.c.append(np.broadcast_to(np.asarray(cost, float), (k,)).copy())
        self.n += k
        return idx

    def rows_(self, kind: str, block: str, keys: Sequence, terms, rhs) -> np.ndarray:
        """``terms`` is a list of (local_row, col, coef) arrays (broadcast)."""
        k = len(keys)
        base = self.m[kind]
        R, C, V, B, N = self.rows[kind]
        for r, c, v in terms:
            r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, float))
            R.append(base + r.ravel())
            C.append(c.ravel())
            V.append(v.ravel())
        B.append(np.broadcast_to(np.asarray(rhs, float), (k,)).copy())
        N.extend(f"{block}[{key}]" for key in keys)
        self.m[kind] += k
        return np.arange(base, base + k)

    def build(self, name: str) -> StandardFormLp:
        def mat(kind):
            R, C, V, _, _ = self.rows[kind]
            if not R:
                return sp.csr_matrix((self.m[kind], self.n))
            return sp.csr_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))),
                                 shape=(self.m[kind], self.n))

        def cat(x):
            return np.concatenate(x) if x else np.zeros(0)

        return StandardFormLp(cat(self.c), mat("eq"), cat(self.rows["eq"][3]), mat("ub"), cat(self.rows["ub"][3]),
                              cat(self.lb), cat(self.ub), self.names, self.rows["eq"][4], self.rows["ub"][4], name)


@dataclass
class PowerModel:
    lp: StandardFormLp
    config: ModelConfig
    hours: int
    cols: dict[str, np.ndarray] = field(default_factory=dict)
    balance_rows: np.ndarray | None = None
    exogenous: dict[str, np.ndarray] = field(default_factory=dict)   # MWh per hour
    availability: dict[str, np.ndarray] = field(default_factory=dict)
    profiles: list[ProfileInput] = field(default_factory=list)
    renewables: tuple[str, ...] = ()
    fixed_scale: float = 1.0


def check_profile(p: ProfileInput, hours: int, strategy: str):
    """Reject profiles that cannot satisfy their driving needs under cyclic
    state of charge, before any LP is built."""
    for nm in ("consumption_kwh", "rating_kw"):
        if len(getattr(p, nm)) != hours:
            raise ModelInputError(f"profile {p.profile_id}: {nm} has {len(getattr(p, nm))} hours, expected {hours}")
    cons, rating = np.asarray(p.consumption_kwh, float), np.asarray(p.rating_kw, float)
    if np.any(cons < 0) or np.any(rating < 0):
        raise ModelInputError(f"profile {p.profile_id}: negative consumption or rating")
    if strategy == "uncontrolled":
        if p.demand_kwh is None or len(p.demand_kwh) != hours:
            raise ModelInputError(f"profile {p.profile_id}: uncontrolled charging needs a grid demand series "
                                  f"of {hours} hours")
        return
    need, avail = cons.sum(), p.charge_efficiency * rating.sum()
    if avail < need - 1e-9:
        raise InfeasibleProfileError(p.profile_id, f"can recharge at most {avail:.2f} kWh but drives "
                                                   f"{need:.2f} kWh over the horizon")
    if need > 0 and np.all(rating == 0):
        raise InfeasibleProfileError(p.profile_id, "never plugged in")
    # longest unplugged stretch, wrapping around the cyclic horizon
    if np.any(rating > 0):
        start = int(np.flatnonzero(rating > 0)[0])
        c2, r2 = np.roll(cons, -start), np.roll(rating, -start)
        run = 0.0
        for t in range(hours):
            if r2[t] > 0:
                run = max(0.0, c2[t] - p.charge_efficiency * r2[t])
            else:
                run += c2[t]
            if run > p.battery_kwh + 1e-9:
                raise InfeasibleProfileError(
                    p.profile_id, f"needs {run:.2f} kWh between charging opportunities, battery holds "
                                  f"{p.battery_kwh} kWh")


def build_model(cfg: ModelConfig, params: PowerParams, inputs: HourlyInputs,
                profiles: Sequence[ProfileInput] = (), name: str = "power") -> PowerModel:
    inputs.check()
    T = inputs.hours
    if T < 1 or T > HOURS_PER_YEAR:
        raise ModelInputError(f"horizon of {T} hours outside 1..{HOURS_PER_YEAR}")
    profiles = [p for p in profiles if p.weight > 0]
    for p in profiles:
        check_profile(p, T, cfg.strategy)
    scale = T / HOURS_PER_YEAR if cfg.scale_fixed_costs else 1.0
    hours = np.arange(T)
    prev = np.roll(hours, 1)
    tech_names = list(cfg.technologies) if cfg.technologies is not None else list(params.technologies)
    sto_names = list(cfg.storages) if cfg.storages is not None else list(params.storages)
    b = _Builder()
    cols: dict[str, np.ndarray] = {}
    balance: list[tuple] = []    # terms of the hourly balance (supply positive)
    avail_used: dict[str, np.ndarray] = {}

    for tn in tech_names:
        tp = params.technologies.get(tn)
        if tp is None:
            raise ModelInputError(f"no parameters for technology {tn!r}")
        if isinstance(tp.availability, str):
            if tp.availability not in inputs.availability:
                raise ModelInputError(f"technology {tn}: availability series {tp.availability!r} missing")
            af = inputs.availability[tp.availability]
        else:
            af = np.full(T, float(tp.availability))
        avail_used[tn] = af
        cap = b.var("cap", [tn], 0.0, tp.max_capacity_mw, tp.fixed_cost_eur_per_mw * scale)
        gen = b.var("gen", [f"{tn},{t}" for t in hours], 0.0, np.inf, tp.variable_cost_eur_per_mwh)
        cols[f"cap:{tn}"], cols[f"gen:{tn}"] = cap, gen
        # gen - af * cap <= 0
        b.rows_("ub", "avail", [f"{tn},{t}" for t in hours],
                [(hours, gen, 1.0), (hours, cap[0], -af)], 0.0)
        balance.append((gen, 1.0))

    for sn in sto_names:
        s = params.storages.get(sn)
        if s is None:
            raise ModelInputError(f"no parameters for storage {sn!r}")
        pin = b.var("sto_pin", [sn], 0.0, s.max_power_mw, s.charge_power_eur_per_mw * scale)
        pout = b.var("sto_pout", [sn], 0.0, s.max_power_mw, s.discharge_power_eur_per_mw * scale)
        ecap = b.var("sto_e", [sn], 0.0, s.max_energy_mwh, s.energy_eur_per_mwh * scale)
        ch = b.var("sto_ch", [f"{sn},{t}" for t in hours])
        dis = b.var("sto_dis", [f"{sn},{t}" for t in hours])
        lvl = b.var("sto_lvl", [f"{sn},{t}" for t in hours])
        cols.update({f"sto_pin:{sn}": pin, f"sto_pout:{sn}": pout, f"sto_e:{sn}": ecap,
                     f"sto_ch:{sn}": ch, f"sto_dis:{sn}": dis, f"sto_lvl:{sn}": lvl})
        keys = [f"{sn},{t}" for t in hours]
        b.rows_("ub", "sto_chcap", keys, [(hours, ch, 1.0), (hours, pin[0], -1.0)], 0.0)
        b.rows_("ub", "sto_discap", keys, [(hours, dis, 1.0), (hours, pout[0], -1.0)], 0.0)
        b.rows_("ub", "sto_ecap", keys, [(hours, lvl, 1.0), (hours, ecap[0], -1.0)], 0.0)
        lvl_terms = [(hours, lvl, 1.0), (hours, ch, -s.charge_efficiency), (hours, dis, 1.0 / s.discharge_efficiency)]
        if T > 1:
            lvl_terms.append((hours, lvl[prev], -1.0))
        else:
            lvl_terms[0] = (hours, lvl, 0.0)
        b.rows_("eq", "sto_lvl", keys, lvl_terms, 0.0)
        balance += [(dis, 1.0), (ch, -1.0)]

    el = None
    if cfg.hydrogen:
        h = params.hydrogen
        elcap = b.var("h2_elcap", ["industry"], 0.0, np.inf, h.electrolysis_eur_per_mw * scale)
        scap = b.var("h2_store", ["industry"], 0.0, np.inf, h.store_eur_per_mwh * scale)
        el = b.var("h2_el", [str(t) for t in hours])
        h2l = b.var("h2_lvl", [str(t) for t in hours])
        cols.update({"h2_elcap": elcap, "h2_store": scap, "h2_el": el, "h2_lvl": h2l})
        keys = [str(t) for t in hours]
        b.rows_("ub", "h2_elcap", keys, [(hours, el, 1.0), (hours, elcap[0], -1.0)], 0.0)
        b.rows_("ub", "h2_storecap", keys, [(hours, h2l, 1.0), (hours, scap[0], -1.0)], 0.0)
        d = h.annual_demand_mwh_h2 / HOURS_PER_YEAR
        terms = [(hours, h2l, 1.0 if T > 1 else 0.0), (hours, el, -h.electrolysis_efficiency)]
        if T > 1:
            terms.append((hours, h2l[prev], -1.0))
        b.rows_("eq", "h2_lvl", keys, terms, -d)
        balance.append((el, -1.0))

    exo_ev = np.zeros(T)
    ev_ch_all, ev_dis_all = [], []
    for p in profiles:
        w = p.weight / 1000.0     # kWh per car -> MWh for the group
        if cfg.strategy == "uncontrolled":
            exo_ev += w * np.asarray(p.demand_kwh, float)
            continue
        keys = [f"{p.profile_id},{t}" for t in hours]
        rating = np.asarray(p.rating_kw, float) * w
        ch = b.var("ev_ch", keys, 0.0, rating)
        dis_ub = rating if cfg.strategy == "bidirectional" else 0.0
        dis = b.var("ev_dis", keys, 0.0, dis_ub, params.v2g_cost_eur_per_mwh)
        soc = b.var("ev_soc", keys, 0.0, p.battery_kwh * w)
        cols.update({f"ev_ch:{p.profile_id}": ch, f"ev_dis:{p.profile_id}": dis, f"ev_soc:{p.profile_id}": soc})
        terms = [(hours, soc, 1.0 if T > 1 else 0.0), (hours, ch, -p.charge_efficiency),
                 (hours, dis, 1.0 / p.discharge_efficiency)]
        if T > 1:
            terms.append((hours, soc[prev], -1.0))
        b.rows_("eq", "ev_soc", keys, terms, -w * np.asarray(p.consumption_kwh, float))
        balance += [(dis, 1.0), (ch, -1.0)]
        ev_ch_all.append(ch)
        ev_dis_all.append(dis)

    exo = {"base_load": np.asarray(inputs.base_load, float), "heat_pump_load": np.asarray(inputs.heat_pump_load, float),
           "ev_uncontrolled": exo_ev}
    load = exo["base_load"] + exo["heat_pump_load"] + exo_ev
    bal_rows = b.rows_("eq", "balance", [str(t) for t in hours], [(hours, c, v) for c, v in balance], load)

    renew = tuple(tn for tn in tech_names if params.technologies[tn].renewable)
    f = cfg.renewable_floor
    if f > 0:
        terms = []
        if cfg.share_basis == "generation":
            # f * sum(all gen) - sum(renewable gen) <= 0
            for tn in tech_names:
                terms.append((0, cols[f"gen:{tn}"], f - 1.0 if tn in renew else f))
            rhs = 0.0
        else:
            for tn in renew:
                terms.append((0, cols[f"gen:{tn}"], -1.0))
            for c_ in ev_ch_all:
                terms.append((0, c_, f))
            for c_ in ev_dis_all:
                terms.append((0, c_, -f))
            if el is not None:
                terms.append((0, el, f))
            rhs = -f * float(load.sum())
        b.rows_("ub", "res_share", ["total"], terms, rhs)

    lp = b.build(name)
    log.info("model %s: %d columns, %d equalities, %d inequalities, %d nonzeros", name, lp.n_vars,
             len(lp.b_eq), len(lp.b_ub), lp.A_eq.nnz + lp.A_ub.nnz)
    return PowerModel(lp, cfg, T, cols, bal_rows, exo, avail_used, list(profiles), renew, scale)
