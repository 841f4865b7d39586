"""Synthetic BEV time series at 5-minute resolution.

Four series are built in order: mobility schedule, driving consumption, grid
availability and (for fixed charging rules) grid demand. Hourly model inputs
come from :func:`resample_hourly`.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .diaries import N_BLOCKS, BLOCK_MIN
from .mobility import (DESTINATIONS, DistributionSet, EmptyCellError, distance_value,
                       duration_value)

log = logging.getLogger(__name__)

SLOT_H = BLOCK_MIN / 60
RHO_AIR = 1.225
GRAVITY = 9.81
MAX_SPEED_KMH = 150.0
SHARED_RATING_KW = 75.0
SHARED_TURNAROUND_SLOTS = 3     # 15 min between two bookings of a shared car
BASE_DATE = dt.datetime(2030, 1, 1)

DAY_TYPE_OF_WEEKDAY = ("weekday",) * 5 + ("saturday", "sunday")


class SamplingError(RuntimeError):
    pass


class InfeasibleScheduleError(RuntimeError):
    pass


@dataclass
class VehicleParams:
    """ID.3-like defaults. Resistance and auxiliary values are placeholders."""
    battery_kwh: float = 58.0
    mass_kg: float = 1900.0
    drag_coefficient: float = 0.267
    frontal_area_m2: float = 2.36
    rolling_resistance: float = 0.009
    drivetrain_efficiency: float = 0.85
    aux_base_kw: float = 0.3
    heating_kw_per_k: float = 0.12     # below comfort_low_c
    cooling_kw_per_k: float = 0.08     # above comfort_high_c
    comfort_low_c: float = 18.0
    comfort_high_c: float = 24.0
    charge_efficiency: float = 0.9
    discharge_efficiency: float = 0.9

    def __post_init__(self):
        if not self.battery_kwh > 0:
            raise ValueError("battery_kwh must be positive")
        for name in ("drivetrain_efficiency", "charge_efficiency", "discharge_efficiency"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")

    def auxiliary_kw(self, temp_c: float) -> float:
        return (self.aux_base_kw
                + self.heating_kw_per_k * max(0.0, self.comfort_low_c - temp_c)
                + self.cooling_kw_per_k * max(0.0, temp_c - self.comfort_high_c))

    def traction_kw(self, speed_kmh: float) -> float:
        v = speed_kmh / 3.6
        aero = 0.5 * RHO_AIR * self.drag_coefficient * self.frontal_area_m2 * v ** 3
        roll = self.mass_kg * GRAVITY * self.rolling_resistance * v
        return (aero + roll) / self.drivetrain_efficiency / 1000.0


@dataclass(frozen=True)
class Trip:
    start: int          # slot index over the horizon
    n_slots: int
    distance_km: float
    destination: str
    origin: str

    @property
    def end(self) -> int:
        return self.start + self.n_slots


@dataclass
class MobilitySchedule:
    horizon_slots: int
    trips: list[Trip]
    ownership: str = "private"
    start_location: str = "home"

    def parking(self) -> list[tuple[int, int, str]]:
        """(start, end, location) of every parked interval, in time order."""
        out, t, loc = [], 0, self.start_location
        for tr in self.trips:
            if tr.start > t:
                out.append((t, tr.start, loc))
            t, loc = tr.end, tr.destination
        if t < self.horizon_slots:
            out.append((t, self.horizon_slots, loc))
        return out

    def driving_mask(self) -> np.ndarray:
        m = np.zeros(self.horizon_slots, dtype=bool)
        for tr in self.trips:
            m[tr.start:tr.end] = True
        return m


def _draw(rng: np.random.Generator, p: np.ndarray) -> int:
    c = np.cumsum(p, axis=None)
    return int(min(np.searchsorted(c, rng.random() * c[-1], side="right"), c.size - 1))


def _draw_trip(rng, ds: DistributionSet, total: int, rank: int, dest: str | None = None):
    if dest is None:
        dest = DESTINATIONS[_draw(rng, ds.destination(total, rank))]
    dep = _draw(rng, ds.departure(dest, total, rank))
    cell = _draw(rng, ds.dur_dist(dest, total))
    db, kb = divmod(cell, ds.dur_dist(dest, total).shape[1])
    return dest, dep, duration_value(db) // BLOCK_MIN, distance_value(kb)


def _sample_private_day(rng, ds: DistributionSet, n: int, budget: int):
    trips, prev_arr, draws = [], 0, 0
    for rank in range(1, n + 1):
        while True:
            draws += 1
            if draws > budget:
                return None
            dest, dep, k, dist = _draw_trip(rng, ds, n, rank)
            if dep >= prev_arr and dep + k <= N_BLOCKS:
                break
        trips.append((dep, k, dist, dest))
        prev_arr = dep + k
    if trips and trips[-1][3] != "home":
        while True:
            draws += 1
            if draws > budget:
                return None
            _, dep, k, dist = _draw_trip(rng, ds, n, n, dest="home")
            dep = max(dep, prev_arr)
            if dep + k <= N_BLOCKS:
                break
        trips.append((dep, k, dist, "home"))
    return trips


def _sample_shared_day(rng, ds: DistributionSet, n: int, budget: int):
    """All ``n`` bookings are drawn up front. A booking that starts while the
    car is still out waits until it is back plus a turnaround; only bookings
    pushed past midnight are redrawn."""
    trips = [_draw_trip(rng, ds, n, r) for r in range(1, n + 1)]
    draws = n
    while True:
        trips.sort(key=lambda t: (t[1], t[2]))
        placed, bad = [], None
        free = 0
        for idx, (dest, dep, k, dist) in enumerate(trips):
            dep = max(dep, free)
            if dep + k > N_BLOCKS:
                bad = idx
                break
            placed.append((dep, k, dist, dest))
            free = dep + k + SHARED_TURNAROUND_SLOTS
        if bad is None:
            return placed
        draws += 1
        if draws > budget:
            return None
        trips[bad] = _draw_trip(rng, ds, n, bad + 1)


def day_types(horizon_days: int, start: dt.datetime = BASE_DATE) -> list[str]:
    return [DAY_TYPE_OF_WEEKDAY[(start + dt.timedelta(days=d)).weekday()] for d in range(horizon_days)]


def sample_mobility(dists: DistributionSet | Mapping[str, DistributionSet], horizon_days: int,
                    seed: int | np.random.Generator, start: dt.datetime = BASE_DATE,
                    draw_budget: int = 1000, day_retries: int = 100) -> MobilitySchedule:
    """Draw a multi-day trip schedule.

    ``dists`` is one DistributionSet for every day or a mapping day type ->
    DistributionSet. Private days start and end at home; shared vehicles keep
    their location across days.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(dists, DistributionSet):
        dists = {d: dists for d in ("weekday", "saturday", "sunday")}
    ownership = next(iter(dists.values())).ownership
    trips: list[Trip] = []
    loc = "home"
    for day, dtype in enumerate(day_types(horizon_days, start)):
        ds = dists[dtype]
        if ds.empty:
            raise EmptyCellError(f"sampling from empty cell {ds.cell}")
        for _ in range(day_retries):
            n = _draw(rng, ds.p_ntrips)
            sampler = _sample_private_day if ownership == "private" else _sample_shared_day
            day_trips = sampler(rng, ds, n, draw_budget) if n else []
            if day_trips is not None:
                break
        else:
            raise SamplingError(f"cell {ds.cell}: {day_retries} days in a row exhausted the draw budget")
        base = day * N_BLOCKS
        for dep, k, dist, dest in day_trips:
            trips.append(Trip(base + dep, k, dist, dest, loc))
            loc = dest
    return MobilitySchedule(horizon_days * N_BLOCKS, trips, ownership)


# -- consumption -----------------------------------------------------------

def default_temperature(hours: int = 8760, start_hour: int = 0) -> np.ndarray:
    """Sinusoidal annual profile: -2 C winter mean, 19 C summer mean, 3 K
    daily swing peaking mid-afternoon."""
    h = np.arange(start_hour, start_hour + hours, dtype=float)
    day = h / 24.0
    seasonal = 8.5 - 10.5 * np.cos(2 * np.pi * (day - 15) / 365.0)
    daily = 3.0 * np.cos(2 * np.pi * (h % 24 - 15) / 24.0)
    return seasonal + daily


def trip_energy_kwh(distance_km: float, n_slots: int, vp: VehicleParams, temp_c: float) -> float:
    if distance_km <= 0 or n_slots <= 0:
        return 0.0
    hours = n_slots * SLOT_H
    speed = distance_km / hours
    if speed > MAX_SPEED_KMH:
        log.warning("trip speed %.0f km/h clamped to %.0f km/h", speed, MAX_SPEED_KMH)
        speed = MAX_SPEED_KMH
        hours = distance_km / speed
    return (vp.traction_kw(speed) + vp.auxiliary_kw(temp_c)) * hours


def driving_consumption(sched: MobilitySchedule, vp: VehicleParams, temperature: np.ndarray,
                        scale: float = 1.0) -> np.ndarray:
    """kWh drawn for driving in each 5-minute slot."""
    n_hours = math.ceil(sched.horizon_slots * SLOT_H)
    if len(temperature) < n_hours:
        raise ValueError(f"temperature covers {len(temperature)} h, horizon needs {n_hours} h")
    out = np.zeros(sched.horizon_slots)
    for tr in sched.trips:
        temp = float(temperature[int(tr.start * SLOT_H)])
        e = trip_energy_kwh(tr.distance_km, tr.n_slots, vp, temp) * scale
        out[tr.start:tr.end] += e / tr.n_slots
    return out


# -- availability ----------------------------------------------------------

DEFAULT_PRIVATE_AVAILABILITY = {
    "home": {"plug_probability": 0.9, "ratings_kw": {11.0: 1.0}},
    "work_school": {"plug_probability": 0.5, "ratings_kw": {11.0: 1.0}},
    "leisure": {"plug_probability": 0.2, "ratings_kw": {22.0: 1.0}},
    "errands": {"plug_probability": 0.2, "ratings_kw": {22.0: 1.0}},
}


@dataclass
class AvailabilitySeries:
    plugged: np.ndarray     # bool per slot
    rating_kw: np.ndarray   # per slot, 0 when unplugged


def grid_availability(sched: MobilitySchedule, config: Mapping | None, ownership: str,
                      seed: int | np.random.Generator) -> AvailabilitySeries:
    """Plug state and rating, drawn once per parked interval."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    plugged = np.zeros(sched.horizon_slots, dtype=bool)
    rating = np.zeros(sched.horizon_slots)
    if ownership == "shared":
        for s, e, _ in sched.parking():
            plugged[s:e] = True
            rating[s:e] = SHARED_RATING_KW
        return AvailabilitySeries(plugged, rating)
    config = DEFAULT_PRIVATE_AVAILABILITY if config is None else config
    missing = sorted({loc for _, _, loc in sched.parking()} - set(config))
    if missing:
        raise KeyError(f"availability config has no entry for destination(s) {', '.join(missing)}")
    for s, e, loc in sched.parking():
        c = config[loc]
        if rng.random() < c["plug_probability"]:
            opts = sorted((float(k), float(v)) for k, v in c["ratings_kw"].items())
            kw = opts[_draw(rng, np.array([v for _, v in opts]))][0]
            plugged[s:e] = True
            rating[s:e] = kw
    return AvailabilitySeries(plugged, rating)


# -- grid demand -----------------------------------------------------------

@dataclass
class DemandSeries:
    demand_kwh: np.ndarray      # grid draw per slot
    soc_kwh: np.ndarray         # state of charge at the end of each slot
    soc_start: float
    shortfalls: list[int] = field(default_factory=list)   # slot where a capped interval began


def _plugged_runs(plugged: np.ndarray) -> list[tuple[int, int]]:
    x = np.concatenate([[0], plugged.astype(np.int8), [0]])
    d = np.diff(x)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def _simulate(cons, avail, vp, strategy, soc0):
    n = len(cons)
    cap = vp.battery_kwh
    eta = vp.charge_efficiency
    demand = np.zeros(n)
    soc = np.zeros(n)
    shortfalls = []
    run_end = np.full(n, -1)
    for s, e in _plugged_runs(avail.plugged):
        run_end[s:e] = e
    level = soc0
    power = 0.0
    for t in range(n):
        if avail.plugged[t]:
            max_kwh = avail.rating_kw[t] * SLOT_H
            if strategy == "immediate":
                draw = min(max_kwh, (cap - level) / eta)
            else:
                if t == 0 or not avail.plugged[t - 1]:
                    left = (run_end[t] - t) * SLOT_H
                    need = (cap - level) / eta
                    power = min(need / left, avail.rating_kw[t])
                    if need > avail.rating_kw[t] * left + 1e-12:
                        # flag only if the next trip cannot be covered either
                        nxt = cons[run_end[t]:]
                        stop = np.flatnonzero(nxt == 0)
                        trip_need = nxt[:stop[0]].sum() if stop.size else nxt.sum()
                        if level + avail.rating_kw[t] * left * eta < trip_need - 1e-9:
                            shortfalls.append(t)
                draw = min(power * SLOT_H, (cap - level) / eta)
            draw = max(draw, 0.0)
            demand[t] = draw
            level += draw * eta
        level -= cons[t]
        if level < -1e-9:
            raise InfeasibleScheduleError(
                f"state of charge below zero at slot {t} (battery {cap} kWh too small for the trip)")
        level = min(max(level, 0.0), cap)
        soc[t] = level
    return demand, soc, shortfalls


def grid_demand(cons: np.ndarray, avail: AvailabilitySeries, vp: VehicleParams,
                strategy: str = "balanced", soc_start: float | None = None,
                cyclic: bool = False) -> DemandSeries:
    """Grid draw under a fixed charging rule.

    ``immediate`` charges at full rating until the battery is full;
    ``balanced`` spreads each plugged interval's deficit at constant power.
    With ``cyclic`` the start level is iterated to the end level so the
    series repeats without a jump (needed when it stands in for a
    periodic optimisation horizon).
    """
    if strategy not in ("immediate", "balanced"):
        raise ValueError(f"unknown charging strategy {strategy!r}")
    if len(cons) != len(avail.plugged):
        raise ValueError("consumption and availability series are not aligned")
    if np.any(avail.plugged & (cons > 0)):
        raise ValueError("vehicle is plugged while driving")
    soc0 = vp.battery_kwh if soc_start is None else soc_start
    demand, soc, short = _simulate(cons, avail, vp, strategy, soc0)
    if cyclic:
        for _ in range(20):
            if abs(soc[-1] - soc0) <= 1e-9:
                break
            soc0 = soc[-1]
            demand, soc, short = _simulate(cons, avail, vp, strategy, soc0)
        else:
            raise InfeasibleScheduleError("charging rule has no periodic state of charge")
    return DemandSeries(demand, soc, soc0, short)


def resample_hourly(series: np.ndarray, how: str = "sum") -> np.ndarray:
    """12 slots -> 1 hour; ``sum`` for energy, ``mean`` for power ratings."""
    series = np.asarray(series, dtype=float)
    per_h = round(1 / SLOT_H)
    if series.size % per_h:
        raise ValueError("series length is not a whole number of hours")
    blocks = series.reshape(-1, per_h)
    if how == "sum":
        return blocks.sum(axis=1)
    if how == "mean":
        return blocks.mean(axis=1)
    raise ValueError(how)


# -- vehicle profiles ------------------------------------------------------

@dataclass
class VehicleProfile:
    profile_id: str
    location_type: str
    cluster_id: int | None
    ownership: str
    params: VehicleParams
    consumption_kwh: np.ndarray
    plugged: np.ndarray
    rating_kw: np.ndarray
    demand_kwh: np.ndarray | None = None
    soc_start_kwh: float | None = None
    weight: float = 0.0

    @property
    def hourly_consumption(self) -> np.ndarray:
        return resample_hourly(self.consumption_kwh)

    @property
    def hourly_rating(self) -> np.ndarray:
        return resample_hourly(self.rating_kw, "mean")

    @property
    def hourly_demand(self) -> np.ndarray | None:
        return None if self.demand_kwh is None else resample_hourly(self.demand_kwh)


def profile_rng(master_seed: int, profile_id: str) -> np.random.Generator:
    """Independent stream per profile, stable under any generation order."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, zlib.crc32(profile_id.encode())]))


def make_profile(profile_id: str, dists: Mapping[str, DistributionSet], vp: VehicleParams,
                 temperature: np.ndarray, horizon_days: int, seed: int,
                 availability: Mapping | None = None, demand_strategy: str | None = "balanced",
                 consumption_scale: float = 1.0, attempts: int = 20,
                 start: dt.datetime = BASE_DATE) -> VehicleProfile:
    """Full series for one representative vehicle.

    A draw whose schedule empties the battery under immediate charging is
    discarded and redrawn (up to ``attempts`` times).
    """
    rng = profile_rng(seed, profile_id)
    wk = dists["weekday"]
    last = None
    for _ in range(attempts):
        sched = sample_mobility(dists, horizon_days, rng, start)
        cons = driving_consumption(sched, vp, temperature, consumption_scale)
        avail = grid_availability(sched, availability, wk.ownership, rng)
        try:
            grid_demand(cons, avail, vp, "immediate")
            dem = grid_demand(cons, avail, vp, demand_strategy, cyclic=True) if demand_strategy else None
        except InfeasibleScheduleError as exc:
            last = exc
            continue
        return VehicleProfile(profile_id, wk.location_type, wk.cluster_id, wk.ownership, vp, cons,
                              avail.plugged, avail.rating_kw,
                              None if dem is None else dem.demand_kwh,
                              None if dem is None else dem.soc_start)
    raise InfeasibleScheduleError(f"profile {profile_id}: no feasible draw in {attempts} attempts ({last})")


def write_profile(p: VehicleProfile, path: str | Path, start: dt.datetime = BASE_DATE):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["timestamp", "consumption_kwh", "plugged", "rating_kw"]
        if p.demand_kwh is not None:
            cols.append("demand_kwh")
        w.writerow(cols)
        for t in range(len(p.consumption_kwh)):
            ts = (start + dt.timedelta(minutes=BLOCK_MIN * t)).strftime("%Y-%m-%dT%H:%M")
            row = [ts, repr(float(p.consumption_kwh[t])), int(p.plugged[t]), repr(float(p.rating_kw[t]))]
            if p.demand_kwh is not None:
                row.append(repr(float(p.demand_kwh[t])))
            w.writerow(row)


def read_profile_series(path: str | Path) -> dict[str, np.ndarray]:
    cols: dict[str, list] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            for k, v in r.items():
                if k != "timestamp":
                    cols.setdefault(k, []).append(float(v))
    return {k: np.array(v) for k, v in cols.items()}
