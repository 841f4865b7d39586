"""Hourly exogenous inputs: base load, heat-pump load and renewable
availability.

The shipped series are synthetic stand-ins generated from fixed formulas and
a fixed seed; every series can be replaced by a delimited text file with one
column per series name.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..synth import default_temperature

HOURS_PER_YEAR = 8760
FIXTURE_SEED = 2030


@dataclass
class HourlyInputs:
    base_load: np.ndarray            # MWh per hour
    heat_pump_load: np.ndarray       # MWh per hour
    availability: dict[str, np.ndarray] = field(default_factory=dict)   # [0, 1]
    temperature: np.ndarray | None = None

    @property
    def hours(self) -> int:
        return len(self.base_load)

    def check(self):
        n = self.hours
        for name, s in [("base_load", self.base_load), ("heat_pump_load", self.heat_pump_load),
                        *self.availability.items()]:
            if len(s) != n:
                raise ValueError(f"series {name!r} has {len(s)} hours, expected {n}")
            if not np.all(np.isfinite(s)) or np.any(s < 0):
                raise ValueError(f"series {name!r} has negative or non-finite values")
        for name, s in self.availability.items():
            if np.any(s > 1):
                raise ValueError(f"availability {name!r} exceeds 1")

    def window(self, start: int, hours: int) -> "HourlyInputs":
        sl = slice(start, start + hours)
        if start < 0 or start + hours > self.hours:
            raise ValueError(f"window {start}+{hours} outside {self.hours} hours")
        return HourlyInputs(self.base_load[sl].copy(), self.heat_pump_load[sl].copy(),
                            {k: v[sl].copy() for k, v in self.availability.items()},
                            None if self.temperature is None else self.temperature[sl].copy())


def _scale_to(shape: np.ndarray, annual_mwh: float) -> np.ndarray:
    return shape * (annual_mwh / shape.sum())


def base_load_shape(hours: int = HOURS_PER_YEAR) -> np.ndarray:
    h = np.arange(hours)
    day = h // 24
    hod = h % 24
    seasonal = 1.0 + 0.12 * np.cos(2 * np.pi * (day - 15) / 365)
    daily = 1.0 + 0.15 * np.sin(np.pi * np.clip(hod - 6, 0, 16) / 16) - 0.08 * (hod < 6)
    weekend = np.where(day % 7 >= 5, 0.88, 1.0)
    return seasonal * daily * weekend


def heat_pump_shape(temperature: np.ndarray, heating_limit_c: float = 16.0, hot_water: float = 0.15) -> np.ndarray:
    """Heating degree hours plus a flat hot-water share."""
    hdh = np.maximum(heating_limit_c - temperature, 0.0)
    return hdh / hdh.mean() + hot_water


def _ar1(rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
    e = rng.standard_normal(n) * np.sqrt(1 - phi**2)
    x = np.empty(n)
    x[0] = rng.standard_normal()
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    return x


def renewable_availability(hours: int = HOURS_PER_YEAR, seed: int = FIXTURE_SEED) -> dict[str, np.ndarray]:
    """Synthetic capacity factors (annual means roughly: PV 0.11, onshore
    0.24, offshore 0.40, run-of-river 0.55)."""
    rng = np.random.default_rng(seed)
    h = np.arange(hours)
    doy = h / 24.0
    hod = h % 24
    # solar elevation proxy at 51 N
    decl = 23.44 * np.sin(2 * np.pi * (doy - 80) / 365)
    lat = np.radians(51.0)
    ha = np.radians(15 * (hod + 0.5 - 12.5))
    sin_el = np.sin(lat) * np.sin(np.radians(decl)) + np.cos(lat) * np.cos(np.radians(decl)) * np.cos(ha)
    clouds = 1 / (1 + np.exp(-1.2 * _ar1(rng, hours, 0.97) - 0.6))
    pv = np.clip(0.85 * np.maximum(sin_el, 0) * clouds, 0, 1)
    latent = _ar1(rng, hours, 0.985)
    season = 0.35 * np.cos(2 * np.pi * (doy - 15) / 365)
    onshore = 1 / (1 + np.exp(-(1.4 * latent + season - 1.25)))
    off_latent = 0.8 * latent + 0.6 * _ar1(rng, hours, 0.985)
    offshore = 1 / (1 + np.exp(-(1.4 * off_latent + season - 0.45)))
    ror = 0.55 + 0.15 * np.cos(2 * np.pi * (doy - 120) / 365) + 0.03 * _ar1(rng, hours, 0.999)
    return {
        "pv": pv,
        "wind_onshore": np.clip(onshore, 0, 1),
        "wind_offshore": np.clip(offshore, 0, 1),
        "run_of_river": np.clip(ror, 0, 1),
    }


def default_inputs(base_twh: float = 480.0, heat_pump_twh: float = 52.0,
                   seed: int = FIXTURE_SEED) -> HourlyInputs:
    """Full synthetic year."""
    temp = default_temperature(HOURS_PER_YEAR)
    return HourlyInputs(_scale_to(base_load_shape(), base_twh * 1e6),
                        _scale_to(heat_pump_shape(temp), heat_pump_twh * 1e6),
                        renewable_availability(seed=seed), temp)


def write_inputs(inp: HourlyInputs, path: str | Path):
    cols = {"base_load": inp.base_load, "heat_pump_load": inp.heat_pump_load, **inp.availability}
    if inp.temperature is not None:
        cols["temperature"] = inp.temperature
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["hour", *cols])
        for t in range(inp.hours):
            w.writerow([t, *(repr(float(v[t])) for v in cols.values())])


def read_inputs(path: str | Path) -> HourlyInputs:
    """Inverse of :func:`write_inputs`; ``hour`` column optional."""
    with open(path, newline="") as fh:
        sample = fh.readline()
        fh.seek(0)
        delim = ";" if sample.count(";") > sample.count(",") else ","
        rows = list(csv.reader(fh, delimiter=delim))
    head, body = rows[0], rows[1:]
    for need in ("base_load", "heat_pump_load"):
        if need not in head:
            raise ValueError(f"{path}: missing column {need!r}")
    try:
        data = np.array([[float(x) for x in r] for r in body if r])
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric value ({exc})") from None
    cols = {name: data[:, j] for j, name in enumerate(head) if name != "hour"}
    temp = cols.pop("temperature", None)
    inp = HourlyInputs(cols.pop("base_load"), cols.pop("heat_pump_load"), cols, temp)
    inp.check()
    return inp
