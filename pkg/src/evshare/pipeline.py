"""Staged pipeline from diaries to power-sector KPIs.

Every stage writes into its own directory of the run and seals it with a
``stage.json`` holding a key (hash of the stage's configuration and the
content of its inputs) and a hash per output file. A stage whose key and
outputs still match is skipped.

Run directory layout (version 1)::

    config.yaml            configuration snapshot
    run.json               layout version, stage keys, result index
    diaries/               trips.csv, rejected_rows.csv, removal_report.csv
    clusters/              labels.csv, cluster_stats.csv, sequences.csv,
                           dendrogram_<loc>.csv, sequence_index_<loc>.csv,
                           distances_<loc>.lvdm
    distributions/         one JSON file per cell and ownership
    profiles/              manifest.csv, one 5-minute CSV per vehicle
    inputs/                hourly_inputs.csv
    solve/<case>/<role>/   summary.json, hourly.csv, technologies.csv,
                           storages.csv, weights.csv
    compare/<case>/<uptake>/  kpis.json, cost_table.csv, capacity_delta.csv,
                           generation_delta.csv, dispatch_<window>.csv,
                           ev_soc.csv
    study/cost_table.csv   (demo/study runs) one row per case and uptake
"""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import shutil
import time
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import clustering as cl
from . import diaries as di
from . import mobility as mb
from . import synth as sy
from .config import ConfigError, ScenarioConfig, snapshot
from .power import fleet as fl
from .power.model import ModelConfig, ModelInputError, ProfileInput, build_model
from .power.params import default_params_dict, _merge, params_from_dict
from .power.report import (KpiReport, ModelInfeasibleError, SolutionReport, compute_kpis,
                           load_report, solve_model)
from .power.timeseries import HOURS_PER_YEAR, default_inputs, read_inputs, write_inputs

log = logging.getLogger(__name__)

LAYOUT_VERSION = 1
USER_ERRORS = (ConfigError, FileNotFoundError, di.SchemaError, ModelInputError, ModelInfeasibleError,
               mb.EmptyCellError, cl.MemoryLimitError, LookupError, sy.InfeasibleScheduleError)


class StageError(RuntimeError):
    def __init__(self, stage: str, path: Path, cause: BaseException):
        super().__init__(f"stage {stage!r} failed ({path}): {cause}")
        self.stage, self.path, self.cause = stage, path, cause

    @property
    def user_error(self) -> bool:
        return isinstance(self.cause, USER_ERRORS)


def file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_hash(d: Path) -> str:
    """Hash of the sealed outputs of a stage directory."""
    meta = json.loads((d / "stage.json").read_text())
    return hashlib.sha256(json.dumps(meta["outputs"], sort_keys=True).encode()).hexdigest()


def _key(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()


def _outputs(d: Path) -> dict[str, str]:
    return {p.relative_to(d).as_posix(): file_hash(p) for p in sorted(d.rglob("*"))
            if p.is_file() and p.name != "stage.json"}


def _is_cached(d: Path, key: str) -> bool:
    meta_path = d / "stage.json"
    if not meta_path.exists():
        return False
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError:
        return False
    if meta.get("key") != key:
        return False
    return meta.get("outputs") == _outputs(d)


def _seal(d: Path, name: str, key: str):
    meta = {"stage": name, "key": key, "layout_version": LAYOUT_VERSION, "outputs": _outputs(d)}
    (d / "stage.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


# -- per-profile worker (module level so it pickles) ------------------------

def _synth_one(job: dict) -> dict:
    dists = {k: mb.load(v) for k, v in job["dists"].items()}
    vp = sy.VehicleParams(battery_kwh=job["battery_kwh"])
    start = sy.BASE_DATE + dt.timedelta(hours=job["start_hour"])
    temp = sy.default_temperature(job["hours"], job["start_hour"])
    prof = sy.make_profile(job["profile_id"], dists, vp, temp, job["hours"] // 24, job["seed"],
                           availability=job["availability"], demand_strategy=job["rule"],
                           consumption_scale=job["scale"], start=start)
    sy.write_profile(prof, job["path"], start)
    return prof.profile_id


@dataclass
class CaseResult:
    strategy: str
    uptake: str
    hydrogen: bool
    reference_dir: Path
    scenario_dir: Path
    compare_dir: Path | None
    kpis: dict = field(default_factory=dict)


class Pipeline:
    def __init__(self, cfg: ScenarioConfig, out: str | Path | None = None):
        self.cfg = cfg
        self.out = Path(out if out is not None else cfg.out)
        self.keys: dict[str, str] = {}
        self.hits: dict[str, bool] = {}

    # -- machinery --

    def _stage(self, name: str, rel: str, payload: dict, fn, toggle: str | None = None) -> Path:
        d = self.out / rel
        key = _key({"stage": name, "version": __version__, "layout": LAYOUT_VERSION, **payload})
        self.keys[rel] = key
        if _is_cached(d, key):
            log.info("stage %s: cache hit (%s)", name, d)
            self.hits[rel] = True
            return d
        if toggle and not getattr(self.cfg.stages, toggle):
            raise StageError(name, d, ConfigError(f"stage {toggle!r} is disabled and {d} holds no valid output"))
        self.hits[rel] = False
        if d.exists():
            shutil.rmtree(d)
        d.mkdir(parents=True)
        t0 = time.perf_counter()
        try:
            fn(d)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, d, exc) from exc
        _seal(d, name, key)
        log.info("stage %s: done in %.1f s (%s)", name, time.perf_counter() - t0, d)
        return d

    def fleet_spec(self, uptake: str | None = None) -> fl.FleetSpec:
        f = self.cfg.fleet
        kw = {}
        if f.cell_shares is not None:
            kw["cell_shares"] = fl.cell_shares_from_mapping(f.cell_shares)
        if f.uptake_cells is not None:
            cells = {u: fl.cells_from_list(v) for u, v in f.uptake_cells.items()}
            cells.setdefault("none", set())
            kw["uptake_cells"] = cells
        try:
            return fl.FleetSpec(total_bevs=f.total_bevs, uptake=uptake or f.uptake, framework=f.framework,
                                strategy=self.cfg.power.strategy, substitution_rate=f.substitution_rate, **kw)
        except ValueError as exc:
            raise ConfigError(f"fleet: {exc}") from None

    def params_dict(self) -> dict:
        d = default_params_dict()
        if self.cfg.power.params_file is not None:
            p = self.cfg.power.params_file
            if not p.exists():
                raise ConfigError(f"parameter file not found: {p}")
            d = _merge(d, yaml.safe_load(p.read_text()) or {})
        return _merge(d, self.cfg.power.param_overrides)

    # -- stages --

    def ingest(self) -> Path:
        c = self.cfg.diaries
        payload = {"diaries": c.model_dump(mode="json"), "seed": self.cfg.seed}
        if c.source == "file":
            if not c.path.exists():
                raise StageError("ingest", c.path, FileNotFoundError(f"diary file not found: {c.path}"))
            payload["input_hash"] = file_hash(c.path)
            if c.column_mapping is not None:
                payload["mapping_hash"] = file_hash(c.column_mapping)

        def run(d: Path):
            rejects = []
            if c.source == "file":
                mapping = di.load_column_mapping(c.column_mapping) if c.column_mapping else None
                trips, rejects = di.read_diaries(c.path, mapping)
            else:
                s = c.synthetic
                kw = {k: v for k, v in (("archetype_weights", s.archetype_weights),
                                         ("day_type_weights", s.day_type_weights)) if v is not None}
                trips = di.generate_synthetic_diaries(di.SyntheticDiaryConfig(dict(s.person_days), **kw),
                                                      self.cfg.seed)
            report = Counter()
            kept = di.filter_trips(trips, report)
            if not kept:
                raise ConfigError("no trips left after filtering")
            di.write_trips(kept, d / "trips.csv")
            _write_csv(d / "rejected_rows.csv", ["row", "reason"], [(r.row, r.reason) for r in rejects])
            di.write_removal_report(report, d / "removal_report.csv")

        return self._stage("ingest", "diaries", payload, run, "ingest")

    def _trips(self, d: Path) -> list[di.TripRecord]:
        trips, _ = di.read_diaries(d / "trips.csv")
        return trips

    def cluster(self) -> Path:
        dd = self.ingest()
        c = self.cfg.clustering
        payload = {"trips": tree_hash(dd), "clustering": c.model_dump(mode="json"), "seed": self.cfg.seed}

        def run(d: Path):
            trips = self._trips(dd)
            seqs = di.build_sequences(trips)
            di.write_sequences(seqs, d / "sequences.csv")
            weekday = [s for s in seqs if s.day_type == "weekday"]
            sample = cl.subsample(weekday, c.max_per_stratum, self.cfg.seed)
            labels_rows, stats_rows = [], []
            by_loc = defaultdict(list)
            for s in sample:
                by_loc[s.location_type].append(s)
            for loc in sorted(by_loc):
                ls = by_loc[loc]
                if len(ls) < c.k:
                    raise ConfigError(f"{loc}: {len(ls)} weekday sequences, fewer than k={c.k}")
                dm = cl.distance_matrix(ls, memory_limit=int(c.memory_limit_gb * 1024**3))
                cl.write_distance_matrix(dm, d / f"distances_{loc}.lvdm")
                dg = cl.hac_ward(dm)
                dist = cl.daily_distance(ls, trips)
                labels = cl.cut_dendrogram(dg, c.k, order_by=dist)
                _write_csv(d / f"dendrogram_{loc}.csv", ["cluster_a", "cluster_b", "height", "size"],
                           [(a, b, repr(float(h)), s) for a, b, h, s in dg.merges])
                order = sorted(range(len(ls)), key=lambda i: (labels[i], ls[i].person_day_id))
                _write_csv(d / f"sequence_index_{loc}.csv", ["person_day_id", "cluster", "blocks"],
                           [(ls[i].person_day_id, labels[i], ls[i].as_string()) for i in order])
                labels_rows += [(s.person_day_id, loc, lab) for s, lab in zip(ls, labels)]
                for st in cl.cluster_stats(labels, ls, trips, loc, range(1, c.k + 1)):
                    stats_rows.append((loc, st.cluster_id, st.n_sequences, _fmt(st.mean_daily_distance_km),
                                       _fmt(st.mean_trip_distance_km), _fmt(st.mean_trip_duration_min),
                                       _fmt(st.mean_trips_per_day)))
            _write_csv(d / "labels.csv", ["person_day_id", "location_type", "cluster"], labels_rows)
            _write_csv(d / "cluster_stats.csv", ["location_type", "cluster", "n_sequences", "mean_daily_distance_km",
                                                 "mean_trip_distance_km", "mean_trip_duration_min",
                                                 "mean_trips_per_day"], stats_rows)

        return self._stage("cluster", "clusters", payload, run, "cluster")

    def distributions(self) -> Path:
        dd = self.ingest()
        cd = self.cluster()
        spec = self.fleet_spec()
        payload = {"trips": tree_hash(dd), "clusters": tree_hash(cd),
                   "n_max": self.cfg.distributions.n_max, "exclude": sorted(self.cfg.clustering.exclude_clusters),
                   "cells": sorted((l, c, s) for (l, c), s in spec.cell_shares.items()),
                   "total": spec.total_bevs, "rate": spec.substitution_rate}

        def run(d: Path):
            trips = self._trips(dd)
            cluster_of = {}
            with open(cd / "labels.csv", newline="") as fh:
                for r in csv.DictReader(fh):
                    cluster_of[r["person_day_id"]] = int(r["cluster"])
            private = mb.estimate_distributions(trips, cluster_of, self.cfg.distributions.n_max,
                                                self.cfg.clustering.exclude_clusters)
            for ds in private.values():
                mb.save(ds, d)
            loc_cars = defaultdict(float)
            for (loc, c), s in spec.cell_shares.items():
                loc_cars[loc] += spec.total_bevs * s
            for (loc, c), s in sorted(spec.cell_shares.items()):
                if s <= 0:
                    continue
                key = (loc, c, "weekday")
                if key not in private or private[key].empty:
                    raise mb.EmptyCellError(f"no weekday diaries for fleet cell {loc}/cluster {c}")
                mb.save(mb.derive_shared_distributions(private[key], mb.SubstitutionSpec(
                    spec.total_bevs * s, spec.substitution_rate)), d)
            for loc in sorted(loc_cars):
                for day in ("saturday", "sunday"):
                    key = (loc, None, day)
                    if key not in private or private[key].empty:
                        raise mb.EmptyCellError(f"no {day} diaries for location {loc}")
                    mb.save(mb.derive_shared_distributions(private[key], mb.SubstitutionSpec(
                        loc_cars[loc], spec.substitution_rate)), d)

        return self._stage("distributions", "distributions", payload, run, "distributions")

    def synth(self) -> Path:
        dd = self.distributions()
        spec = self.fleet_spec()
        s = self.cfg.synth
        shared_cells = sorted(set().union(*spec.uptake_cells.values())) if spec.uptake_cells else []
        fleet_cells = sorted(c for c, v in spec.cell_shares.items() if v > 0)
        payload = {"distributions": tree_hash(dd), "synth": s.model_dump(mode="json"), "seed": self.cfg.seed,
                   "hours": self.cfg.horizon_hours, "start": self.cfg.start_hour,
                   "fleet_cells": fleet_cells, "shared_cells": shared_cells}

        def run(d: Path):
            jobs, manifest = [], []
            for own, cells, n in (("private", fleet_cells, s.private_per_cell),
                                  ("shared", shared_cells, s.shared_per_cell)):
                for loc, c in cells:
                    battery = s.battery_kwh[own]
                    if own == "private" and c in s.long_range_clusters:
                        battery = s.battery_kwh.get("long_range", s.battery_kwh["shared"])
                    files = {"weekday": dd / f"{own}_{loc}_c{c}_weekday.json",
                             "saturday": dd / f"{own}_{loc}_all_saturday.json",
                             "sunday": dd / f"{own}_{loc}_all_sunday.json"}
                    for f in files.values():
                        if not f.exists():
                            raise mb.EmptyCellError(f"missing distribution file {f.name}")
                    for i in range(n):
                        pid = f"{loc}_c{c}_{own}_{i:02d}"
                        jobs.append({"profile_id": pid, "dists": {k: str(v) for k, v in files.items()},
                                     "battery_kwh": battery, "start_hour": self.cfg.start_hour,
                                     "hours": self.cfg.horizon_hours, "seed": self.cfg.seed,
                                     "availability": s.availability, "rule": s.uncontrolled_rule,
                                     "scale": s.shared_consumption_scale if own == "shared" else 1.0,
                                     "path": str(d / f"{pid}.csv")})
                        manifest.append((pid, loc, c, own, battery, 0.9, 0.9, f"{pid}.csv"))
            if self.cfg.jobs > 1:
                with ProcessPoolExecutor(self.cfg.jobs) as ex:
                    list(ex.map(_synth_one, jobs))
            else:
                for j in jobs:
                    _synth_one(j)
            _write_csv(d / "manifest.csv", ["profile_id", "location_type", "cluster_id", "ownership", "battery_kwh",
                                            "charge_efficiency", "discharge_efficiency", "file"], manifest)

        return self._stage("synth", "profiles", payload, run, "synth")

    def inputs(self) -> Path:
        p = self.cfg.power
        payload = {"hours": self.cfg.horizon_hours, "start": self.cfg.start_hour, "base": p.base_load_twh,
                   "hp": p.heat_pump_twh, "weather_seed": p.weather_seed,
                   "file": file_hash(p.inputs_file) if p.inputs_file else None}
        if p.inputs_file is not None and not p.inputs_file.exists():
            raise StageError("inputs", p.inputs_file, FileNotFoundError(f"inputs file not found: {p.inputs_file}"))

        def run(d: Path):
            if p.inputs_file is not None:
                inp = read_inputs(p.inputs_file)
                if inp.hours == HOURS_PER_YEAR and self.cfg.horizon_hours != HOURS_PER_YEAR:
                    inp = inp.window(self.cfg.start_hour, self.cfg.horizon_hours)
                elif inp.hours != self.cfg.horizon_hours:
                    raise ModelInputError(f"inputs file has {inp.hours} hours, horizon is {self.cfg.horizon_hours}")
            else:
                inp = default_inputs(p.base_load_twh, p.heat_pump_twh, p.weather_seed)
                inp = inp.window(self.cfg.start_hour, self.cfg.horizon_hours)
            write_inputs(inp, d / "hourly_inputs.csv")

        return self._stage("inputs", "inputs", payload, run, "solve")

    def solve_case(self, strategy: str, uptake: str, role: str, hydrogen: bool) -> Path:
        pd_ = self.synth()
        idir = self.inputs()
        spec = self.fleet_spec(uptake)
        pc = self.cfg.power
        tag = "all" if role == "reference" and spec.framework == "shared_plus_other" else uptake
        rel = f"solve/{strategy}{'-h2' if hydrogen else ''}/{role}-{tag}"
        params = self.params_dict()
        payload = {"profiles": tree_hash(pd_), "inputs": tree_hash(idir), "params": params,
                   "fleet": self.cfg.fleet.model_dump(mode="json") | {"uptake": uptake}, "role": role,
                   "strategy": strategy, "hydrogen": hydrogen, "floor": pc.renewable_floor,
                   "basis": pc.share_basis, "solver": pc.solver}
        if role == "reference" and spec.framework == "shared_plus_other":
            payload["fleet"]["uptake"] = None

        def run(d: Path):
            manifest = list(csv.DictReader(open(pd_ / "manifest.csv", newline="")))
            entries = [fl.ProfileEntry(r["profile_id"], r["location_type"], int(r["cluster_id"]), r["ownership"])
                       for r in manifest]
            weights = fl.fleet_allocation(spec, entries, role)
            profiles = []
            for r in manifest:
                w = weights[r["profile_id"]]
                if w <= 0:
                    continue
                ser = sy.read_profile_series(pd_ / r["file"])
                profiles.append(ProfileInput(
                    r["profile_id"], w, float(r["battery_kwh"]), sy.resample_hourly(ser["consumption_kwh"]),
                    sy.resample_hourly(ser["rating_kw"], "mean"), sy.resample_hourly(ser["demand_kwh"]),
                    float(r["charge_efficiency"]), float(r["discharge_efficiency"]), r["ownership"]))
            inp = read_inputs(idir / "hourly_inputs.csv")
            mcfg = ModelConfig(strategy=strategy, renewable_floor=pc.renewable_floor, share_basis=pc.share_basis,
                               hydrogen=hydrogen)
            model = build_model(mcfg, params_from_dict(params), inp, profiles, name=f"{strategy}-{role}")
            report, _ = solve_model(model, method=pc.solver)
            report.meta.update({"role": role, "uptake": uptake, "framework": spec.framework,
                                "substituted_cars": spec.substituted_cars if role == "scenario" else 0.0,
                                "start_hour": self.cfg.start_hour})
            report.write(d)
            _write_csv(d / "weights.csv", ["profile_id", "cars"], [(k, repr(v)) for k, v in sorted(weights.items())])

        return self._stage("solve", rel, payload, run, "solve")

    def compare_case(self, strategy: str, uptake: str, hydrogen: bool) -> CaseResult:
        ref = self.solve_case(strategy, uptake, "reference", hydrogen)
        scen = self.solve_case(strategy, uptake, "scenario", hydrogen)
        rel = f"compare/{strategy}{'-h2' if hydrogen else ''}/{uptake}"
        payload = {"reference": tree_hash(ref), "scenario": tree_hash(scen)}
        cd = self._stage("compare", rel, payload, lambda d: compare_dirs(ref, scen, d), "compare")
        kpis = json.loads((cd / "kpis.json").read_text())
        return CaseResult(strategy, uptake, hydrogen, ref, scen, cd, kpis)

    # -- entry points --

    def _write_run_files(self, results: list[CaseResult]):
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.yaml").write_text(snapshot(self.cfg))
        index = {"layout_version": LAYOUT_VERSION, "version": __version__,
                 "stages": dict(sorted(self.keys.items())),
                 "cases": [{"strategy": r.strategy, "uptake": r.uptake, "hydrogen": r.hydrogen,
                            "reference": r.reference_dir.relative_to(self.out).as_posix(),
                            "scenario": r.scenario_dir.relative_to(self.out).as_posix(),
                            "compare": r.compare_dir.relative_to(self.out).as_posix(),
                            "delta_cost_eur_per_a": r.kpis.get("delta_cost_eur_per_a"),
                            "delta_cost_per_car_eur_per_a": r.kpis.get("delta_cost_per_car_eur_per_a")}
                           for r in results]}
        (self.out / "run.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")

    def run(self) -> list[CaseResult]:
        """Reference and scenario for the configured strategy and uptake."""
        res = [self.compare_case(self.cfg.power.strategy, self.cfg.fleet.uptake, self.cfg.power.hydrogen)]
        self._write_run_files(res)
        return res

    def study(self, strategies=None, uptakes=None, hydrogen=None) -> list[CaseResult]:
        """Every strategy x uptake (x hydrogen) combination, shared upstream
        stages, plus a combined cost table."""
        strategies = strategies or self.cfg.study_strategies or [self.cfg.power.strategy]
        uptakes = uptakes or self.cfg.study_uptakes or [self.cfg.fleet.uptake]
        hydrogen = hydrogen if hydrogen is not None else [self.cfg.power.hydrogen]
        cases = [(s, u, h) for h in hydrogen for s in strategies for u in uptakes]
        if self.cfg.jobs > 1:
            # upstream once, then independent solves in parallel
            self.synth()
            self.inputs()
            with ProcessPoolExecutor(self.cfg.jobs) as ex:
                futs = [ex.submit(_solve_worker, self.cfg, str(self.out), s, u, role, h)
                        for s, u, h in cases for role in ("reference", "scenario")]
                for f in futs:
                    f.result()
        res = [self.compare_case(s, u, h) for s, u, h in cases]
        d = self.out / "study"
        d.mkdir(parents=True, exist_ok=True)
        rows = []
        for r in res:
            k = r.kpis
            rows.append((r.strategy, r.uptake, int(r.hydrogen), _fmt(k["reference_cost_eur_per_a"]),
                         _fmt(k["scenario_cost_eur_per_a"]), _fmt(k["delta_cost_eur_per_a"]),
                         _fmt(k["substituted_cars"]), _fmt(k["delta_cost_per_car_eur_per_a"])))
        _write_csv(d / "cost_table.csv", ["strategy", "uptake", "hydrogen", "reference_cost_eur_per_a",
                                          "scenario_cost_eur_per_a", "delta_cost_eur_per_a", "substituted_cars",
                                          "delta_cost_per_car_eur_per_a"], rows)
        self._write_run_files(res)
        return res


def _solve_worker(cfg, out, strategy, uptake, role, hydrogen):
    Pipeline(cfg, out).solve_case(strategy, uptake, role, hydrogen)


# -- comparison ------------------------------------------------------------

def _windows(hours: int, start_hour: int) -> dict[str, tuple[int, int]]:
    """Summer/winter display weeks inside the horizon, else the horizon."""
    if hours < 24 * 14:
        return {"horizon": (0, hours)}
    out = {}
    for name, doy in (("winter", 15), ("summer", 196)):
        s = doy * 24 - start_hour
        if 0 <= s and s + 168 <= hours:
            out[name] = (s, s + 168)
    return out or {"horizon": (0, min(hours, 168))}


def compare_reports(ref: SolutionReport, scen: SolutionReport, out: Path) -> KpiReport:
    sub = float(scen.meta.get("substituted_cars", 0.0) or 0.0)
    k = compute_kpis(scen, ref, sub)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kpis.json").write_text(json.dumps(k.summary(), indent=2, sort_keys=True) + "\n")
    _write_csv(out / "cost_table.csv", ["quantity", "value"], [
        ("reference_cost_eur_per_a", _fmt(k.reference_cost_eur_per_a)),
        ("scenario_cost_eur_per_a", _fmt(k.scenario_cost_eur_per_a)),
        ("delta_cost_eur_per_a", _fmt(k.delta_cost_eur_per_a)),
        ("substituted_cars", _fmt(k.substituted_cars)),
        ("delta_cost_per_car_eur_per_a", _fmt(k.delta_cost_per_car_eur_per_a)),
    ])
    _write_csv(out / "capacity_delta.csv", ["technology", "reference_mw", "scenario_mw", "delta_mw"],
               [(t, _fmt(ref.capacity_mw.get(t, 0.0)), _fmt(scen.capacity_mw.get(t, 0.0)), _fmt(v))
                for t, v in k.capacity_delta_mw.items()]
               + [(f"{s}_{f}", _fmt(ref.storage.get(s, {}).get(f, 0.0)), _fmt(scen.storage.get(s, {}).get(f, 0.0)),
                   _fmt(v)) for s, dd in k.storage_delta.items() for f, v in dd.items()])
    _write_csv(out / "generation_delta.csv", ["technology", "delta_mwh_per_a"],
               [(t, _fmt(v)) for t, v in k.generation_delta_mwh_per_a.items()])
    start = int(ref.meta.get("start_hour", 0) or 0)
    for name, (a, b) in _windows(ref.hours, start).items():
        k.hourly.iloc[a:b].drop(columns=[c for c in k.hourly.columns if "soc" in c]).to_csv(
            out / f"dispatch_{name}.csv", index_label="hour", float_format="%.9g", lineterminator="\n")
    soc_cols = [c for c in k.hourly.columns if "soc" in c]
    k.hourly[soc_cols].to_csv(out / "ev_soc.csv", index_label="hour", float_format="%.9g", lineterminator="\n")
    return k


def compare_dirs(ref_dir: str | Path, scen_dir: str | Path, out: str | Path) -> KpiReport:
    """Delta report between two solved cases (``solve/<case>/<role>``
    directories)."""
    ref, scen = load_report(ref_dir), load_report(scen_dir)
    if ref.hours != scen.hours:
        raise ConfigError(f"cannot compare: {ref_dir} has {ref.hours} h, {scen_dir} has {scen.hours} h")
    return compare_reports(ref, scen, Path(out))
