"""Conditional trip distributions per (location, cluster, day type) cell and
their shared-fleet counterparts under a car substitution rate.

Private cells condition departure slots on (destination, total trips, trip
rank) and duration/distance on (destination, total trips). Shared cells keep
only the destination. Every table also stores the coarser levels used as
fallbacks when a fine slice has no observations.
"""
from __future__ import annotations

import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .diaries import DESTINATIONS, N_BLOCKS, BLOCK_MIN, TripRecord

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_N_MAX = 48

DURATION_EDGES = np.concatenate([np.arange(0, 121, 5), np.arange(135, 1441, 15)]).astype(float)
DISTANCE_EDGES = np.concatenate([np.arange(0, 21, 1), np.arange(25, 101, 5), np.arange(150, 1001, 50)]).astype(float)
N_DUR = len(DURATION_EDGES) - 1
N_DIST = len(DISTANCE_EDGES) - 1


def duration_bin(minutes: float) -> int:
    """Right-closed bins (lo, hi]."""
    return int(min(max(np.searchsorted(DURATION_EDGES, minutes, side="left") - 1, 0), N_DUR - 1))


def distance_bin(km: float) -> int:
    """Left-closed bins [lo, hi); the last bin also takes anything longer."""
    return int(min(np.searchsorted(DISTANCE_EDGES, km, side="right") - 1, N_DIST - 1))


def duration_value(b: int) -> int:
    return int(DURATION_EDGES[b + 1])


def distance_value(b: int) -> float:
    return float(0.5 * (DISTANCE_EDGES[b] + DISTANCE_EDGES[b + 1]))


class EmptyCellError(LookupError):
    pass


@dataclass
class DistributionSet:
    location_type: str
    cluster_id: int | None          # None: location-level (weekend cells)
    day_type: str
    ownership: str                  # "private" | "shared"
    n_days: int                     # person-days (= cars) behind the estimate
    p_ntrips: np.ndarray            # mass over 0..n_max
    # keys are tuples; shorter tuples are the coarser fallback levels
    p_destination: dict = field(default_factory=dict)   # (total, rank) | (total,) | ()
    p_departure: dict = field(default_factory=dict)     # (dest, total, rank) | (dest, total) | (dest,)
    p_dur_dist: dict = field(default_factory=dict)      # (dest, total) | (dest,)
    n_obs: dict = field(default_factory=dict)           # (table, key) -> trip count

    @property
    def n_max(self) -> int:
        return len(self.p_ntrips) - 1

    @property
    def empty(self) -> bool:
        return self.n_days == 0

    @property
    def cell(self) -> tuple:
        return (self.location_type, self.cluster_id, self.day_type, self.ownership)

    @property
    def mean_trips(self) -> float:
        return float(np.dot(np.arange(len(self.p_ntrips)), self.p_ntrips))

    # lookups with coarsening fallback
    def _lookup(self, table: dict, keys: Iterable[tuple], what: str):
        for k in keys:
            if k in table:
                return table[k]
        raise EmptyCellError(f"{what}: no observations in cell {self.cell} for {list(keys)}")

    def destination(self, total: int, rank: int) -> np.ndarray:
        keys = [(total, rank), (total,), ()] if self.ownership == "private" else [()]
        return self._lookup(self.p_destination, keys, "destination")

    def departure(self, dest: str, total: int, rank: int) -> np.ndarray:
        keys = [(dest, total, rank), (dest, total), (dest,)] if self.ownership == "private" else [(dest,)]
        return self._lookup(self.p_departure, keys, f"departure[{dest}]")

    def dur_dist(self, dest: str, total: int) -> np.ndarray:
        keys = [(dest, total), (dest,)] if self.ownership == "private" else [(dest,)]
        return self._lookup(self.p_dur_dist, keys, f"duration/distance[{dest}]")


def _normalized(counts: np.ndarray) -> np.ndarray:
    return counts / counts.sum()


def estimate_cell(trips_by_day: Mapping[str, list[TripRecord]], location_type: str,
                  cluster_id: int | None, day_type: str, n_max: int = DEFAULT_N_MAX) -> DistributionSet:
    """Empirical private distributions from the person-days of one cell."""
    ntrips = np.zeros(n_max + 1)
    dest_c = defaultdict(lambda: np.zeros(len(DESTINATIONS)))
    dep_c = defaultdict(lambda: np.zeros(N_BLOCKS))
    dd_c = defaultdict(lambda: np.zeros((N_DUR, N_DIST)))
    for pid, ts in trips_by_day.items():
        ts = sorted(ts, key=lambda t: t.departure)
        total = len(ts)
        if total > n_max:
            raise ValueError(f"person-day {pid} has {total} trips > n_max={n_max}")
        ntrips[total] += 1
        for rank, t in enumerate(ts, start=1):
            d = DESTINATIONS.index(t.destination)
            for key in ((total, rank), (total,), ()):
                dest_c[key][d] += 1
            slot = t.departure // BLOCK_MIN
            for key in ((t.destination, total, rank), (t.destination, total), (t.destination,)):
                dep_c[key][slot] += 1
            b = (duration_bin(t.duration_min), distance_bin(t.distance_km))
            for key in ((t.destination, total), (t.destination,)):
                dd_c[key][b] += 1
    n_days = len(trips_by_day)
    if n_days == 0:
        log.warning("empty cell %s", (location_type, cluster_id, day_type))
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return DistributionSet(location_type, cluster_id, day_type, "private", 0, p)
    ds = DistributionSet(location_type, cluster_id, day_type, "private", n_days, ntrips / n_days)
    for table, counts, name in ((ds.p_destination, dest_c, "destination"),
                                (ds.p_departure, dep_c, "departure"),
                                (ds.p_dur_dist, dd_c, "dur_dist")):
        for k, c in counts.items():
            table[k] = _normalized(c)
            ds.n_obs[(name, k)] = int(c.sum())
    return ds


def estimate_distributions(trips: Iterable[TripRecord], cluster_of: Mapping[str, int],
                           n_max: int = DEFAULT_N_MAX, exclude_clusters: Iterable[int] = ()) -> dict:
    """Private DistributionSets keyed by cell.

    Weekday cells are per (location, cluster) using ``cluster_of``
    (person_day_id -> label); Saturday and Sunday cells pool the whole
    location (cluster ``None``). Weekday days of excluded clusters are dropped.
    """
    exclude = set(exclude_clusters)
    groups: dict[tuple, dict[str, list]] = defaultdict(lambda: defaultdict(list))
    for t in trips:
        if t.day_type == "weekday":
            c = cluster_of.get(t.person_day_id)
            if c is None or c in exclude:
                continue
        else:
            c = None
        groups[(t.location_type, c, t.day_type)][t.person_day_id].append(t)
    return {key: estimate_cell(days, *key, n_max=n_max) for key, days in sorted(
        groups.items(), key=lambda kv: (kv[0][0], -1 if kv[0][1] is None else kv[0][1], kv[0][2]))}


# -- shared fleet ----------------------------------------------------------

@dataclass
class SubstitutionSpec:
    private_cars: float
    substitution_rate: float = 5.0

    def __post_init__(self):
        if not self.substitution_rate > 0:
            raise ValueError("substitution rate must be positive")
        if self.private_cars < 0:
            raise ValueError("negative car count")

    @property
    def shared_cars(self) -> int:
        if self.private_cars == 0:
            return 0
        return max(1, round(self.private_cars / self.substitution_rate))


def shared_mean_trips(spec: SubstitutionSpec, private: DistributionSet) -> float:
    """All trips of the cell's private cars spread over the shared cars."""
    if spec.shared_cars < 1:
        raise ValueError("no shared cars in cell")
    return private.mean_trips * spec.private_cars / spec.shared_cars


def _transport(p: np.ndarray, f: float, n_max: int) -> tuple[np.ndarray, float]:
    """Scale counts by ``f``, splitting each onto its two neighbouring
    integers (mean-preserving). Mass beyond ``n_max`` is clipped there."""
    out = np.zeros(n_max + 1)
    spill = 0.0
    for n, mass in enumerate(p):
        if mass == 0:
            continue
        x = n * f
        lo = math.floor(x)
        w = x - lo
        for k, m in ((lo, mass * (1 - w)), (lo + 1, mass * w)):
            if m == 0:
                continue
            if k > n_max:
                spill += m
                k = n_max
            out[k] += m
    return out, spill


def recenter_ntrips(p: np.ndarray, target_mean: float, n_max: int | None = None,
                    max_spill: float = 0.01) -> np.ndarray:
    """Move a trip-count distribution to ``target_mean`` by integer transport.

    Raises if more than ``max_spill`` of the mass would land above ``n_max``.
    Small spills are clipped and the scale factor is re-solved so the mean
    still hits the target.
    """
    n_max = len(p) - 1 if n_max is None else n_max
    mean = float(np.dot(np.arange(len(p)), p))
    if mean <= 0:
        raise ValueError("private distribution has zero mean trips")
    f = target_mean / mean
    q, spill = _transport(p, f, n_max)
    if spill > max_spill or target_mean > n_max:
        raise ValueError(f"recentred trip counts exceed n_max={n_max} "
                         f"({spill:.1%} of mass); raise n_max")
    if spill > 0:
        lo, hi = f, f * 2
        while float(np.dot(np.arange(n_max + 1), _transport(p, hi, n_max)[0])) < target_mean:
            hi *= 2
            if hi > 1e6:
                raise ValueError("cannot reach target mean below n_max; raise n_max")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(np.dot(np.arange(n_max + 1), _transport(p, mid, n_max)[0])) < target_mean:
                lo = mid
            else:
                hi = mid
        q, _ = _transport(p, hi, n_max)
    return q / q.sum()


def _pool(ds: DistributionSet, table: dict, name: str, keylen: int) -> dict:
    acc, wsum = {}, defaultdict(float)
    for k, p in table.items():
        if len(k) != keylen:
            continue
        w = ds.n_obs[(name, k)]
        head = k[:1] if name != "destination" else ()
        acc[head] = acc.get(head, 0) + w * p
        wsum[head] += w
    return {k: v / wsum[k] for k, v in acc.items()}


def derive_shared_distributions(private: DistributionSet, spec: SubstitutionSpec) -> DistributionSet:
    """Shared-fleet tables: trip counts recentred on the per-shared-car mean,
    departure slots conditioned on destination only, duration/distance without
    the total-trip conditioning. Dropped conditioning is marginalised with
    trip-count weights."""
    if private.empty:
        raise EmptyCellError(f"cannot derive shared distributions from empty cell {private.cell}")
    target = shared_mean_trips(spec, private)
    shared = DistributionSet(private.location_type, private.cluster_id, private.day_type, "shared",
                             spec.shared_cars, recenter_ntrips(private.p_ntrips, target, private.n_max))
    shared.p_destination = _pool(private, private.p_destination, "destination", 2)
    shared.p_departure = _pool(private, private.p_departure, "departure", 3)
    shared.p_dur_dist = _pool(private, private.p_dur_dist, "dur_dist", 2)
    for name, table in (("destination", shared.p_destination), ("departure", shared.p_departure),
                        ("dur_dist", shared.p_dur_dist)):
        for k in table:
            shared.n_obs[(name, k)] = private.n_obs[(name, k)]
    return shared


# -- serialisation ---------------------------------------------------------

def _key_str(k: tuple) -> str:
    return "|".join(str(x) for x in k)


def _key_parse(s: str, kinds: str) -> tuple:
    if s == "":
        return ()
    parts = s.split("|")
    return tuple(int(p) if kinds[i] == "i" else p for i, p in enumerate(parts))


def to_dict(ds: DistributionSet) -> dict:
    def sparse(a):
        nz = np.flatnonzero(a)
        return [[int(i), float(a.flat[i])] for i in nz]

    return {
        "schema_version": SCHEMA_VERSION,
        "cell": {"location_type": ds.location_type, "cluster_id": ds.cluster_id,
                 "day_type": ds.day_type, "ownership": ds.ownership},
        "n_days": ds.n_days,
        "binning": {"duration_edges_min": DURATION_EDGES.tolist(), "distance_edges_km": DISTANCE_EDGES.tolist(),
                    "departure_slot_min": BLOCK_MIN},
        "p_ntrips": ds.p_ntrips.tolist(),
        "p_destination": {_key_str(k): v.tolist() for k, v in ds.p_destination.items()},
        "p_departure": {_key_str(k): sparse(v) for k, v in ds.p_departure.items()},
        "p_dur_dist": {_key_str(k): sparse(v) for k, v in ds.p_dur_dist.items()},
        "n_obs": {f"{name}:{_key_str(k)}": n for (name, k), n in ds.n_obs.items()},
    }


def from_dict(d: dict) -> DistributionSet:
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported distribution schema {d.get('schema_version')}")
    c = d["cell"]
    ds = DistributionSet(c["location_type"], c["cluster_id"], c["day_type"], c["ownership"],
                         d["n_days"], np.array(d["p_ntrips"], dtype=float))

    def dense(entries, shape):
        a = np.zeros(shape)
        for i, v in entries:
            a.flat[i] = v
        return a

    ds.p_destination = {_key_parse(k, "ii"): np.array(v) for k, v in d["p_destination"].items()}
    ds.p_departure = {_key_parse(k, "sii"): dense(v, N_BLOCKS) for k, v in d["p_departure"].items()}
    ds.p_dur_dist = {_key_parse(k, "si"): dense(v, (N_DUR, N_DIST)) for k, v in d["p_dur_dist"].items()}
    kinds = {"destination": "ii", "departure": "sii", "dur_dist": "si"}
    for k, n in d["n_obs"].items():
        name, key = k.split(":", 1)
        ds.n_obs[(name, _key_parse(key, kinds[name]))] = n
    return ds


def cell_filename(ds: DistributionSet) -> str:
    cl = "all" if ds.cluster_id is None else f"c{ds.cluster_id}"
    return f"{ds.ownership}_{ds.location_type}_{cl}_{ds.day_type}.json"


def save(ds: DistributionSet, directory: str | Path) -> Path:
    path = Path(directory) / cell_filename(ds)
    path.write_text(json.dumps(to_dict(ds), indent=1, sort_keys=True))
    return path


def load(path: str | Path) -> DistributionSet:
    return from_dict(json.loads(Path(path).read_text()))
