"""Travel-diary ingestion: parsing, filtering, 5-minute day sequences and a
synthetic diary generator that produces the same schema as the survey export.
"""
from __future__ import annotations

import csv
import io
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml

log = logging.getLogger(__name__)

DESTINATIONS = ("work_school", "leisure", "home", "errands")
LOCATIONS = ("metropolis", "big_city", "middle_city", "small_city", "rural")
DAY_TYPES = ("weekday", "saturday", "sunday")

BLOCK_MIN = 5
N_BLOCKS = 288
IDLE, ON_MOVE = 0, 1

REQUIRED_COLUMNS = (
    "person_day_id", "departure", "arrival", "distance_km", "destination",
    "location_type", "day_type", "is_driver", "is_professional",
)
OPTIONAL_COLUMNS = ("duration_min", "arrival_next_day")

_TRUE = {"1", "true", "yes", "y", "t"}
_FALSE = {"0", "false", "no", "n", "f", ""}


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class TripRecord:
    person_day_id: str
    departure: int
    arrival: int
    distance_km: float
    destination: str
    location_type: str
    day_type: str
    is_driver: bool = True
    is_professional: bool = False

    @property
    def duration_min(self) -> int:
        return self.arrival - self.departure

    @property
    def spans_midnight(self) -> bool:
        return self.arrival > 1440


@dataclass(frozen=True)
class RowRejection:
    row: int
    reason: str
    raw: dict = field(compare=False, repr=False, default_factory=dict)


@dataclass
class DaySequence:
    person_day_id: str
    location_type: str
    day_type: str
    blocks: np.ndarray  # uint8, length 288

    def as_string(self) -> str:
        return "".join("M" if b else "." for b in self.blocks)


# -- parsing ---------------------------------------------------------------

def _sniff_delimiter(header: str) -> str:
    return ";" if header.count(";") > header.count(",") else ","


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _parse_clock(value: str, hhmm: bool) -> int:
    v = value.strip()
    if hhmm:
        hh, mm = v.split(":")[:2]
        h, m = int(hh), int(mm)
        if not (0 <= m < 60) or not (0 <= h <= 24) or (h == 24 and m != 0):
            raise ValueError(v)
        return h * 60 + m
    t = float(v)
    if t != int(t):
        raise ValueError(v)
    return int(t)


def load_column_mapping(path: str | Path) -> dict:
    """Read a YAML column mapping.

    Layout::

        columns:          # canonical name -> source header
          person_day_id: HP_ID_Reg
          departure: W_SZ
        values:           # canonical name -> {source code: canonical value}
          destination: {"1": work_school, "3": errands}
    """
    with open(path, encoding="utf-8") as fh:
        return yaml.safe_load(fh) or {}


def parse_diaries(raw: str | Iterable[str], mapping: Mapping | None = None):
    """Parse delimited diary text into trips.

    Returns ``(trips, rejections)``. A header that does not match the schema
    raises :class:`SchemaError`; bad rows are collected as
    :class:`RowRejection` with 1-based data row numbers.
    """
    lines = raw.splitlines() if isinstance(raw, str) else list(raw)
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise SchemaError("empty input: no header row")
    delim = _sniff_delimiter(lines[0])
    reader = csv.DictReader(io.StringIO("\n".join(lines)), delimiter=delim)
    header = [h.strip() for h in (reader.fieldnames or [])]

    mapping = mapping or {}
    colmap = dict(mapping.get("columns", {}))
    valmap = mapping.get("values", {})
    source_of = {c: colmap.get(c, c) for c in REQUIRED_COLUMNS + OPTIONAL_COLUMNS}

    missing = [c for c in REQUIRED_COLUMNS if source_of[c] not in header]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    if not colmap:
        known = set(REQUIRED_COLUMNS) | set(OPTIONAL_COLUMNS)
        extra = [h for h in header if h not in known]
        if extra:
            raise SchemaError(f"unexpected column(s): {', '.join(extra)}")

    rows = [{k.strip(): (v or "").strip() for k, v in r.items() if k} for r in reader]
    hhmm = {c: any(":" in r.get(source_of[c], "") for r in rows) for c in ("departure", "arrival")}

    trips: list[TripRecord] = []
    rejects: list[RowRejection] = []
    for i, r in enumerate(rows, start=1):
        def get(c):
            v = r.get(source_of[c], "")
            return str(valmap.get(c, {}).get(v, v))

        try:
            dep = _parse_clock(get("departure"), hhmm["departure"])
            arr = _parse_clock(get("arrival"), hhmm["arrival"])
        except ValueError:
            rejects.append(RowRejection(i, "unparseable time", r))
            continue
        next_day = False
        if source_of["arrival_next_day"] in r:
            try:
                next_day = _parse_bool(get("arrival_next_day"))
            except ValueError:
                rejects.append(RowRejection(i, "bad boolean", r))
                continue
        if next_day:
            arr += 1440
        if not (0 <= dep < 1440):
            rejects.append(RowRejection(i, "departure out of range", r))
            continue
        if arr < dep:
            rejects.append(RowRejection(i, "negative duration", r))
            continue
        if arr == dep:
            rejects.append(RowRejection(i, "zero duration", r))
            continue
        dur = get("duration_min") if source_of["duration_min"] in r else ""
        if dur and float(dur) != arr - dep:
            rejects.append(RowRejection(i, "duration mismatch", r))
            continue
        try:
            raw_dist = get("distance_km")
            dist = float(raw_dist.replace(",", ".") if delim == ";" else raw_dist)
        except ValueError:
            rejects.append(RowRejection(i, "unparseable distance", r))
            continue
        if not dist > 0:
            rejects.append(RowRejection(i, "non-positive distance", r))
            continue
        dest, loc, day = get("destination"), get("location_type"), get("day_type")
        if dest not in DESTINATIONS:
            rejects.append(RowRejection(i, f"unknown destination {dest!r}", r))
            continue
        if loc not in LOCATIONS:
            rejects.append(RowRejection(i, f"unknown location type {loc!r}", r))
            continue
        if day not in DAY_TYPES:
            rejects.append(RowRejection(i, f"unknown day type {day!r}", r))
            continue
        try:
            driver = _parse_bool(get("is_driver"))
            prof = _parse_bool(get("is_professional"))
        except ValueError:
            rejects.append(RowRejection(i, "bad boolean", r))
            continue
        trips.append(TripRecord(get("person_day_id"), dep, arr, dist, dest, loc, day, driver, prof))
    if rejects:
        log.warning("%d of %d diary rows rejected", len(rejects), len(rows))
    return trips, rejects


def read_diaries(path: str | Path, mapping: Mapping | None = None):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_diaries(fh.read(), mapping)


# -- filtering -------------------------------------------------------------

FILTER_RULES = ("passenger", "professional", "overlapping", "spans_midnight")


def _overlapping_days(trips: list[TripRecord]) -> set[str]:
    by_day: dict[str, list[TripRecord]] = defaultdict(list)
    for t in trips:
        by_day[t.person_day_id].append(t)
    bad = set()
    for pid, ts in by_day.items():
        ts = sorted(ts, key=lambda t: (t.departure, t.arrival))
        end = -1
        for t in ts:
            if t.departure < end:
                bad.add(pid)
                break
            end = max(end, t.arrival)
    return bad


def filter_trips(trips: list[TripRecord], report: Counter | None = None) -> list[TripRecord]:
    """Drop passenger and professional trips, every trip of a person-day with
    overlapping trips, and trips running past midnight. Input order is kept.

    Removal counts per rule are added to ``report`` when given.
    """
    counts = Counter({r: 0 for r in FILTER_RULES})
    kept = []
    for t in trips:
        if not t.is_driver:
            counts["passenger"] += 1
        elif t.is_professional:
            counts["professional"] += 1
        else:
            kept.append(t)
    bad_days = _overlapping_days(kept)
    out = []
    for t in kept:
        if t.person_day_id in bad_days:
            counts["overlapping"] += 1
        elif t.spans_midnight:
            counts["spans_midnight"] += 1
        else:
            out.append(t)
    if report is not None:
        report.update(counts)
    return out


# -- sequencing ------------------------------------------------------------

def trip_blocks(departure: int, arrival: int) -> range:
    """Indices of the 5-minute blocks touched by ``[departure, arrival)``."""
    first = departure // BLOCK_MIN
    last = -(-arrival // BLOCK_MIN)  # ceil
    return range(first, min(last, N_BLOCKS))


def build_sequences(trips: list[TripRecord]) -> list[DaySequence]:
    """One 288-block sequence per person-day, in first-appearance order."""
    days: dict[str, DaySequence] = {}
    for t in trips:
        seq = days.get(t.person_day_id)
        if seq is None:
            seq = days[t.person_day_id] = DaySequence(
                t.person_day_id, t.location_type, t.day_type, np.zeros(N_BLOCKS, dtype=np.uint8))
        span = trip_blocks(t.departure, t.arrival)
        seq.blocks[span.start:span.stop] = ON_MOVE
    return list(days.values())


# -- output tables ---------------------------------------------------------

TRIP_COLUMNS = REQUIRED_COLUMNS + ("duration_min",)


def write_trips(trips: Iterable[TripRecord], path: str | Path, extra: Mapping[str, Mapping] | None = None):
    """Canonical trip table. ``extra`` maps column name -> {person_day_id: value}."""
    extra = extra or {}
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRIP_COLUMNS + tuple(extra))
        for t in trips:
            w.writerow([t.person_day_id, t.departure, t.arrival, repr(t.distance_km), t.destination,
                        t.location_type, t.day_type, int(t.is_driver), int(t.is_professional),
                        t.duration_min] + [extra[c][t.person_day_id] for c in extra])


def write_sequences(seqs: Iterable[DaySequence], path: str | Path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["person_day_id", "location_type", "day_type", "blocks"])
        for s in seqs:
            w.writerow([s.person_day_id, s.location_type, s.day_type, s.as_string()])


def read_sequences(path: str | Path) -> list[DaySequence]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            blocks = np.frombuffer(r["blocks"].encode(), dtype=np.uint8) == ord("M")
            out.append(DaySequence(r["person_day_id"], r["location_type"], r["day_type"],
                                   blocks.astype(np.uint8)))
    return out


def write_removal_report(counts: Mapping[str, int], path: str | Path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("rule,count\n")
        for rule in FILTER_RULES:
            fh.write(f"{rule},{counts.get(rule, 0)}\n")


# -- synthetic diaries -----------------------------------------------------

# Each leg: (destination, departure mean [min], departure sd, duration range, distance range).
# Departure of leg k>0 is also pushed past the previous arrival plus a dwell.
ARCHETYPES: dict[str, list[tuple]] = {
    "commuter": [
        ("work_school", 7 * 60 + 30, 30, (15, 40), (8.0, 25.0)),
        ("home", 17 * 60, 45, (15, 45), (8.0, 25.0)),
    ],
    "long_commuter": [
        ("work_school", 6 * 60 + 45, 25, (40, 75), (35.0, 70.0)),
        ("leisure", 17 * 60, 40, (20, 40), (10.0, 30.0)),
        ("home", 19 * 60 + 30, 40, (30, 60), (30.0, 55.0)),
    ],
    "errands": [
        ("errands", 10 * 60, 60, (5, 20), (1.5, 6.0)),
        ("home", 11 * 60 + 30, 60, (5, 20), (1.5, 6.0)),
    ],
    "leisure": [
        ("leisure", 14 * 60, 90, (10, 30), (3.0, 12.0)),
        ("errands", 16 * 60 + 30, 60, (5, 15), (2.0, 6.0)),
        ("home", 18 * 60, 60, (10, 25), (3.0, 10.0)),
    ],
    "road_trip": [
        ("leisure", 8 * 60, 60, (150, 240), (200.0, 320.0)),
        ("home", 17 * 60, 60, (150, 240), (200.0, 320.0)),
    ],
}


@dataclass
class SyntheticDiaryConfig:
    person_days: dict[str, int]  # location -> number of person-days
    archetype_weights: dict[str, float] = field(default_factory=lambda: {
        "commuter": 0.4, "long_commuter": 0.15, "errands": 0.25, "leisure": 0.18, "road_trip": 0.02})
    day_type_weights: dict[str, float] = field(default_factory=lambda: {
        "weekday": 5 / 7, "saturday": 1 / 7, "sunday": 1 / 7})

    def validate(self):
        for loc, n in self.person_days.items():
            if loc not in LOCATIONS:
                raise ValueError(f"unknown location type {loc!r}")
            if n < 0:
                raise ValueError(f"negative person-day count for {loc}: {n}")
        for name, w in self.archetype_weights.items():
            if name not in ARCHETYPES:
                raise ValueError(f"unknown archetype {name!r}")
            if w < 0:
                raise ValueError(f"negative archetype weight for {name}")
        if sum(self.archetype_weights.values()) <= 0:
            raise ValueError("archetype weights sum to zero")


def _sample_legs(legs, rng) -> list[tuple[int, int, float, str]]:
    out = []
    prev_arr = 0
    for dest, mu, sd, (dlo, dhi), (klo, khi) in legs:
        dwell = int(rng.integers(10, 60))
        dep = int(round(rng.normal(mu, sd)))
        dep = max(dep, prev_arr + dwell if out else 0, 0)
        dur = int(rng.integers(dlo, dhi + 1))
        dist = round(float(rng.uniform(klo, khi)), 1)
        arr = dep + dur
        if arr > 1440 - 5:
            return []
        out.append((dep, arr, dist, dest))
        prev_arr = arr
    return out


def generate_synthetic_diaries(config: SyntheticDiaryConfig, seed: int,
                               archetype_of: dict | None = None) -> list[TripRecord]:
    """Deterministic synthetic diaries. ``archetype_of`` (optional dict) is
    filled with person_day_id -> archetype name."""
    config.validate()
    rng = np.random.default_rng(seed)
    names = list(config.archetype_weights)
    w = np.array([config.archetype_weights[n] for n in names], dtype=float)
    w /= w.sum()
    dnames = list(config.day_type_weights)
    dw = np.array([config.day_type_weights[d] for d in dnames], dtype=float)
    dw /= dw.sum()
    trips = []
    for loc in LOCATIONS:
        for k in range(config.person_days.get(loc, 0)):
            pid = f"{loc}-{k:06d}"
            arche = names[rng.choice(len(names), p=w)]
            day = dnames[rng.choice(len(dnames), p=dw)]
            legs = []
            while not legs:
                legs = _sample_legs(ARCHETYPES[arche], rng)
            if archetype_of is not None:
                archetype_of[pid] = arche
            for dep, arr, dist, dest in legs:
                trips.append(TripRecord(pid, dep, arr, dist, dest, loc, day, True, False))
    return trips
