from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evshare.diaries import (ARCHETYPES, N_BLOCKS, REQUIRED_COLUMNS, SchemaError, SyntheticDiaryConfig,
                             TripRecord, build_sequences, filter_trips, generate_synthetic_diaries, parse_diaries,
                             read_diaries, read_sequences, trip_blocks, write_sequences, write_trips)

HEADER = ",".join(REQUIRED_COLUMNS)


def row(pid="p1", dep="08:00", arr="08:30", dist="12", dest="work_school", loc="metropolis", day="weekday",
        driver="1", prof="0"):
    return ",".join([pid, dep, arr, dist, dest, loc, day, driver, prof])


def trip(pid, dep, arr, dist=5.0, dest="leisure", driver=True, prof=False, loc="metropolis", day="weekday"):
    return TripRecord(pid, dep, arr, dist, dest, loc, day, driver, prof)


# -- parsing ------------------------------------------------------------------

def test_parse_clock_row():
    trips, rejects = parse_diaries([HEADER, row()])
    assert rejects == []
    (t,) = trips
    assert (t.departure, t.arrival, t.duration_min, t.distance_km) == (480, 510, 30, 12.0)
    assert t.destination == "work_school"


def test_parse_minutes_and_semicolons():
    text = HEADER.replace(",", ";") + "\n" + "p1;480;510;12,5;home;rural;sunday;yes;no\n"
    (t,), _ = parse_diaries(text)
    assert (t.departure, t.arrival, t.distance_km, t.day_type) == (480, 510, 12.5, "sunday")


def test_negative_duration_rejected_with_row_number():
    trips, rejects = parse_diaries([HEADER, row(), row(dep="09:00", arr="08:00")])
    assert len(trips) == 1
    assert [(r.row, r.reason) for r in rejects] == [(2, "negative duration")]


def test_unparseable_time_rejected():
    _, rejects = parse_diaries([HEADER, row(dep="8h")])
    assert rejects[0].reason == "unparseable time"


def test_missing_column_names_it():
    header = ",".join(c for c in REQUIRED_COLUMNS if c != "distance_km")
    with pytest.raises(SchemaError, match="distance_km"):
        parse_diaries([header])


def test_extra_column_names_it():
    with pytest.raises(SchemaError, match="weight"):
        parse_diaries([HEADER + ",weight"])


def test_arrival_at_midnight_kept():
    (t,), _ = parse_diaries([HEADER, row(dep="23:30", arr="24:00")])
    assert t.arrival == 1440
    assert filter_trips([t]) == [t]


def test_column_mapping():
    mapping = {"columns": {"destination": "zweck", "person_day_id": "id"},
               "values": {"destination": {"1": "work_school"}}}
    header = HEADER.replace("destination", "zweck").replace("person_day_id", "id")
    (t,), _ = parse_diaries([header, row(dest="1")], mapping)
    assert t.destination == "work_school"


def test_next_day_arrival_is_filtered():
    text = [HEADER + ",arrival_next_day", row(dep="23:00", arr="00:30") + ",1"]
    (t,), _ = parse_diaries(text)
    assert t.arrival == 1470
    report = Counter()
    assert filter_trips([t], report) == []
    assert report["spans_midnight"] == 1


def test_write_read_roundtrip(tmp_path):
    trips = generate_synthetic_diaries(SyntheticDiaryConfig({"rural": 20}), 3)
    write_trips(trips, tmp_path / "t.csv")
    back, rejects = read_diaries(tmp_path / "t.csv")
    assert rejects == [] and back == trips


# -- filtering ----------------------------------------------------------------

def test_overlapping_day_removed_entirely():
    ts = [trip("a", 540, 600), trip("a", 570, 660), trip("b", 540, 600)]
    report = Counter()
    assert filter_trips(ts, report) == [ts[2]]
    assert report["overlapping"] == 2


def test_professional_and_passenger_removed():
    ts = [trip("a", 100, 130, prof=True), trip("a", 200, 230, driver=False), trip("a", 300, 330)]
    report = Counter()
    assert filter_trips(ts, report) == [ts[2]]
    assert report["professional"] == 1 and report["passenger"] == 1


def test_clean_day_kept_in_order():
    ts = [trip("a", 600, 630), trip("a", 420, 450), trip("a", 1000, 1010)]
    assert filter_trips(ts) == ts


trip_lists = st.lists(
    st.builds(lambda pid, dep, dur, driver, prof: trip(pid, dep, dep + dur, driver=driver, prof=prof),
              st.sampled_from(["a", "b", "c", "d"]), st.integers(0, 1430), st.integers(1, 200),
              st.booleans(), st.booleans()),
    max_size=25)


@given(trip_lists)
def test_filter_idempotent(ts):
    once = filter_trips(ts)
    assert filter_trips(once) == once


@given(trip_lists)
def test_filtered_days_have_no_overlaps(ts):
    kept = filter_trips(ts)
    for pid in {t.person_day_id for t in kept}:
        day = sorted((t.departure, t.arrival) for t in kept if t.person_day_id == pid)
        assert all(a[1] <= b[0] for a, b in zip(day, day[1:]))
        assert all(t.arrival <= 1440 and t.is_driver and not t.is_professional for t in kept)


# -- sequences ----------------------------------------------------------------

def test_sequence_blocks_for_half_hour_trip():
    (s,) = build_sequences([trip("a", 480, 510)])
    assert np.flatnonzero(s.blocks).tolist() == list(range(96, 102))
    assert len(s.blocks) == N_BLOCKS


def test_partial_block_marked():
    assert list(trip_blocks(482, 488)) == [96, 97]


def test_days_without_trips_emit_nothing():
    assert build_sequences([]) == []


def test_sequence_roundtrip(tmp_path):
    seqs = build_sequences([trip("a", 480, 510), trip("b", 0, 1440)])
    write_sequences(seqs, tmp_path / "s.csv")
    back = read_sequences(tmp_path / "s.csv")
    assert [s.as_string() for s in back] == [s.as_string() for s in seqs]


@given(trip_lists)
def test_sequence_count_and_block_bounds(ts):
    kept = filter_trips(ts)
    seqs = build_sequences(kept)
    assert len(seqs) == len({t.person_day_id for t in kept})
    for s in seqs:
        day = [t for t in kept if t.person_day_id == s.person_day_id]
        dur = sum(t.duration_min for t in day)
        moving = 5 * int(s.blocks.sum())
        slack = 2 * 5 * len(day)
        assert dur - slack <= moving <= dur + slack


# -- synthetic diaries --------------------------------------------------------

def test_synthetic_deterministic(tmp_path):
    cfg = SyntheticDiaryConfig({"metropolis": 50, "rural": 30})
    write_trips(generate_synthetic_diaries(cfg, 1), tmp_path / "a.csv")
    write_trips(generate_synthetic_diaries(cfg, 1), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_synthetic_passes_filter_unchanged():
    trips = generate_synthetic_diaries(SyntheticDiaryConfig({"metropolis": 300, "small_city": 300}), 5)
    assert filter_trips(trips) == trips


def test_synthetic_count_is_known():
    # every archetype has a fixed number of legs, so the trip count follows
    # from the archetype draw
    arche = {}
    trips = generate_synthetic_diaries(SyntheticDiaryConfig({"big_city": 400}), 11, arche)
    assert len(trips) == sum(len(ARCHETYPES[a]) for a in arche.values())
    assert len(build_sequences(filter_trips(trips))) == 400


def test_commuter_archetype():
    arche = {}
    cfg = SyntheticDiaryConfig({"middle_city": 200}, archetype_weights={"commuter": 1.0})
    trips = generate_synthetic_diaries(cfg, 2, arche)
    by_day = {}
    for t in trips:
        by_day.setdefault(t.person_day_id, []).append(t)
    assert set(arche.values()) == {"commuter"}
    for ts in by_day.values():
        assert [t.destination for t in ts] == ["work_school", "home"]
        assert ts[0].departure < 12 * 60 <= ts[1].departure


def test_zero_person_days():
    assert generate_synthetic_diaries(SyntheticDiaryConfig({"rural": 0}), 1) == []


def test_negative_count_rejected():
    with pytest.raises(ValueError, match="negative"):
        generate_synthetic_diaries(SyntheticDiaryConfig({"rural": -1}), 1)
