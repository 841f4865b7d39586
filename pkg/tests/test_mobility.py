import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from evshare.diaries import SyntheticDiaryConfig, TripRecord, generate_synthetic_diaries
from evshare.mobility import (DistributionSet, EmptyCellError, SubstitutionSpec, derive_shared_distributions,
                              estimate_cell, estimate_distributions, load, recenter_ntrips, save,
                              shared_mean_trips)


def day(pid, *legs):
    """legs: (departure, arrival, destination)"""
    return [TripRecord(pid, d, a, 5.0, dest, "metropolis", "weekday") for d, a, dest in legs]


def cell(days):
    return estimate_cell({ts[0].person_day_id: ts for ts in days}, "metropolis", 3, "weekday")


def all_slices(ds):
    for table in (ds.p_destination, ds.p_departure, ds.p_dur_dist):
        yield from table.values()


def test_single_departure_slot():
    ds = cell([day(f"p{i}", (480, 500, "work_school")) for i in range(5)])
    assert ds.p_departure[("work_school",)][96] == 1.0


def test_trip_count_frequencies():
    days = [day(f"a{i}", (400, 420, "work_school"), (1000, 1020, "home")) for i in range(60)]
    days += [day(f"b{i}", (400, 420, "work_school"), (600, 620, "leisure"), (1000, 1020, "home")) for i in range(40)]
    ds = cell(days)
    assert ds.p_ntrips[2] == pytest.approx(0.6) and ds.p_ntrips[3] == pytest.approx(0.4)
    assert ds.mean_trips == pytest.approx(2.4)


def test_slices_normalised_independently():
    # (work, total 2, rank 1): 3 trips at 07:00, 1 at 08:00
    # (work, total 2, rank 2): 1 trip at 17:00
    days = [day("a", (420, 440, "work_school"), (900, 920, "home")),
            day("b", (420, 440, "work_school"), (900, 920, "home")),
            day("c", (420, 440, "work_school"), (900, 920, "home")),
            day("d", (480, 500, "work_school"), (1020, 1040, "work_school"))]
    ds = cell(days)
    r1 = ds.p_departure[("work_school", 2, 1)]
    r2 = ds.p_departure[("work_school", 2, 2)]
    assert r1[84] == pytest.approx(0.75) and r1[96] == pytest.approx(0.25)
    assert r2[204] == pytest.approx(1.0)


def test_weekends_pooled_per_location_and_clusters_excluded():
    trips = generate_synthetic_diaries(SyntheticDiaryConfig({"rural": 300}), 3)
    days = sorted({t.person_day_id for t in trips})
    cluster_of = {pid: 1 + i % 3 for i, pid in enumerate(days)}
    out = estimate_distributions(trips, cluster_of, exclude_clusters=[1])
    assert ("rural", None, "saturday") in out and ("rural", None, "sunday") in out
    assert {k[1] for k in out if k[2] == "weekday"} == {2, 3}


def test_empty_cell_flagged():
    ds = estimate_cell({}, "rural", 3, "weekday")
    assert ds.empty
    with pytest.raises(EmptyCellError):
        derive_shared_distributions(ds, SubstitutionSpec(100))


# -- shared fleet -------------------------------------------------------------

def private_with_mean(p):
    return DistributionSet("rural", 3, "weekday", "private", 100, np.asarray(p, float))


@pytest.mark.parametrize("cars,mean,rate,shared,target", [
    (1000, 3.0, 5, 200, 15.0), (1000, 3.0, 1, 1000, 3.0), (1600, 2.5, 8, 200, 20.0)])
def test_shared_mean_trips(cars, mean, rate, shared, target):
    p = np.zeros(49)
    lo = int(mean)
    p[lo], p[lo + 1] = lo + 1 - mean, mean - lo
    spec = SubstitutionSpec(cars, rate)
    assert spec.shared_cars == shared
    assert shared_mean_trips(spec, private_with_mean(p)) == pytest.approx(target)


def test_zero_cars_has_no_shared_car():
    with pytest.raises(ValueError):
        shared_mean_trips(SubstitutionSpec(0), private_with_mean([0, 1]))


def test_recenter_to_target():
    p = np.zeros(49)
    p[[1, 2, 3, 4]] = [0.2, 0.4, 0.3, 0.1]
    q = recenter_ntrips(p, 11.5)
    assert abs(np.dot(np.arange(49), q) - 11.5) <= 0.01
    assert q.sum() == pytest.approx(1.0)


def test_recenter_beyond_nmax_raises():
    p = np.zeros(11)
    p[[2, 6]] = 0.5
    with pytest.raises(ValueError, match="n_max"):
        recenter_ntrips(p, 20.0)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=8).filter(lambda v: sum(v[1:]) > 0.05),
       st.floats(1.0, 10.0))
def test_recenter_hits_mean(w, rate):
    p = np.zeros(49)
    p[:len(w)] = w
    p /= p.sum()
    mean = np.dot(np.arange(49), p)
    target = mean * rate
    assume(np.flatnonzero(p).max() * rate < 48)
    q = recenter_ntrips(p, target)
    assert abs(np.dot(np.arange(49), q) - target) <= 0.01
    assert q.min() >= 0 and q.sum() == pytest.approx(1.0, abs=1e-9)


def two_slice_fixture():
    # work departures: (total 1, rank 1) 2 trips at slot 84; (total 2, rank 1) 1 trip at slot 96
    days = [day("a", (420, 440, "work_school")), day("b", (420, 440, "work_school")),
            day("c", (480, 500, "work_school"), (1000, 1020, "home"))]
    return cell(days)


def test_marginalisation_hand_computed():
    shared = derive_shared_distributions(two_slice_fixture(), SubstitutionSpec(10, 5))
    dep = shared.p_departure[("work_school",)]
    assert dep[84] == pytest.approx(2 / 3) and dep[96] == pytest.approx(1 / 3)
    assert set(shared.p_departure) == {("work_school",), ("home",)}
    assert set(shared.p_dur_dist) == {("work_school",), ("home",)}
    assert shared.ownership == "shared"


def test_rate_one_keeps_mean():
    priv = two_slice_fixture()
    shared = derive_shared_distributions(priv, SubstitutionSpec(3, 1))
    assert shared.mean_trips == pytest.approx(priv.mean_trips)


@pytest.fixture(scope="module")
def synthetic_cells():
    trips = generate_synthetic_diaries(SyntheticDiaryConfig({"metropolis": 400}), 9)
    return estimate_distributions(trips, {t.person_day_id: 3 for t in trips})


def test_all_slices_sum_to_one(synthetic_cells):
    for ds in synthetic_cells.values():
        assert ds.p_ntrips.sum() == pytest.approx(1, abs=1e-9)
        for p in all_slices(ds):
            assert p.sum() == pytest.approx(1, abs=1e-9)
        shared = derive_shared_distributions(ds, SubstitutionSpec(50_000, 5))
        for p in all_slices(shared):
            assert p.sum() == pytest.approx(1, abs=1e-9)


def test_shared_marginalises_private_trip_weighted(synthetic_cells):
    ds = synthetic_cells[("metropolis", 3, "weekday")]
    shared = derive_shared_distributions(ds, SubstitutionSpec(50_000, 5))
    for (dest,), p in shared.p_departure.items():
        num = sum(ds.n_obs[("departure", k)] * v for k, v in ds.p_departure.items() if len(k) == 3 and k[0] == dest)
        den = sum(ds.n_obs[("departure", k)] for k in ds.p_departure if len(k) == 3 and k[0] == dest)
        assert np.allclose(p, num / den, atol=1e-12)


@pytest.mark.parametrize("rate", [1, 2, 5, 8])
def test_shared_mean_is_rate_times_private(synthetic_cells, rate):
    ds = synthetic_cells[("metropolis", 3, "weekday")]
    shared = derive_shared_distributions(ds, SubstitutionSpec(100_000, rate))
    assert shared.mean_trips == pytest.approx(ds.mean_trips * rate, rel=0.01)


def test_roundtrip(tmp_path, synthetic_cells):
    ds = synthetic_cells[("metropolis", None, "saturday")]
    for d in (ds, derive_shared_distributions(ds, SubstitutionSpec(1000))):
        back = load(save(d, tmp_path))
        assert back.cell == d.cell and np.array_equal(back.p_ntrips, d.p_ntrips)
        for a, b in ((back.p_departure, d.p_departure), (back.p_dur_dist, d.p_dur_dist)):
            assert a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
        assert back.n_obs == d.n_obs
