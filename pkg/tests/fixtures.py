"""Hand-built distribution sets and small configurations shared by tests."""
from __future__ import annotations

import numpy as np

from evshare.diaries import DESTINATIONS, N_BLOCKS
from evshare.mobility import N_DIST, N_DUR, DistributionSet, distance_bin, duration_bin


def onehot(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def uniform_slots(slots):
    v = np.zeros(N_BLOCKS)
    v[list(slots)] = 1.0 / len(slots)
    return v


def dur_dist(minutes, km):
    m = np.zeros((N_DUR, N_DIST))
    m[duration_bin(minutes), distance_bin(km)] = 1.0
    return m


def hand_set(p_ntrips, plan, ownership="private", n_max=48):
    """``plan[total] = [(destination, departure slots), ...]`` one entry per
    rank; every trip lasts 20 minutes and covers 10 km."""
    p = np.zeros(n_max + 1)
    for k, v in p_ntrips.items():
        p[k] = v
    ds = DistributionSet("metropolis", 3, "weekday", ownership, 100, p)
    for total, ranks in plan.items():
        for rank, (dest, slots) in enumerate(ranks, start=1):
            ds.p_destination[(total, rank)] = onehot(len(DESTINATIONS), DESTINATIONS.index(dest))
            ds.p_departure[(dest, total, rank)] = uniform_slots(slots)
            ds.p_dur_dist[(dest, total)] = dur_dist(20, 10)
    return ds


# p_ntrips and departure windows far enough apart that no draw is ever
# rejected, so sampled frequencies should track the tables
FIDELITY_NTRIPS = {0: 0.1, 1: 0.2, 2: 0.4, 3: 0.3}
FIDELITY_PLAN = {
    1: [("home", range(220, 228))],
    2: [("work_school", range(84, 92)), ("home", range(220, 228))],
    3: [("work_school", range(84, 92)), ("leisure", range(150, 158)), ("home", range(220, 228))],
}


def fidelity_set():
    return hand_set(FIDELITY_NTRIPS, FIDELITY_PLAN)


def tv(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def sampled_frequencies(sched, days):
    """Empirical p_ntrips and departure slices keyed (dest, total, rank)."""
    per_day = [[] for _ in range(days)]
    for t in sched.trips:
        per_day[t.start // N_BLOCKS].append(t)
    counts = np.zeros(49)
    slices = {}
    for ts in per_day:
        counts[len(ts)] += 1
        for rank, t in enumerate(ts, start=1):
            key = (t.destination, len(ts), rank)
            slices.setdefault(key, np.zeros(N_BLOCKS))[t.start % N_BLOCKS] += 1
    return counts / days, {k: v / v.sum() for k, v in slices.items()}
