"""Edit-distance clustering of 288-block day sequences.

Pairwise Levenshtein distances, Ward agglomeration through the
Lance-Williams recursion, dendrogram cuts and per-cluster usage statistics.
"""
from __future__ import annotations

import logging
import struct
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .diaries import DaySequence, TripRecord

log = logging.getLogger(__name__)

DEFAULT_MEMORY_LIMIT = 2 * 1024**3


class MemoryLimitError(RuntimeError):
    pass


def _codes(x) -> np.ndarray:
    if isinstance(x, DaySequence):
        return x.blocks.astype(np.int64)
    if isinstance(x, str):
        return np.frombuffer(x.encode("utf-32-le"), dtype=np.uint32).astype(np.int64)
    return np.asarray(x, dtype=np.int64)


@njit(cache=True)
def _lev_band(a, b, band):
    n, m = a.shape[0], b.shape[0]
    inf = n + m + 1
    prev = np.full(m + 1, inf, dtype=np.int64)
    cur = np.full(m + 1, inf, dtype=np.int64)
    for j in range(min(m, band) + 1):
        prev[j] = j
    for i in range(1, n + 1):
        lo = max(1, i - band)
        hi = min(m, i + band)
        for j in range(m + 1):
            cur[j] = inf
        if i <= band:
            cur[0] = i
        for j in range(lo, hi + 1):
            best = prev[j - 1] + (0 if a[i - 1] == b[j - 1] else 1)
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


@njit(cache=True)
def _lev_fast(a, b):
    n, m = a.shape[0], b.shape[0]
    if n != m:
        return _lev_band(a, b, max(n, m))
    ham = 0
    for i in range(n):
        if a[i] != b[i]:
            ham += 1
    if ham <= 1:
        return ham
    # an alignment drifting k diagonals away costs >= 2k, so the optimum
    # (<= ham) stays within ham // 2 of the main diagonal
    return _lev_band(a, b, ham // 2)


@njit(cache=True)
def _all_pairs(mat):
    n = mat.shape[0]
    out = np.empty(n * (n - 1) // 2, dtype=np.int64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            out[k] = _lev_fast(mat[i], mat[j])
            k += 1
    return out


def levenshtein(a, b) -> int:
    """Edit distance (unit insert/delete/substitute) between two sequences.

    Accepts :class:`DaySequence`, strings or integer arrays.
    """
    return int(_lev_fast(_codes(a), _codes(b)))


def levenshtein_reference(a, b) -> int:
    """Plain quadratic dynamic program, kept as an independent check."""
    a, b = list(_codes(a)), list(_codes(b))
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i]
        for j, y in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


# -- distance matrix -------------------------------------------------------

@dataclass
class DistanceMatrix:
    n: int
    d: np.ndarray  # condensed upper triangle, row-major (i<j)

    def square(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n, 1)
        out[iu] = self.d
        out.T[iu] = self.d
        return out

    def __getitem__(self, ij):
        i, j = ij
        if i == j:
            return 0
        if i > j:
            i, j = j, i
        return self.d[self.n * i - i * (i + 1) // 2 + (j - i - 1)]


def memory_estimate(n: int) -> int:
    """Bytes for the condensed matrix plus the dense working copy of HAC."""
    return 8 * n * (n - 1) // 2 + 8 * n * n


def distance_matrix(seqs: Sequence, memory_limit: int = DEFAULT_MEMORY_LIMIT) -> DistanceMatrix:
    n = len(seqs)
    if n < 2:
        raise ValueError("need at least two sequences")
    need = memory_estimate(n)
    if need > memory_limit:
        raise MemoryLimitError(
            f"{n} sequences need ~{need / 1024**3:.1f} GiB (limit {memory_limit / 1024**3:.1f} GiB); "
            "partition by location type or sub-sample before clustering")
    codes = [_codes(s) for s in seqs]
    if len({len(c) for c in codes}) == 1:
        d = _all_pairs(np.stack(codes))
    else:
        d = np.array([_lev_fast(codes[i], codes[j]) for i in range(n) for j in range(i + 1, n)],
                     dtype=np.int64)
    return DistanceMatrix(n, d.astype(np.float64))


_DM_MAGIC = b"LVDM"


def write_distance_matrix(dm: DistanceMatrix, path: str | Path):
    """Binary layout, little-endian: b"LVDM", u16 version=1, u16 dtype
    (1 = uint16 entries), u64 n, then n(n-1)/2 uint16 entries, row-major
    upper triangle."""
    if dm.d.size and dm.d.max() > 0xFFFF:
        raise ValueError("distance exceeds uint16 range")
    with open(path, "wb") as fh:
        fh.write(_DM_MAGIC + struct.pack("<HHQ", 1, 1, dm.n))
        fh.write(dm.d.astype("<u2").tobytes())


def read_distance_matrix(path: str | Path) -> DistanceMatrix:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:4] != _DM_MAGIC:
            raise ValueError(f"{path}: not a distance-matrix file")
        version, dtype, n = struct.unpack("<HHQ", head[4:])
        if version != 1 or dtype != 1:
            raise ValueError(f"{path}: unsupported version/dtype {version}/{dtype}")
        d = np.frombuffer(fh.read(), dtype="<u2")
    if d.size != n * (n - 1) // 2:
        raise ValueError(f"{path}: truncated ({d.size} entries for n={n})")
    return DistanceMatrix(int(n), d.astype(np.float64))


# -- Ward agglomeration ----------------------------------------------------

@dataclass
class Dendrogram:
    merges: list[tuple[int, int, float, int]]  # (id_a, id_b, height, size); new cluster id = n + step
    leaf_count: int

    def as_array(self) -> np.ndarray:
        """scipy-compatible linkage matrix."""
        return np.array([[a, b, h, s] for a, b, h, s in self.merges], dtype=float).reshape(-1, 4)


def hac_ward(dm: DistanceMatrix, squared: bool = True) -> Dendrogram:
    """Ward agglomeration via Lance-Williams.

    With ``squared`` (default) the recursion runs on squared distances and
    heights are reported as square roots, i.e. the usual Ward convention where
    two singletons merge at their distance. Ties go to the pair with the
    lowest (row, column) index, where a cluster's row is its smallest leaf.
    """
    n = dm.n
    D = dm.square()
    if squared:
        D = D * D
    np.fill_diagonal(D, np.inf)
    size = np.ones(n)
    ids = np.arange(n)
    active = np.ones(n, dtype=bool)
    upper = np.triu(np.ones((n, n), dtype=bool), 1)
    Du = np.where(upper, D, np.inf)
    nn = np.argmin(Du, axis=1) if n > 1 else np.zeros(1, dtype=int)
    nn_d = Du[np.arange(n), nn] if n > 1 else np.full(1, np.inf)
    nn_d[-1] = np.inf
    del Du, upper

    def refresh(k):
        row = D[k, k + 1:]
        if row.size == 0:
            nn_d[k] = np.inf
            return
        j = int(np.argmin(row))
        nn[k] = k + 1 + j
        nn_d[k] = row[j]

    merges = []
    for step in range(n - 1):
        i = int(np.argmin(nn_d))
        j = int(nn[i])
        dij = D[i, j]
        ni, nj = size[i], size[j]
        merges.append((int(min(ids[i], ids[j])), int(max(ids[i], ids[j])),
                       float(np.sqrt(dij) if squared else dij), int(ni + nj)))
        others = active.copy()
        others[[i, j]] = False
        nk = size[others]
        new = ((ni + nk) * D[i, others] + (nj + nk) * D[j, others] - nk * dij) / (ni + nj + nk)
        D[i, others] = new
        D[others, i] = new
        D[j, :] = np.inf
        D[:, j] = np.inf
        active[j] = False
        size[i] = ni + nj
        ids[i] = n + step
        nn_d[j] = np.inf
        refresh(i)
        for k in np.flatnonzero(active[:i]):
            if nn[k] == i or nn[k] == j:
                refresh(k)
            elif D[k, i] < nn_d[k] or (D[k, i] == nn_d[k] and i < nn[k]):
                nn[k], nn_d[k] = i, D[k, i]
        for k in np.flatnonzero(active[i + 1:j]) + i + 1:
            if nn[k] == j:
                refresh(k)
    heights = [m[2] for m in merges]
    if any(b < a - 1e-9 * max(1.0, abs(a)) for a, b in zip(heights, heights[1:])):
        warnings.warn("non-monotone merge heights in Ward dendrogram", RuntimeWarning, stacklevel=2)
    return Dendrogram(merges, n)


def _components(dg: Dendrogram, n_merges: int) -> np.ndarray:
    n = dg.leaf_count
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step, (a, b, _, _) in enumerate(dg.merges[:n_merges]):
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    return np.array([find(x) for x in range(n)])


def cut_dendrogram(dg: Dendrogram, k: int, order_by: Sequence[float] | None = None) -> np.ndarray:
    """Labels 1..k obtained by undoing the k-1 highest merges.

    With ``order_by`` (one value per leaf, e.g. daily distance) label 1 is the
    cluster with the largest mean value; otherwise clusters are numbered by
    their smallest leaf.
    """
    n = dg.leaf_count
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    roots = _components(dg, n - k)
    groups = defaultdict(list)
    for leaf, r in enumerate(roots):
        groups[r].append(leaf)
    members = list(groups.values())
    if order_by is not None:
        vals = np.asarray(order_by, dtype=float)
        members.sort(key=lambda g: (-vals[g].mean(), min(g)))
    else:
        members.sort(key=min)
    labels = np.empty(n, dtype=int)
    for lab, g in enumerate(members, start=1):
        labels[g] = lab
    return labels


# -- statistics ------------------------------------------------------------

@dataclass
class ClusterStats:
    cluster_id: int
    location_type: str
    n_sequences: int
    mean_daily_distance_km: float | None
    mean_trip_distance_km: float | None
    mean_trip_duration_min: float | None
    mean_trips_per_day: float | None


def daily_distance(seqs: Sequence[DaySequence], trips: Sequence[TripRecord]) -> np.ndarray:
    tot = defaultdict(float)
    for t in trips:
        tot[t.person_day_id] += t.distance_km
    return np.array([tot[s.person_day_id] for s in seqs])


def cluster_stats(labels: Sequence[int], seqs: Sequence[DaySequence], trips: Sequence[TripRecord],
                  location_type: str = "", cluster_ids: Sequence[int] | None = None) -> list[ClusterStats]:
    by_day = defaultdict(list)
    for t in trips:
        by_day[t.person_day_id].append(t)
    ids = sorted(set(int(x) for x in labels) | set(cluster_ids or []))
    out = []
    for c in ids:
        days = [s.person_day_id for s, lab in zip(seqs, labels) if lab == c]
        ts = [t for d in days for t in by_day[d]]
        if not days:
            out.append(ClusterStats(c, location_type, 0, None, None, None, None))
            continue
        out.append(ClusterStats(
            c, location_type, len(days),
            sum(t.distance_km for t in ts) / len(days),
            sum(t.distance_km for t in ts) / len(ts) if ts else None,
            sum(t.duration_min for t in ts) / len(ts) if ts else None,
            len(ts) / len(days),
        ))
    return out


def subsample(seqs: Sequence[DaySequence], max_per_stratum: int, seed: int) -> list[DaySequence]:
    """Stratified (location, day type) random subset, original order kept."""
    strata = defaultdict(list)
    for i, s in enumerate(seqs):
        strata[(s.location_type, s.day_type)].append(i)
    rng = np.random.default_rng(seed)
    keep = []
    for key in sorted(strata):
        idx = strata[key]
        if len(idx) > max_per_stratum:
            idx = sorted(rng.choice(idx, size=max_per_stratum, replace=False).tolist())
        keep.extend(idx)
    return [seqs[i] for i in sorted(keep)]
