import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evshare.clustering import (DistanceMatrix, MemoryLimitError, cluster_stats, cut_dendrogram, distance_matrix,
                                hac_ward, levenshtein, read_distance_matrix, subsample, write_distance_matrix)
from evshare.diaries import DaySequence, TripRecord, build_sequences

from oracles import dendrogram_sets, edit_distance, ward_exhaustive, ward_height


def seq(blocks, pid="x"):
    return DaySequence(pid, "metropolis", "weekday", np.asarray(blocks, dtype=np.uint8))


def moving(*spans):
    b = np.zeros(288, dtype=np.uint8)
    for s, e in spans:
        b[s:e] = 1
    return b


# -- edit distance ------------------------------------------------------------

def test_identical_is_zero():
    a = moving((10, 40))
    assert levenshtein(seq(a), seq(a.copy())) == 0


def test_kitten_sitting():
    assert levenshtein("kitten", "sitting") == 3


def test_single_trip_vs_idle_day():
    assert levenshtein(seq(np.zeros(288)), seq(moving((96, 102)))) == 6


def test_shifted_block_cheaper_than_substitution():
    # moving a 6-block trip by one block: one deletion plus one insertion
    assert levenshtein(seq(moving((96, 102))), seq(moving((97, 103)))) == 2


@given(st.lists(st.integers(0, 1), max_size=40), st.lists(st.integers(0, 1), max_size=40))
def test_matches_dp_oracle_binary(a, b):
    assert levenshtein(np.array(a), np.array(b)) == edit_distance(a, b)


@given(st.text("abc", max_size=30), st.text("abc", max_size=30))
def test_matches_dp_oracle_text(a, b):
    assert levenshtein(a, b) == edit_distance(a, b)


@given(st.lists(st.integers(0, 1), min_size=60, max_size=60), st.lists(st.integers(0, 1), min_size=60, max_size=60),
       st.lists(st.integers(0, 1), min_size=60, max_size=60))
def test_metric_axioms(a, b, c):
    a, b, c = map(np.array, (a, b, c))
    ab, bc, ac = levenshtein(a, b), levenshtein(b, c), levenshtein(a, c)
    assert ab == levenshtein(b, a)
    assert (ab == 0) == (a == b).all()
    assert ac <= ab + bc


# -- distance matrix ----------------------------------------------------------

def test_identical_sequences_zero_matrix():
    dm = distance_matrix([seq(moving((5, 9)))] * 3)
    assert dm.n == 3 and not dm.d.any()


def test_two_sequences_one_entry():
    a, b = seq(moving((5, 9))), seq(moving((100, 130)))
    dm = distance_matrix([a, b])
    assert dm.d.tolist() == [levenshtein(a, b)]


def test_matrix_matches_double_loop():
    rng = np.random.default_rng(0)
    seqs = [seq(rng.random(288) < rng.uniform(0.02, 0.3)) for _ in range(10)]
    dm = distance_matrix(seqs).square()
    for i in range(10):
        for j in range(10):
            assert dm[i, j] == (0 if i == j else edit_distance(seqs[i].blocks, seqs[j].blocks))


def test_memory_limit_error_advises_partitioning():
    with pytest.raises(MemoryLimitError, match="partition"):
        distance_matrix([seq(moving((1, 2)))] * 100, memory_limit=1000)


def test_binary_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    seqs = [seq(rng.random(288) < 0.1) for _ in range(6)]
    dm = distance_matrix(seqs)
    write_distance_matrix(dm, tmp_path / "d.lvdm")
    raw = (tmp_path / "d.lvdm").read_bytes()
    assert raw[:4] == b"LVDM" and int.from_bytes(raw[8:16], "little") == 6
    back = read_distance_matrix(tmp_path / "d.lvdm")
    assert back.n == 6 and np.array_equal(back.d, dm.d)


# -- Ward ---------------------------------------------------------------------

def condensed(D):
    return DistanceMatrix(len(D), D[np.triu_indices(len(D), 1)])


def random_metric(rng, n, dim=3):
    X = rng.normal(size=(n, dim))
    return np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))


def test_two_leaves():
    dg = hac_ward(DistanceMatrix(2, np.array([7.0])))
    assert dg.merges == [(0, 1, 7.0, 2)]


@pytest.mark.parametrize("seed", range(10))
def test_matches_exhaustive_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    D = random_metric(rng, n) if seed % 2 else rng.uniform(1, 10, size=(n, n))
    D = np.triu(D, 1) + np.triu(D, 1).T
    got = dendrogram_sets(hac_ward(condensed(D)).merges, n)
    want = ward_exhaustive(D)
    assert [frozenset([A, B]) for A, B, _ in got] == [frozenset([A, B]) for A, B, _ in want]
    assert np.allclose([h for *_, h in got], [h for *_, h in want], rtol=1e-9)


def test_oracle_height_for_singletons_is_distance():
    D = np.array([[0, 4.0], [4.0, 0]])
    assert ward_height(D, frozenset([0]), frozenset([1])) == pytest.approx(4.0)


def test_scipy_agrees():
    hierarchy = pytest.importorskip("scipy.cluster.hierarchy")
    rng = np.random.default_rng(5)
    D = random_metric(rng, 30)
    Z = hierarchy.linkage(D[np.triu_indices(30, 1)], "ward")
    ours = hac_ward(condensed(D)).as_array()
    assert np.allclose(np.sort(Z[:, 2]), np.sort(ours[:, 2]))


def two_groups():
    D = np.full((8, 8), 100.0)
    rng = np.random.default_rng(2)
    for g in (range(0, 4), range(4, 8)):
        for i in g:
            for j in g:
                D[i, j] = 0 if i == j else 1.0 + 0.1 * rng.random()
    return (D + D.T) / 2


def test_two_groups_merge_internally_first():
    dg = hac_ward(condensed(two_groups()))
    for A, B, _ in dendrogram_sets(dg.merges[:6], 8):
        leaves = A | B
        assert leaves <= set(range(4)) or leaves <= set(range(4, 8))


def test_cut_recovers_groups():
    labels = cut_dendrogram(hac_ward(condensed(two_groups())), 2)
    assert len(set(labels[:4])) == 1 and len(set(labels[4:])) == 1 and labels[0] != labels[4]


def test_cut_extremes():
    dg = hac_ward(condensed(two_groups()))
    assert sorted(cut_dendrogram(dg, 8)) == list(range(1, 9))
    assert set(cut_dendrogram(dg, 1)) == {1}
    with pytest.raises(ValueError):
        cut_dendrogram(dg, 9)
    with pytest.raises(ValueError):
        cut_dendrogram(dg, 0)


def test_cut_orders_by_value():
    labels = cut_dendrogram(hac_ward(condensed(two_groups())), 2, order_by=[1] * 4 + [50] * 4)
    assert labels[4] == 1 and labels[0] == 2


@given(st.integers(0, 10_000), st.integers(3, 12))
def test_cut_refinement(seed, n):
    rng = np.random.default_rng(seed)
    dg = hac_ward(condensed(random_metric(rng, n)))
    prev = cut_dendrogram(dg, 1)
    for k in range(2, n + 1):
        cur = cut_dendrogram(dg, k)
        assert len(set(cur)) == k
        for c in set(cur):
            assert len(set(prev[cur == c])) == 1
        prev = cur


@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    n = 9
    D = random_metric(rng, n)
    perm = rng.permutation(n)
    a = dendrogram_sets(hac_ward(condensed(D)).merges, n)
    b = dendrogram_sets(hac_ward(condensed(D[np.ix_(perm, perm)])).merges, n)
    back = [frozenset([frozenset(perm[list(A)]), frozenset(perm[list(B)])]) for A, B, _ in b]
    assert back == [frozenset([A, B]) for A, B, _ in a]


# -- statistics ---------------------------------------------------------------

def test_stats_single_trip():
    t = TripRecord("a", 480, 500, 10.0, "work_school", "rural", "weekday")
    seqs = build_sequences([t])
    (s,) = cluster_stats([1], seqs, [t], "rural")
    assert (s.n_sequences, s.mean_daily_distance_km, s.mean_trip_distance_km, s.mean_trip_duration_min) == \
        (1, 10.0, 10.0, 20.0)


def test_stats_empty_cluster_row():
    t = TripRecord("a", 480, 500, 10.0, "work_school", "rural", "weekday")
    stats = cluster_stats([1], build_sequences([t]), [t], "rural", cluster_ids=[1, 2])
    assert stats[1].n_sequences == 0 and stats[1].mean_daily_distance_km is None


def test_subsample_is_seeded_and_stratified():
    seqs = [DaySequence(f"{loc}{i}", loc, "weekday", np.zeros(288, np.uint8))
            for loc in ("rural", "metropolis") for i in range(50)]
    a = subsample(seqs, 10, 4)
    assert [s.person_day_id for s in a] == [s.person_day_id for s in subsample(seqs, 10, 4)]
    assert sum(s.location_type == "rural" for s in a) == 10
