"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line. Run with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import json
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from evshare.clustering import cut_dendrogram, hac_ward, levenshtein
from evshare.config import demo_config
from evshare.lp import duality_gap, export_mps, parse_mps, solve
from evshare.pipeline import Pipeline
from evshare.synth import (VehicleParams, default_temperature, driving_consumption, grid_availability, grid_demand,
                           sample_mobility)

from fixtures import FIDELITY_NTRIPS, fidelity_set, sampled_frequencies, tv
from oracles import dendrogram_sets, edit_distance, ward_exhaustive
from test_clustering import condensed, random_metric
from test_lp import float_lp, oracle, random_lp
import test_power as hand


def verdict(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


# -- study on the demo fixture, shared by criteria 7-11 -----------------------

@pytest.fixture(scope="session")
def demo(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo_a")
    t0 = time.perf_counter()
    res = Pipeline(demo_config(), out).study(hydrogen=[False, True])
    elapsed = time.perf_counter() - t0
    kpis = {(r.strategy, r.uptake, r.hydrogen): r.kpis for r in res}
    return out, kpis, elapsed


# -- 1 ------------------------------------------------------------------------

def test_criterion_1_edit_distance(capsys):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(1000):
        a = rng.integers(0, 2, rng.integers(0, 51)).astype(np.uint8)
        b = rng.integers(0, 2, rng.integers(0, 51)).astype(np.uint8)
        mismatches += levenshtein(a, b) != edit_distance(a, b)
    axioms = 0
    for _ in range(200):
        a, b, c = (rng.integers(0, 2, rng.integers(0, 51)).astype(np.uint8) for _ in range(3))
        ab, bc, ac = levenshtein(a, b), levenshtein(b, c), levenshtein(a, c)
        same = len(a) == len(b) and bool((a == b).all())
        axioms += not (ab == levenshtein(b, a) and (ab == 0) == same and ac <= ab + bc and ab >= 0)
    dt = time.perf_counter() - t0
    verdict(capsys, 1, mismatches == 0 and axioms == 0 and dt < 10,
            f"{mismatches} oracle mismatches, {axioms} axiom violations, {dt:.2f} s")


# -- 2 ------------------------------------------------------------------------

def test_criterion_2_ward_oracle(capsys):
    rng = np.random.default_rng(2)
    bad_tree = bad_cut = 0
    for i in range(50):
        n = int(rng.integers(2, 9))
        D = random_metric(rng, n) if i % 2 else rng.uniform(1, 10, (n, n))
        D = np.triu(D, 1) + np.triu(D, 1).T
        dg = hac_ward(condensed(D))
        got, want = dendrogram_sets(dg.merges, n), ward_exhaustive(D)
        same = [frozenset([A, B]) for A, B, _ in got] == [frozenset([A, B]) for A, B, _ in want]
        close = np.allclose([h for *_, h in got], [h for *_, h in want], rtol=1e-9)
        bad_tree += not (same and close)
        prev = cut_dendrogram(dg, 1)
        for k in range(2, n + 1):
            cur = cut_dendrogram(dg, k)
            bad_cut += len(set(cur)) != k or any(len(set(prev[cur == c])) != 1 for c in set(cur))
            prev = cur
    verdict(capsys, 2, bad_tree == 0 and bad_cut == 0, f"{bad_tree} tree mismatches, {bad_cut} refinement failures")


# -- 3 ------------------------------------------------------------------------

def test_criterion_3_distribution_fidelity(capsys):
    days = 10_000
    ds = fidelity_set()
    p, slices = sampled_frequencies(sample_mobility(ds, days, 2024), days)
    want = np.zeros(49)
    for k, v in FIDELITY_NTRIPS.items():
        want[k] = v
    tv_n = tv(p, want)
    tv_s = max(tv(q, ds.p_departure[key]) for key, q in slices.items())
    ok = tv_n <= 0.02 and tv_s <= 0.05 and set(slices) == set(ds.p_departure)
    verdict(capsys, 3, ok, f"TV(p_ntrips) {tv_n:.4f}, worst slice TV {tv_s:.4f} over {len(slices)} slices")


# -- 4 ------------------------------------------------------------------------

def test_criterion_4_energy_conservation(capsys):
    worst, soc_bad, avail_bad = 0.0, 0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        vp = VehicleParams(battery_kwh=float(rng.choice([40.0, 58.0, 100.0])),
                           charge_efficiency=float(rng.uniform(0.8, 1.0)))
        sched = sample_mobility(fidelity_set(), 7, rng)
        cons = driving_consumption(sched, vp, default_temperature(168, int(rng.integers(0, 300)) * 24))
        av = grid_availability(sched, None, "private", rng)
        d = grid_demand(cons, av, vp, ("immediate", "balanced")[seed % 2], cyclic=seed % 4 < 2)
        worst = max(worst, abs(d.demand_kwh.sum() * vp.charge_efficiency - cons.sum() - (d.soc_kwh[-1] - d.soc_start)))
        soc_bad += not (d.soc_kwh.min() >= 0 and d.soc_kwh.max() <= vp.battery_kwh + 1e-9)
        avail_bad += bool(av.rating_kw[sched.driving_mask()].any() or av.plugged[sched.driving_mask()].any())
    verdict(capsys, 4, worst <= 1e-6 and soc_bad == 0 and avail_bad == 0,
            f"worst imbalance {worst:.2e} kWh, {soc_bad} SoC violations, {avail_bad} plugged while driving")


# -- 5 ------------------------------------------------------------------------

def test_criterion_5_lp(capsys):
    obj_bad = gap_bad = solved = 0
    for seed in range(100):
        p = random_lp(1000 + seed)
        want = oracle(p)
        sol = solve(p, "embedded")
        if want is None:
            obj_bad += sol.status != "infeasible"
            continue
        solved += 1
        obj_bad += not (sol.optimal and abs(sol.objective - want) <= 1e-6)
        gap_bad += sol.optimal and duality_gap(p, sol) > 1e-7
    worst_rt = 0.0
    for seed in range(10):
        p = float_lp(seed)
        a, b = solve(p), solve(parse_mps(export_mps(p)[0]))
        worst_rt = max(worst_rt, abs(b.objective - a.objective) / max(1.0, abs(a.objective)))
    verdict(capsys, 5, obj_bad == 0 and gap_bad == 0 and worst_rt <= 1e-5,
            f"{solved} feasible of 100, {obj_bad} objective mismatches, {gap_bad} duality gaps, "
            f"MPS round trip rel {worst_rt:.1e}")


# -- 6 ------------------------------------------------------------------------

def test_criterion_6_hand_fixtures(capsys):
    checks = {
        "1 h": (hand.solve_cost(hand.gas_only(), hand.toy_params(), hand.flat(1)).objective_eur, 600.0),
        "1 h floor": (hand.solve_cost(hand.ModelConfig("smart", renewable_floor=0.8,
                                                       technologies=["CCGT", "wind_onshore"], storages=[]),
                                      hand.toy_params(wind=True), hand.flat(1, wind_onshore=[0.5])).objective_eur,
                      760.0),
        "24 h smart": (hand.solve_cost(hand.gas_only(), hand.toy_params(), hand.flat(24),
                                       [hand.private_fleet()]).objective_eur, hand.smart_day_optimum(20.0, 23)),
        "24 h bidirectional": (hand.solve_cost(hand.gas_only("bidirectional"), hand.toy_params(), hand.flat(24),
                                               [hand.private_fleet()]).objective_eur,
                               hand.smart_day_optimum(20.0, 23)),
        "24 h uncontrolled": (hand.solve_cost(hand.gas_only("uncontrolled"), hand.toy_params(), hand.flat(24),
                                              [hand.private_fleet(demand_hour=9)]).objective_eur,
                              hand.F_GAS * 24 / 8760 * (10 + 20 / 0.9) + hand.V_GAS * (240 + 20 / 0.9)),
    }
    rel = {k: abs(got - want) / want for k, (got, want) in checks.items()}
    verdict(capsys, 6, max(rel.values()) <= 1e-9, f"worst relative error {max(rel.values()):.1e} over {len(rel)}")


# -- 7 ------------------------------------------------------------------------

def test_criterion_7_strategy_ordering(capsys, demo):
    _, kpis, elapsed = demo
    gaps = []
    for u in ("low", "high"):
        for role in ("reference_cost_eur_per_a", "scenario_cost_eur_per_a"):
            c = {s: kpis[(s, u, False)][role] for s in ("uncontrolled", "smart", "bidirectional")}
            gaps += [c["uncontrolled"] - c["smart"], c["smart"] - c["bidirectional"]]
    ok = min(gaps) >= 0 and elapsed <= 600
    verdict(capsys, 7, ok, f"smallest gap {min(gaps) / 1e6:.1f} MEUR/a, study took {elapsed:.0f} s")


# -- 8 ------------------------------------------------------------------------

def test_criterion_8_carsharing_direction(capsys, demo):
    _, kpis, _ = demo
    d = {(s, u): kpis[(s, u, False)]["delta_cost_eur_per_a"] for s in ("smart", "bidirectional")
         for u in ("low", "high")}
    ok = (all(v >= 0 for v in d.values())
          and all(d[("bidirectional", u)] >= d[("smart", u)] for u in ("low", "high"))
          and all(d[(s, "high")] >= d[(s, "low")] for s in ("smart", "bidirectional")))
    verdict(capsys, 8, ok, ", ".join(f"{s}/{u} {v / 1e6:.1f}" for (s, u), v in d.items()) + " MEUR/a")


# -- 9 ------------------------------------------------------------------------

def test_criterion_9_renewable_floor(capsys, demo):
    out, _, _ = demo
    worst_share, worst_resid, n = np.inf, 0.0, 0
    for f in sorted((out / "solve").rglob("summary.json")):
        s = json.loads(f.read_text())
        worst_share = min(worst_share, s["renewable_share"] - s["renewable_floor"])
        worst_resid = max(worst_resid, s["balance_residual_max_mwh"])
        n += 1
    verdict(capsys, 9, n > 0 and worst_share >= 0 and worst_resid <= 1e-3,
            f"{n} solutions, min share margin {worst_share:.4f}, max residual {worst_resid:.1e} MWh")


# -- 10 -----------------------------------------------------------------------

def test_criterion_10_hydrogen_direction(capsys, demo):
    _, kpis, _ = demo
    pairs = {u: (kpis[("bidirectional", u, False)]["delta_cost_per_car_eur_per_a"],
                 kpis[("bidirectional", u, True)]["delta_cost_per_car_eur_per_a"]) for u in ("low", "high")}
    ok = all(h2 <= base + 1e-6 for base, h2 in pairs.values())
    verdict(capsys, 10, ok, ", ".join(f"{u} {b:.2f} -> {h:.2f}" for u, (b, h) in pairs.items()) + " EUR/car/a")


# -- 11 -----------------------------------------------------------------------

def test_criterion_11_determinism(capsys, demo, tmp_path):
    # second run through the CLI in a fresh interpreter with another hash seed
    out, _, _ = demo
    env = dict(os.environ, PYTHONHASHSEED="12345")
    subprocess.run([sys.executable, "-m", "evshare.cli", "demo", "--out", str(tmp_path)], env=env, check=True,
                   capture_output=True)

    def files(root: Path):
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}

    a, b = files(out), files(tmp_path)
    differ = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    verdict(capsys, 11, not differ, f"{len(a)} files compared, {len(differ)} differ")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
