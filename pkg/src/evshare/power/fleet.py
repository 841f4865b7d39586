"""Spreading the BEV fleet over representative profiles."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

UPTAKES = ("none", "low", "high")
FRAMEWORKS = ("shared_only", "shared_plus_other")

Cell = tuple[str, int]


def default_cell_shares() -> dict[Cell, float]:
    """Fixture shares: location weights times within-location cluster
    weights over clusters 3..6 (placeholders, not survey values)."""
    loc = {"metropolis": 0.10, "big_city": 0.15, "middle_city": 0.17, "small_city": 0.23, "rural": 0.35}
    clu = {3: 0.20, 4: 0.22, 5: 0.20, 6: 0.38}
    return {(l, c): lw * cw for l, lw in loc.items() for c, cw in clu.items()}


def default_uptake_cells() -> dict[str, set[Cell]]:
    """Best reading of the uptake regimes; approximate, edit in config."""
    urban = ("metropolis", "big_city", "middle_city", "small_city")
    low = {(l, 6) for l in urban}
    high = {("metropolis", c) for c in (3, 4, 5, 6)}
    high |= {("big_city", c) for c in (4, 5, 6)}
    high |= {("middle_city", c) for c in (5, 6)}
    high |= {("small_city", 6)}
    return {"none": set(), "low": low, "high": high}


@dataclass
class FleetSpec:
    total_bevs: float = 15_000_000
    cell_shares: dict[Cell, float] = field(default_factory=default_cell_shares)
    uptake: str = "none"
    framework: str = "shared_plus_other"
    strategy: str = "smart"
    substitution_rate: float = 5.0
    v2g_cost_eur_per_mwh: float = 15.0
    uptake_cells: dict[str, set[Cell]] = field(default_factory=default_uptake_cells)

    def __post_init__(self):
        if self.uptake not in UPTAKES:
            raise ValueError(f"unknown uptake regime {self.uptake!r}")
        if self.framework not in FRAMEWORKS:
            raise ValueError(f"unknown framework {self.framework!r}")
        if self.substitution_rate <= 0:
            raise ValueError("substitution rate must be positive")
        total = sum(self.cell_shares.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"cell shares sum to {total}, not 1")
        if any(v < 0 for v in self.cell_shares.values()):
            raise ValueError("negative cell share")
        for u, cells in self.uptake_cells.items():
            missing = set(cells) - set(self.cell_shares)
            if missing:
                raise ValueError(f"uptake {u!r} names cells without a share: {sorted(missing)}")

    @property
    def substituted_cells(self) -> set[Cell]:
        return set(self.uptake_cells.get(self.uptake, set()))

    def cell_cars(self, cell: Cell) -> float:
        return self.total_bevs * self.cell_shares[cell]

    @property
    def substituted_cars(self) -> float:
        return sum(self.cell_cars(c) for c in self.substituted_cells)


@dataclass(frozen=True)
class ProfileEntry:
    profile_id: str
    location_type: str
    cluster_id: int
    ownership: str    # private | shared


def fleet_allocation(spec: FleetSpec, manifest: Iterable[ProfileEntry], role: str = "scenario",
                     reference_cells: set[Cell] | None = None) -> dict[str, float]:
    """Cars represented by each profile.

    ``role`` is ``reference`` (everyone private) or ``scenario`` (the
    uptake cells switch to shared cars at 1/substitution_rate). Under
    ``shared_only`` only the cells of ``reference_cells`` (default: the
    uptake cells) are in the fleet at all.
    """
    if role not in ("reference", "scenario"):
        raise ValueError(f"unknown role {role!r}")
    by_cell: dict[tuple[str, int, str], list[str]] = defaultdict(list)
    for e in manifest:
        by_cell[(e.location_type, e.cluster_id, e.ownership)].append(e.profile_id)
    swap = spec.substituted_cells
    if spec.framework == "shared_only":
        cells = set(reference_cells) if reference_cells is not None else swap
    else:
        cells = {c for c, s in spec.cell_shares.items() if s > 0}
    weights = {e: 0.0 for ids in by_cell.values() for e in ids}
    for cell in sorted(cells):
        cars = spec.cell_cars(cell)
        if cars <= 0:
            continue
        shared = role == "scenario" and cell in swap
        own = "shared" if shared else "private"
        ids = by_cell.get((cell[0], cell[1], own), [])
        if not ids:
            raise LookupError(f"no {own} profiles for cell {cell[0]}/cluster {cell[1]}")
        per = cars / (spec.substitution_rate if shared else 1.0) / len(ids)
        for pid in ids:
            weights[pid] = per
    return weights


def cell_shares_from_mapping(m: Mapping[str, Mapping]) -> dict[Cell, float]:
    """``{location: {cluster: share}}`` as read from a config file."""
    return {(loc, int(c)): float(v) for loc, d in m.items() for c, v in d.items()}


def cells_from_list(items: Iterable) -> set[Cell]:
    """``["metropolis/6", ...]`` or ``[["metropolis", 6], ...]``."""
    out = set()
    for it in items:
        if isinstance(it, str):
            loc, c = it.split("/")
            out.add((loc, int(c)))
        else:
            out.add((str(it[0]), int(it[1])))
    return out
