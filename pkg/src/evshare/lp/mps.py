"""Fixed-format MPS export/import and external solution files.

Sections written: NAME, ROWS, COLUMNS, RHS, RANGES, BOUNDS, ENDATA (RANGES is
always empty on export because equality and ``<=`` rows need none). Names
longer than eight characters, or containing blanks, are replaced by
positional names (``C0000001``, ``R0000001``); the mapping is returned and
written next to the file.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .problem import LpSolution, StandardFormLp

OBJ_ROW = "OBJ"


class MpsError(ValueError):
    pass


def _num(v: float) -> str:
    """Shortest representation that fits the 12-character field."""
    v = float(v)
    if v == int(v) and abs(v) < 1e11:
        return str(int(v))
    s = repr(v)
    if len(s) <= 12:
        return s
    for prec in range(12, 0, -1):
        s = f"{v:.{prec}g}"
        if len(s) <= 12:
            return s
    raise MpsError(f"cannot format {v} in 12 characters")


def _line(f1="", f2="", f3="", f4="", f5="", f6="") -> str:
    s = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        s += f"   {f5:<8}  {f6:>12}"
    return s.rstrip()


def _valid(names: list[str]) -> bool:
    return all(0 < len(n) <= 8 and not any(ch.isspace() for ch in n) for n in names)


def mps_names(p: StandardFormLp) -> tuple[list[str], list[str], dict[str, str]]:
    """Column and row names as they will appear in the file, plus a map
    file-name -> model-name. Raises on duplicate names."""
    cols, eqs, ubs = p.names()
    rows = eqs + ubs
    for kind, names in (("column", cols), ("row", rows + [OBJ_ROW])):
        seen = set()
        for nm in names:
            if nm in seen:
                raise MpsError(f"{kind} name collision: {nm!r}")
            seen.add(nm)
    if _valid(cols) and _valid(rows) and OBJ_ROW not in rows:
        return cols, rows, {}
    fcols = [f"C{j + 1:07d}" for j in range(len(cols))]
    frows = [f"R{i + 1:07d}" for i in range(len(rows))]
    mapping = dict(zip(fcols, cols)) | dict(zip(frows, rows))
    return fcols, frows, mapping


def export_mps(p: StandardFormLp, path: str | Path | None = None) -> tuple[str, dict[str, str]]:
    """Render ``p`` as fixed MPS. Returns ``(text, name_map)`` and writes the
    file (plus ``<path>.names.csv`` when names were replaced) if ``path``."""
    cols, rows, mapping = mps_names(p)
    me = len(p.b_eq)
    A = sp.vstack([p.A_eq, p.A_ub]).tocsc()
    b = np.concatenate([p.b_eq, p.b_ub])
    out = [f"NAME          {p.name}", "ROWS", _line("N", OBJ_ROW)]
    for i, r in enumerate(rows):
        out.append(_line("E" if i < me else "L", r))
    out.append("COLUMNS")
    for j, cname in enumerate(cols):
        if p.c[j] != 0:
            out.append(_line("", cname, OBJ_ROW, _num(p.c[j])))
        lo, hi = A.indptr[j], A.indptr[j + 1]
        for i, v in zip(A.indices[lo:hi], A.data[lo:hi]):
            if v != 0:
                out.append(_line("", cname, rows[i], _num(v)))
        if p.c[j] == 0 and hi == lo:
            out.append(_line("", cname, OBJ_ROW, "0"))
    out.append("RHS")
    for i, v in enumerate(b):
        if v != 0:
            out.append(_line("", "RHS", rows[i], _num(v)))
    out.append("RANGES")
    out.append("BOUNDS")
    for j, cname in enumerate(cols):
        lo, hi = p.lb[j], p.ub[j]
        if lo == hi:
            out.append(_line("FX", "BND", cname, _num(lo)))
            continue
        if lo == -np.inf and hi == np.inf:
            out.append(_line("FR", "BND", cname))
            continue
        if lo == -np.inf:
            out.append(_line("MI", "BND", cname))
        elif lo != 0 or hi < 0:
            out.append(_line("LO", "BND", cname, _num(lo)))
        if hi != np.inf:
            out.append(_line("UP", "BND", cname, _num(hi)))
    out.append("ENDATA")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
        if mapping:
            with open(f"{path}.names.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["mps_name", "model_name"])
                w.writerows(mapping.items())
    return text, mapping


SECTIONS = ("NAME", "ROWS", "COLUMNS", "RHS", "RANGES", "BOUNDS", "ENDATA", "OBJSENSE")


def parse_mps(text: str) -> StandardFormLp:
    """Read fixed or free MPS (names without blanks). ``G`` rows are negated
    into ``<=`` rows; ranged rows become one or two ``<=`` rows."""
    name = "LP"
    section = None
    row_type: dict[str, str] = {}
    row_order: list[str] = []
    obj = None
    col_index: dict[str, int] = {}
    entries: list[tuple[str, int, float]] = []
    rhs: dict[str, float] = {}
    ranges: dict[str, float] = {}
    lb: dict[int, float] = {}
    ub: dict[int, float] = {}
    sense_max = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw[0].isspace():
            tok = raw.split()
            head = tok[0].upper()
            if head not in SECTIONS:
                raise MpsError(f"line {lineno}: unknown section {tok[0]!r}")
            section = head
            if head == "NAME" and len(tok) > 1:
                name = tok[1]
            if head == "OBJSENSE" and len(tok) > 1:
                sense_max = tok[1].upper() in ("MAX", "MAXIMIZE")
            if head == "ENDATA":
                break
            continue
        tok = raw.split()
        try:
            if section == "OBJSENSE":
                sense_max = tok[0].upper() in ("MAX", "MAXIMIZE")
            elif section == "ROWS":
                kind, rname = tok[0].upper(), tok[1]
                if kind not in ("N", "E", "L", "G"):
                    raise MpsError(f"line {lineno}: bad row type {kind!r}")
                if kind == "N":
                    if obj is None:
                        obj = rname
                    row_type[rname] = "N"
                    continue
                row_type[rname] = kind
                row_order.append(rname)
            elif section == "COLUMNS":
                if "'MARKER'" in tok:
                    continue
                cname = tok[0]
                j = col_index.setdefault(cname, len(col_index))
                for k in range(1, len(tok) - 1, 2):
                    if tok[k] not in row_type:
                        raise MpsError(f"line {lineno}: unknown row {tok[k]!r}")
                    entries.append((tok[k], j, float(tok[k + 1])))
            elif section in ("RHS", "RANGES"):
                pairs = tok[1:] if len(tok) % 2 == 1 else tok
                target = rhs if section == "RHS" else ranges
                for k in range(0, len(pairs) - 1, 2):
                    if pairs[k] not in row_type:
                        raise MpsError(f"line {lineno}: unknown row {pairs[k]!r}")
                    target[pairs[k]] = float(pairs[k + 1])
            elif section == "BOUNDS":
                kind = tok[0].upper()
                cname = tok[2] if len(tok) >= 3 else tok[1]
                if cname not in col_index:
                    raise MpsError(f"line {lineno}: bound on unknown column {cname!r}")
                j = col_index[cname]
                val = float(tok[3]) if len(tok) >= 4 else None
                if kind == "UP":
                    ub[j] = val
                elif kind == "LO":
                    lb[j] = val
                elif kind == "FX":
                    lb[j] = ub[j] = val
                elif kind == "FR":
                    lb[j], ub[j] = -np.inf, np.inf
                elif kind == "MI":
                    lb[j] = -np.inf
                elif kind == "PL":
                    ub[j] = np.inf
                elif kind == "BV":
                    lb[j], ub[j] = 0.0, 1.0
                elif kind in ("LI", "UI"):
                    (lb if kind == "LI" else ub)[j] = val
                else:
                    raise MpsError(f"line {lineno}: bad bound type {kind!r}")
            else:
                raise MpsError(f"line {lineno}: data outside a section")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, MpsError):
                raise
            raise MpsError(f"line {lineno}: cannot parse {raw.strip()!r}") from exc

    n = len(col_index)
    c = np.zeros(n)
    by_row: dict[str, list[tuple[int, float]]] = {r: [] for r in row_order}
    for r, j, v in entries:
        if r == obj:
            c[j] += v
        elif row_type[r] != "N":
            by_row[r].append((j, v))
    if sense_max:
        c = -c
    eq_rows, ub_rows = [], []   # (name, [(j, v)], rhs)
    for r in row_order:
        kind, b, coef = row_type[r], rhs.get(r, 0.0), by_row[r]
        neg = [(j, -v) for j, v in coef]
        if r in ranges:
            R = ranges[r]
            if kind == "E":
                lo, hi = (b, b + abs(R)) if R >= 0 else (b - abs(R), b)
            elif kind == "L":
                lo, hi = b - abs(R), b
            else:
                lo, hi = b, b + abs(R)
            ub_rows.append((r, coef, hi))
            ub_rows.append((r + "_lo", neg, -lo))
        elif kind == "E":
            eq_rows.append((r, coef, b))
        elif kind == "L":
            ub_rows.append((r, coef, b))
        else:
            ub_rows.append((r, neg, -b))

    def mat(rows):
        data, ri, ci = [], [], []
        for i, (_, coef, _) in enumerate(rows):
            for j, v in coef:
                ri.append(i)
                ci.append(j)
                data.append(v)
        return sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))

    lbv = np.array([lb.get(j, 0.0) for j in range(n)])
    ubv = np.array([ub.get(j, np.inf) for j in range(n)])
    return StandardFormLp(c, mat(eq_rows), [b for *_, b in eq_rows], mat(ub_rows), [b for *_, b in ub_rows],
                          lbv, ubv, list(col_index), [r for r, *_ in eq_rows], [r for r, *_ in ub_rows], name)


def read_mps(path: str | Path) -> StandardFormLp:
    return parse_mps(Path(path).read_text())


def import_solution(path: str | Path, p: StandardFormLp, name_map: dict[str, str] | None = None) -> LpSolution:
    """Read an external ``variable name, value`` file (header optional) and
    map it onto ``p``'s columns. Missing columns are an error."""
    cols = p.names()[0]
    index = {nm: j for j, nm in enumerate(cols)}
    x = np.full(p.n_vars, np.nan)
    with open(path, newline="") as fh:
        sample = fh.read(2048)
        fh.seek(0)
        delim = ";" if sample.count(";") > sample.count(",") else ","
        for lineno, row in enumerate(csv.reader(fh, delimiter=delim), start=1):
            if not row or row[0].startswith("#"):
                continue
            nm = row[0].strip()
            if name_map:
                nm = name_map.get(nm, nm)
            try:
                val = float(row[1])
            except (IndexError, ValueError):
                if lineno == 1:
                    continue  # header
                raise MpsError(f"{path}:{lineno}: bad value line {row!r}")
            if nm not in index:
                raise MpsError(f"{path}:{lineno}: unknown variable {nm!r}")
            x[index[nm]] = val
    if np.isnan(x).any():
        missing = [cols[j] for j in np.flatnonzero(np.isnan(x))[:5]]
        raise MpsError(f"{path}: no value for {int(np.isnan(x).sum())} variable(s), e.g. {missing}")
    return LpSolution("optimal", x, p.objective(x), message=f"imported from {path}")


def write_solution(path: str | Path, p: StandardFormLp, sol: LpSolution):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "value"])
        for nm, v in zip(p.names()[0], sol.x):
            w.writerow([nm, repr(float(v))])
