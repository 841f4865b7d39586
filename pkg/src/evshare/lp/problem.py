from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass
class StandardFormLp:
    """min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub."""
    c: np.ndarray
    A_eq: sp.csr_matrix
    b_eq: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    col_names: list[str] | None = None
    eq_names: list[str] | None = None
    ub_names: list[str] | None = None
    name: str = "LP"

    def __post_init__(self):
        n = len(self.c)
        self.c = np.asarray(self.c, dtype=float)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        self.b_ub = np.asarray(self.b_ub, dtype=float).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float).reshape(-1)
        self.ub = np.asarray(self.ub, dtype=float).reshape(-1)
        self.A_eq = sp.csr_matrix(self.A_eq if self.A_eq is not None else (0, n), dtype=float)
        self.A_ub = sp.csr_matrix(self.A_ub if self.A_ub is not None else (0, n), dtype=float)
        if self.A_eq.shape == (0, 0):
            self.A_eq = sp.csr_matrix((0, n))
        if self.A_ub.shape == (0, 0):
            self.A_ub = sp.csr_matrix((0, n))
        self.validate()

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def validate(self):
        n = len(self.c)
        if self.A_eq.shape != (len(self.b_eq), n) or self.A_ub.shape != (len(self.b_ub), n):
            raise ValueError(f"inconsistent dimensions: c {n}, A_eq {self.A_eq.shape}, "
                             f"b_eq {len(self.b_eq)}, A_ub {self.A_ub.shape}, b_ub {len(self.b_ub)}")
        if len(self.lb) != n or len(self.ub) != n:
            raise ValueError("bounds do not match number of variables")
        for name, arr in (("c", self.c), ("b_eq", self.b_eq), ("b_ub", self.b_ub),
                          ("A_eq", self.A_eq.data), ("A_ub", self.A_ub.data)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite coefficient in {name}")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("NaN bound")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("bound is infinite on the wrong side")

    def names(self) -> tuple[list[str], list[str], list[str]]:
        cols = self.col_names or [f"x{j}" for j in range(self.n_vars)]
        eqs = self.eq_names or [f"e{i}" for i in range(len(self.b_eq))]
        ubs = self.ub_names or [f"u{i}" for i in range(len(self.b_ub))]
        return cols, eqs, ubs

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)

    def max_violation(self, x: np.ndarray) -> float:
        v = [0.0]
        if len(self.b_eq):
            v.append(np.abs(self.A_eq @ x - self.b_eq).max())
        if len(self.b_ub):
            v.append(np.maximum(self.A_ub @ x - self.b_ub, 0).max())
        v.append(np.maximum(self.lb - x, 0).max(initial=0))
        v.append(np.maximum(x - self.ub, 0).max(initial=0))
        return float(max(v))


@dataclass
class LpSolution:
    status: str                        # optimal | infeasible | unbounded | iteration_limit | error
    x: np.ndarray | None = None
    objective: float | None = None
    y_eq: np.ndarray | None = None     # d objective / d b_eq
    y_ub: np.ndarray | None = None     # d objective / d b_ub (<= 0 at optimum)
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    message: str = ""
    log: list[str] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class SolverError(RuntimeError):
    def __init__(self, message, solution: LpSolution | None = None):
        super().__init__(message)
        self.solution = solution


def dual_objective(p: StandardFormLp, sol: LpSolution) -> float:
    """b'y plus bound terms from the reduced costs; -inf when the duals are
    not dual feasible (wrong-signed inequality dual, or a reduced cost
    pushing against an infinite bound)."""
    d = sol.reduced_costs
    val = float(p.b_eq @ sol.y_eq) + float(p.b_ub @ sol.y_ub)
    tiny = 1e-11 * (1.0 + float(np.abs(p.c).max(initial=0)))
    pos, neg = d > tiny, d < -tiny
    if np.any(sol.y_ub > tiny) or np.any(np.isinf(p.lb[pos])) or np.any(np.isinf(p.ub[neg])):
        return -np.inf
    return val + float(d[pos] @ p.lb[pos]) + float(d[neg] @ p.ub[neg])


def duality_gap(p: StandardFormLp, sol: LpSolution) -> float:
    return abs(sol.objective - dual_objective(p, sol))
