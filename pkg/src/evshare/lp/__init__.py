"""Linear programs: standard-form container, embedded simplex, HiGHS
backend and MPS interchange."""
from __future__ import annotations

import logging

import numpy as np
from scipy.optimize import linprog

from .mps import export_mps, import_solution, parse_mps, read_mps, write_solution
from .problem import LpSolution, SolverError, StandardFormLp, dual_objective, duality_gap
from .simplex import simplex_solve

log = logging.getLogger(__name__)

__all__ = [
    "LpSolution", "SolverError", "StandardFormLp", "dual_objective", "duality_gap",
    "export_mps", "import_solution", "parse_mps", "read_mps", "write_solution",
    "simplex_solve", "highs_solve", "solve",
]

_HIGHS_STATUS = {0: "optimal", 1: "iteration_limit", 2: "infeasible", 3: "unbounded", 4: "error"}


def highs_solve(p: StandardFormLp, tol: float = 1e-9, presolve: bool = True) -> LpSolution:
    """Dual simplex in HiGHS (through scipy)."""
    res = linprog(
        p.c,
        A_ub=p.A_ub if p.A_ub.shape[0] else None, b_ub=p.b_ub if p.A_ub.shape[0] else None,
        A_eq=p.A_eq if p.A_eq.shape[0] else None, b_eq=p.b_eq if p.A_eq.shape[0] else None,
        bounds=np.column_stack([p.lb, p.ub]), method="highs-ds",
        options={"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol,
                 "presolve": presolve},
    )
    status = _HIGHS_STATUS.get(res.status, "error")
    if status == "infeasible" and presolve:
        # presolve does not separate infeasible from unbounded
        return highs_solve(p, tol, presolve=False)
    if status != "optimal":
        return LpSolution(status, iterations=int(getattr(res, "nit", 0) or 0), message=res.message)
    y_eq = np.asarray(res.eqlin.marginals) if p.A_eq.shape[0] else np.zeros(0)
    y_ub = np.asarray(res.ineqlin.marginals) if p.A_ub.shape[0] else np.zeros(0)
    d = p.c - p.A_eq.T @ y_eq - p.A_ub.T @ y_ub
    return LpSolution("optimal", np.asarray(res.x), float(res.fun), y_eq, y_ub, d,
                      iterations=int(res.nit), message=res.message)


def solve(p: StandardFormLp, method: str = "highs", tol: float = 1e-9) -> LpSolution:
    """Solve with ``method`` in {"embedded", "highs"}.

    Infeasible/unbounded come back as statuses; iteration limits and solver
    failures raise :class:`SolverError`.
    """
    if method == "embedded":
        sol = simplex_solve(p, tol=tol)
    elif method == "highs":
        sol = highs_solve(p, tol=tol)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    if sol.status in ("iteration_limit", "error"):
        raise SolverError(f"{method} solver failed: {sol.status} ({sol.message}) after {sol.iterations} iterations",
                          sol)
    log.info("%s: %s, objective %s, %d iterations", p.name, sol.status, sol.objective, sol.iterations)
    return sol
