"""Bounded-variable revised simplex.

Two phases with one artificial column per row, LU-factorised basis with
product-form (eta) updates and a fresh factorisation every
``refactor_every`` iterations. Pricing is Dantzig's rule; after a run of
degenerate pivots it switches to Bland's rule until progress resumes.
"""
from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problem import LpSolution, SolverError, StandardFormLp

log = logging.getLogger(__name__)

DENSE_LIMIT = 400
PIVOT_TOL = 1e-9


class _Basis:
    def __init__(self, M: sp.csc_matrix, head: np.ndarray):
        B = M[:, head]
        self.m = len(head)
        if self.m <= DENSE_LIMIT:
            self.dense = True
            self.lu = la.lu_factor(B.toarray(), check_finite=False)
        else:
            self.dense = False
            self.lu = spla.splu(B.tocsc(), permc_spec="COLAMD")
        self.etas: list[tuple[int, np.ndarray]] = []

    def ftran(self, a: np.ndarray) -> np.ndarray:
        x = la.lu_solve(self.lu, a, check_finite=False) if self.dense else self.lu.solve(a)
        for r, w in self.etas:
            xr = x[r] / w[r]
            x -= w * xr
            x[r] = xr
        return x

    def btran(self, c: np.ndarray) -> np.ndarray:
        z = np.array(c, dtype=float)
        for r, w in reversed(self.etas):
            zr = (z[r] - (w @ z - w[r] * z[r])) / w[r]
            z[r] = zr
        if self.dense:
            return la.lu_solve(self.lu, z, trans=1, check_finite=False)
        return self.lu.solve(z, trans="T")

    def update(self, r: int, w: np.ndarray):
        self.etas.append((r, w.copy()))


def _segment(ufunc, M) -> np.ndarray:
    """Row-wise (csr) or column-wise (csc) reduction of the stored entries;
    1 for empty rows/columns."""
    counts = np.diff(M.indptr)
    out = np.ones(len(counts))
    full = counts > 0
    if full.any():
        out[full] = ufunc.reduceat(M.data, M.indptr[:-1][full])
    return out


def _scale(A: sp.csr_matrix, passes: int = 6):
    m, n = A.shape
    R, S = np.ones(m), np.ones(n)
    B = abs(A).tocsr()
    B.eliminate_zeros()
    if B.nnz == 0:
        return R, S
    for _ in range(passes):
        C = (sp.diags(R) @ B @ sp.diags(S)).tocsr()
        R /= np.sqrt(_segment(np.maximum, C) * _segment(np.minimum, C))
        C = (sp.diags(R) @ B @ sp.diags(S)).tocsc()
        S /= np.sqrt(_segment(np.maximum, C) * _segment(np.minimum, C))
    # snap to powers of two so scaling is exact in floating point
    return 2.0 ** np.round(np.log2(R)), 2.0 ** np.round(np.log2(S))


class _Simplex:
    def __init__(self, M, b, lo, hi, tol, refactor_every, max_iter, bland_after):
        self.M = M.tocsc()
        self.MT = self.M.T.tocsr()
        self.b = b
        self.lo, self.hi = lo, hi
        self.m, self.n = M.shape
        self.tol = tol
        self.refactor_every = refactor_every
        self.max_iter = max_iter
        self.bland_after = bland_after
        self.iters = 0
        self.log: list[str] = []


    def refactor(self):
        self.basis = _Basis(self.M, self.head)
        xn = self.x.copy()
        xn[self.head] = 0.0
        self.x[self.head] = self.basis.ftran(self.b - self.M @ xn)

    def run(self, cost: np.ndarray) -> str:
        bland = False
        degenerate = 0
        since = self.refactor_every
        fixed = self.lo == self.hi
        while True:
            if since >= self.refactor_every:
                self.refactor()
                since = 0
            if self.iters >= self.max_iter:
                return "iteration_limit"
            y = self.basis.btran(cost[self.head])
            d = cost - self.MT @ y
            d[self.head] = 0.0
            st = self.status
            elig = ((st == 0) & (d < -self.tol) | (st == 1) & (d > self.tol)
                    | (st == 2) & (np.abs(d) > self.tol)) & ~fixed
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0]) if bland else int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[j] < 0 else -1.0
            col = self.M[:, j].toarray().ravel()
            w = self.basis.ftran(col)
            delta = direction * w
            xb = self.x[self.head]
            lb, ub = self.lo[self.head], self.hi[self.head]
            theta = np.full(self.m, np.inf)
            dec = delta > PIVOT_TOL
            inc = delta < -PIVOT_TOL
            with np.errstate(invalid="ignore"):
                theta[dec] = np.maximum(xb[dec] - lb[dec], 0.0) / delta[dec]
                theta[inc] = np.maximum(ub[inc] - xb[inc], 0.0) / -delta[inc]
            theta[np.isnan(theta)] = np.inf
            t_flip = self.hi[j] - self.lo[j]
            t_min = theta.min() if self.m else np.inf
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return "unbounded"
            self.iters += 1
            since += 1
            if t_flip <= t_min:
                step = t_flip
                self.x[self.head] = xb - step * delta
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
                self.status[j] = 1 if direction > 0 else 0
            else:
                near = np.flatnonzero(theta <= t_min + 1e-12)
                r = int(near[np.argmin(self.head[near])]) if bland else int(near[np.argmax(np.abs(delta[near]))])
                step = theta[r]
                self.x[self.head] = xb - step * delta
                self.x[j] += direction * step
                k = self.head[r]
                if delta[r] > 0:
                    self.x[k], self.status[k] = self.lo[k], 0
                else:
                    self.x[k], self.status[k] = self.hi[k], 1
                self.head[r] = j
                self.status[j] = 3
                self.basis.update(r, w)
            if step <= 1e-12:
                degenerate += 1
                if degenerate >= self.bland_after and not bland:
                    bland = True
                    self.log.append(f"iter {self.iters}: switching to Bland's rule")
            else:
                degenerate = 0
                if bland:
                    bland = False


def simplex_solve(p: StandardFormLp, tol: float = 1e-9, max_iter: int | None = None,
                  refactor_every: int = 100, scale: bool = True, bland_after: int = 50) -> LpSolution:
    """Solve ``p`` to an optimal basic solution.

    ``tol`` is the primal/dual feasibility tolerance on the scaled problem.
    Raises :class:`SolverError` when the iteration limit is hit.
    """
    n = p.n_vars
    me, mu = len(p.b_eq), len(p.b_ub)
    m = me + mu
    A = sp.vstack([sp.hstack([p.A_eq, sp.csr_matrix((me, mu))]),
                   sp.hstack([p.A_ub, sp.identity(mu, format="csr")])]).tocsr()
    b = np.concatenate([p.b_eq, p.b_ub])
    lo = np.concatenate([p.lb, np.zeros(mu)])
    hi = np.concatenate([p.ub, np.full(mu, np.inf)])
    c = np.concatenate([p.c, np.zeros(mu)])
    nx = n + mu
    if m == 0:
        x = np.where(p.c > 0, p.lb, np.where(p.c < 0, p.ub, np.where(np.isfinite(p.lb), p.lb, 0.0)))
        if not np.all(np.isfinite(x)):
            return LpSolution("unbounded", message="unbounded variable with no constraints")
        return LpSolution("optimal", x, float(p.c @ x), np.zeros(0), np.zeros(0), p.c.copy())

    R, S = _scale(A) if scale else (np.ones(m), np.ones(nx))
    As = (sp.diags(R) @ A @ sp.diags(S)).tocsr()
    bs, cs = R * b, S * c
    los, his = lo / S, hi / S

    x0 = np.where(np.isfinite(los), los, np.where(np.isfinite(his), his, 0.0))
    resid = bs - As @ x0
    sign = np.where(resid >= 0, 1.0, -1.0)
    M = sp.hstack([As, sp.diags(sign)]).tocsc()
    lo_all = np.concatenate([los, np.zeros(m)])
    hi_all = np.concatenate([his, np.full(m, np.inf)])
    max_iter = max_iter or max(10000, 50 * (m + nx))
    s = _Simplex(M, bs, lo_all, hi_all, tol, refactor_every, max_iter, bland_after)
    s.x = np.concatenate([x0, np.abs(resid)])
    s.head = np.arange(nx, nx + m)
    # status: 0 at lower, 1 at upper, 2 free at zero, 3 basic
    s.status = np.where(np.isfinite(los), 0, np.where(np.isfinite(his), 1, 2)).astype(np.int8)
    s.status = np.concatenate([s.status, np.full(m, 3, dtype=np.int8)])

    def fail(status, msg):
        sol = LpSolution(status, iterations=s.iters, message=msg, log=s.log)
        if status == "iteration_limit":
            raise SolverError(f"simplex iteration limit ({max_iter}) reached: {msg}", sol)
        return sol

    cost1 = np.concatenate([np.zeros(nx), np.ones(m)])
    st = s.run(cost1)
    if st != "optimal":
        return fail(st, "phase 1")
    infeas = float(s.x[nx:].sum())
    if infeas > tol * max(1.0, np.abs(bs).max(initial=0)) * 10:
        s.log.append(f"phase 1 ended with infeasibility {infeas:.3e}")
        return fail("infeasible", f"sum of infeasibilities {infeas:.3e}")
    # freeze artificials at zero and pivot the basic ones out where possible
    s.hi[nx:] = 0.0
    s.x[nx:] = np.clip(s.x[nx:], 0.0, 0.0)
    s.refactor()
    for r in range(m):
        k = s.head[r]
        if k < nx:
            continue
        er = np.zeros(m)
        er[r] = 1.0
        rho = s.basis.btran(er)
        alpha = s.M[:, :nx].T @ rho
        alpha[s.head[s.head < nx]] = 0.0
        cand = np.flatnonzero(np.abs(alpha) > 1e-7)
        if cand.size == 0:
            continue  # redundant row; artificial stays basic at zero
        j = int(cand[np.argmax(np.abs(alpha[cand]))])
        w = s.basis.ftran(s.M[:, j].toarray().ravel())
        s.status[k] = 0
        s.head[r] = j
        s.status[j] = 3
        s.basis.update(r, w)
    s.refactor()

    cost2 = np.concatenate([cs, np.zeros(m)])
    st = s.run(cost2)
    if st != "optimal":
        return fail(st, "phase 2")

    s.refactor()
    y_s = s.basis.btran(cost2[s.head])
    d_s = cost2[:nx] - As.T @ y_s
    x = s.x[:nx] * S
    y = R * y_s
    d = d_s / S
    x[: n] = np.clip(x[:n], p.lb, p.ub)
    sol = LpSolution("optimal", x[:n], float(p.c @ x[:n]), y[:me], y[me:], d[:n],
                     iterations=s.iters, log=s.log)
    return sol
