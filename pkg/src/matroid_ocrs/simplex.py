"""Small dense two-phase simplex in standard form.

Solves  min c.z  s.t.  A z = b, z >= 0  with Bland's anti-cycling rule, and
reports the optimal basis duals.  Sized for the masters that come up here:
a handful of rows, up to a few hundred columns.  Everything is float64 with
explicit tolerances; the callers' acceptance checks re-verify results
independently, so this solver only has to be deterministic and correct, not
fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    z: np.ndarray | None
    objective: float | None
    duals: np.ndarray | None


def _pivot(T, obj, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * T[row]
    obj -= obj[col] * T[row]
    basis[row] = col


def _bland_iterate(T, obj, basis, allowed, max_iter):
    m = T.shape[0]
    for _ in range(max_iter):
        entering = -1
        for j in range(T.shape[1] - 1):
            if allowed[j] and j not in basis and obj[j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        leaving, best_ratio = -1, np.inf
        for r in range(m):
            a = T[r, entering]
            if a > PIVOT_TOL:
                ratio = T[r, -1] / a
                if ratio < best_ratio - PIVOT_TOL or (
                        abs(ratio - best_ratio) <= PIVOT_TOL
                        and (leaving < 0 or basis[r] < basis[leaving])):
                    leaving, best_ratio = r, ratio
        if leaving < 0:
            return "unbounded"
        _pivot(T, obj, basis, leaving, entering)
    return "iteration_limit"


def solve_lp(c, A, b, max_iter=20000) -> LPResult:
    """Two-phase simplex for min c.z s.t. A z = b, z >= 0."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if m == 0:
        return LPResult("optimal", np.zeros(n), 0.0, np.zeros(0))

    A = A.copy()
    neg = b < 0
    A[neg] = -A[neg]
    b[neg] = -b[neg]
    T = np.empty((m, n + m + 1))
    T[:, :n] = A
    T[:, n:n + m] = np.eye(m)
    T[:, -1] = b
    basis = [n + r for r in range(m)]

    # phase 1: minimize the artificial sum; objective row in canonical form
    phase1 = np.zeros(n + m + 1)
    phase1[n:n + m] = 1.0
    for r in range(m):
        phase1 -= T[r]
    allowed = np.ones(n + m, dtype=bool)
    status = _bland_iterate(T, phase1, basis, allowed, max_iter)
    if status != "optimal":
        return LPResult(status, None, None, None)
    if -phase1[-1] > FEAS_TOL:
        return LPResult("infeasible", None, None, None)

    # pivot artificials out of the basis where possible
    for r in range(m):
        if basis[r] >= n:
            for j in range(n):
                if abs(T[r, j]) > PIVOT_TOL:
                    dummy = np.zeros(n + m + 1)
                    _pivot(T, dummy, basis, r, j)
                    break
    allowed[n:] = False

    # phase 2
    phase2 = np.zeros(n + m + 1)
    phase2[:n] = c
    for r in range(m):
        if basis[r] < n:
            phase2 -= phase2[basis[r]] * T[r]
    status = _bland_iterate(T, phase2, basis, allowed, max_iter)
    if status != "optimal":
        return LPResult(status, None, None, None)

    z = np.zeros(n)
    for r in range(m):
        if basis[r] < n:
            z[basis[r]] = T[r, -1]
    objective = float(c @ z)

    # duals from B^T y = c_B using the original columns
    cols = np.empty((m, m))
    cb = np.empty(m)
    ext = np.hstack([A, np.eye(m)])
    extc = np.concatenate([c, np.zeros(m)])
    for r in range(m):
        cols[:, r] = ext[:, basis[r]]
        cb[r] = extc[basis[r]]
    try:
        duals = np.linalg.solve(cols.T, cb)
    except np.linalg.LinAlgError:
        duals = np.linalg.lstsq(cols.T, cb, rcond=None)[0]
    duals[neg] = -duals[neg]  # report duals w.r.t. the caller's row signs
    return LPResult("optimal", z, objective, duals)
