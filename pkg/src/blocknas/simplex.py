"""Dense two-phase simplex with Bland's rule.

Small internal LP core used for branch-and-bound relaxation bounds; it
replaces an external LP dependency so searches run anywhere. Bland's rule
(always the lowest-index candidate) guarantees termination without cycling.
The pivot loop is the hot path: it carries a numba-compiled variant and a
vectorized numpy fallback that makes exactly the same pivot choices, so both
backends produce identical tableaus.
"""

from dataclasses import dataclass

import numpy as np

from .backend import USE_NUMBA, maybe_njit

EPS = 1e-10
FEAS_TOL = 1e-8

OPTIMAL, INFEASIBLE, UNBOUNDED, STALLED = 0, 1, 2, 3

LE, EQ, GE = -1, 0, 1


@dataclass
class LpResult:
    status: int
    x: np.ndarray | None
    objective: float
    iterations: int


@maybe_njit
def _pivot_loop_numba(T, basis, maxiter):  # pragma: no cover - numba path
    m = T.shape[0] - 1
    ncols = T.shape[1] - 1
    iters = 0
    while iters < maxiter:
        enter = -1
        for c in range(ncols):
            if T[m, c] < -EPS:
                enter = c
                break
        if enter < 0:
            return 0, iters
        best = np.inf
        brow = -1
        for r in range(m):
            a = T[r, enter]
            if a > EPS:
                ratio = T[r, ncols] / a
                if ratio < best:
                    best = ratio
                    brow = r
                elif ratio == best and brow >= 0 and basis[r] < basis[brow]:
                    brow = r
        if brow < 0:
            return 2, iters
        piv = T[brow, enter]
        for c in range(ncols + 1):
            T[brow, c] /= piv
        for r in range(m + 1):
            if r == brow:
                continue
            f = T[r, enter]
            if f != 0.0:
                for c in range(ncols + 1):
                    T[r, c] -= f * T[brow, c]
        basis[brow] = enter
        iters += 1
    return 3, iters


def _pivot_loop_numpy(T, basis, maxiter):
    m = T.shape[0] - 1
    ncols = T.shape[1] - 1
    iters = 0
    while iters < maxiter:
        negative = np.nonzero(T[m, :ncols] < -EPS)[0]
        if negative.size == 0:
            return 0, iters
        enter = int(negative[0])
        col = T[:m, enter]
        pos = np.nonzero(col > EPS)[0]
        if pos.size == 0:
            return 2, iters
        ratios = T[pos, ncols] / col[pos]
        best = ratios.min()
        ties = pos[ratios == best]
        brow = int(ties[np.argmin(basis[ties])])
        T[brow, :] /= T[brow, enter]
        f = T[:, enter].copy()
        f[brow] = 0.0
        T -= np.outer(f, T[brow, :])
        basis[brow] = enter
        iters += 1
    return 3, iters


def _pivot_loop(T, basis, maxiter):
    if USE_NUMBA:
        return _pivot_loop_numba(T, basis, maxiter)
    return _pivot_loop_numpy(T, basis, maxiter)


def solve_lp(c, A, senses, b, maxiter: int | None = None) -> LpResult:
    """Minimize ``c @ x`` subject to ``A x (senses) b`` and ``x >= 0``.

    ``senses`` entries are -1 (<=), 0 (=), +1 (>=). Returns the optimal
    vertex, or infeasible/unbounded status; STALLED only if the iteration
    cap is hit (callers treat it as "no usable bound").
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64).reshape(len(b), -1) if len(b) else np.zeros((0, len(c)))
    b = np.asarray(b, dtype=np.float64).copy()
    senses = np.asarray(senses, dtype=np.int64).copy()
    m, n = A.shape if A.size else (0, len(c))
    if m == 0:
        if np.all(c >= -EPS):
            return LpResult(OPTIMAL, np.zeros(n), 0.0, 0)
        return LpResult(UNBOUNDED, None, -np.inf, 0)

    A = A.copy()
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    senses[flip] *= -1

    n_slack = int(np.sum(senses == LE))
    n_surp = int(np.sum(senses == GE))
    n_art = int(np.sum(senses != LE))
    total = n + n_slack + n_surp + n_art
    if maxiter is None:
        maxiter = 2000 + 50 * (m + total)

    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    s_at, p_at, a_at = n, n + n_slack, n + n_slack + n_surp
    art_cols = []
    for r in range(m):
        if senses[r] == LE:
            T[r, s_at] = 1.0
            basis[r] = s_at
            s_at += 1
        else:
            if senses[r] == GE:
                T[r, p_at] = -1.0
                p_at += 1
            T[r, a_at] = 1.0
            basis[r] = a_at
            art_cols.append(a_at)
            a_at += 1

    iterations = 0
    if art_cols:
        # Phase 1: minimize the sum of artificials.
        obj = np.zeros(total + 1)
        for col in art_cols:
            obj[col] = 1.0
        for r in range(m):
            if basis[r] in art_cols:
                obj -= T[r, :]
        T[m, :] = obj
        status, it = _pivot_loop(T, basis, maxiter)
        iterations += it
        if status == STALLED:
            return LpResult(STALLED, None, np.nan, iterations)
        if -T[m, -1] > FEAS_TOL:
            return LpResult(INFEASIBLE, None, np.inf, iterations)
        # Pivot leftover artificials out of the basis; drop redundant rows.
        art_set = set(art_cols)
        keep_rows = []
        for r in range(m):
            if basis[r] in art_set:
                pivot_col = -1
                for cidx in range(n + n_slack + n_surp):
                    if abs(T[r, cidx]) > EPS:
                        pivot_col = cidx
                        break
                if pivot_col < 0:
                    continue  # redundant constraint
                piv = T[r, pivot_col]
                T[r, :] /= piv
                f = T[:, pivot_col].copy()
                f[r] = 0.0
                T -= np.outer(f, T[r, :])
                basis[r] = pivot_col
            keep_rows.append(r)
        if len(keep_rows) < m:
            rows = keep_rows + [m]
            T = T[rows, :]
            basis = basis[keep_rows]
            m = len(keep_rows)

    # Phase 2 on real costs, with artificial columns removed.
    real_cols = n + n_slack + n_surp
    T = np.ascontiguousarray(
        np.concatenate([T[:, :real_cols], T[:, -1:]], axis=1)
    )
    cost = np.zeros(real_cols + 1)
    cost[:n] = c
    obj = cost.copy()
    for r in range(m):
        cb = cost[basis[r]]
        if cb != 0.0:
            obj -= cb * T[r, :]
    obj[-1] = obj[-1] - 0.0
    # opening value: obj[-1] currently holds -cb.b contributions
    T[m, :] = obj
    status, it = _pivot_loop(T, basis, maxiter)
    iterations += it
    if status == STALLED:
        return LpResult(STALLED, None, np.nan, iterations)
    if status == UNBOUNDED:
        return LpResult(UNBOUNDED, None, -np.inf, iterations)

    x = np.zeros(real_cols)
    for r in range(m):
        x[basis[r]] = T[r, -1]
    return LpResult(OPTIMAL, x[:n], float(-T[m, -1]), iterations)
