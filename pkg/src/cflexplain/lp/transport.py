"""Transportation simplex (MODI) for small balanced transport problems.

The kernel keeps a spanning-tree basis of exactly ``m + n - 1`` cells and
starts from the least-cost rule. Pivots use the most negative reduced cost
(ties to the lowest row-major index); after ``m + n`` consecutive degenerate
pivots it switches to Bland's rule (lowest index enters, lowest index among
tied blocking cells leaves), which guarantees termination.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from ..errors import DomainError, LpError
from .problem import TOL

_OK, _ITER_LIMIT = 0, 1


@njit(cache=True)
def _potentials(basic, C, u, v, m, n, seen_r, seen_c, stack):
    """Fill row/column potentials from the basis tree; returns False if disconnected."""
    seen_r[:] = False
    seen_c[:] = False
    u[0] = 0.0
    seen_r[0] = True
    stack[0] = 0
    top = 1
    count = 1
    while top > 0:
        top -= 1
        node = stack[top]
        if node < m:
            i = node
            for j in range(n):
                if basic[i, j] and not seen_c[j]:
                    v[j] = C[i, j] - u[i]
                    seen_c[j] = True
                    stack[top] = m + j
                    top += 1
                    count += 1
        else:
            j = node - m
            for i in range(m):
                if basic[i, j] and not seen_r[i]:
                    u[i] = C[i, j] - v[j]
                    seen_r[i] = True
                    stack[top] = i
                    top += 1
                    count += 1
    return count == m + n


@njit(cache=True)
def _cycle(basic, m, n, i0, j0, path_r, path_c, parent, seen, queue):
    """Tree path from column ``j0`` to row ``i0`` as a list of basic cells.

    Returns the number of cells written to ``path_r``/``path_c``; cells are
    ordered starting next to column ``j0``.
    """
    parent[:] = -1
    seen[:] = False
    queue[0] = i0
    seen[i0] = True
    head = 0
    tail = 1
    target = m + j0
    while head < tail:
        node = queue[head]
        head += 1
        if node == target:
            break
        if node < m:
            for j in range(n):
                if basic[node, j] and not seen[m + j]:
                    seen[m + j] = True
                    parent[m + j] = node
                    queue[tail] = m + j
                    tail += 1
        else:
            jj = node - m
            for i in range(m):
                if basic[i, jj] and not seen[i]:
                    seen[i] = True
                    parent[i] = node
                    queue[tail] = i
                    tail += 1
    k = 0
    node = target
    while node != i0:
        p = parent[node]
        if node >= m:
            path_r[k] = p
            path_c[k] = node - m
        else:
            path_r[k] = node
            path_c[k] = p - m
        k += 1
        node = p
    return k


@njit(cache=True)
def _workspace(m, n):
    """Scratch arrays for :func:`_kernel` with capacity for ``m x n`` problems."""
    return (
        np.zeros((m, n)),
        np.zeros((m, n), dtype=np.bool_),
        np.empty(m), np.empty(n),
        np.empty(m, dtype=np.bool_), np.empty(n, dtype=np.bool_),
        np.empty(m), np.empty(n),
        np.empty(m + n, dtype=np.int64), np.empty(m + n, dtype=np.int64),
        np.empty(m, dtype=np.bool_), np.empty(n, dtype=np.bool_),
        np.empty(m + n, dtype=np.int64), np.empty(m + n, dtype=np.int64),
        np.empty(m + n, dtype=np.bool_),
    )


@njit(cache=True)
def _kernel(a, b, C, m, n, max_iter, ws):
    """Transportation simplex on the leading ``m x n`` block of the workspace.

    Leaves the plan in ``ws[0][:m, :n]`` and the potentials in ``ws[6][:m]``,
    ``ws[7][:n]``; returns the status.
    """
    X, basic, ra, rb, row_on, col_on, u, v, path_r, path_c, seen_r, seen_c, stack, parent, seen = ws
    for i in range(m):
        ra[i] = a[i]
        row_on[i] = True
        for j in range(n):
            X[i, j] = 0.0
            basic[i, j] = False
    for j in range(n):
        rb[j] = b[j]
        col_on[j] = True
    rows_left = m
    cols_left = n
    # least-cost start: each allocation retires exactly one row or column,
    # so the m + n - 1 allocated cells form a spanning tree
    while rows_left > 0 and cols_left > 0:
        bi = -1
        bj = -1
        bc = np.inf
        for i in range(m):
            if row_on[i]:
                for j in range(n):
                    if col_on[j] and C[i, j] < bc:
                        bc = C[i, j]
                        bi = i
                        bj = j
        q = min(ra[bi], rb[bj])
        X[bi, bj] = q
        basic[bi, bj] = True
        ra[bi] -= q
        rb[bj] -= q
        if rows_left == 1 and cols_left == 1:
            break
        if (ra[bi] <= rb[bj] and rows_left > 1) or cols_left == 1:
            row_on[bi] = False
            rows_left -= 1
        else:
            col_on[bj] = False
            cols_left -= 1

    cmax = 1.0
    for i in range(m):
        for j in range(n):
            if abs(C[i, j]) > cmax:
                cmax = abs(C[i, j])
    tol = 1e-12 * cmax
    status = _ITER_LIMIT
    bland = False
    degenerate_run = 0
    for _ in range(max_iter):
        _potentials(basic, C, u, v, m, n, seen_r, seen_c, stack)
        ei = -1
        ej = -1
        best_rc = -tol
        for i in range(m):
            for j in range(n):
                if not basic[i, j]:
                    rc = C[i, j] - u[i] - v[j]
                    if rc < best_rc:
                        best_rc = rc
                        ei = i
                        ej = j
                        if bland:
                            break
            if bland and ei >= 0:
                break
        if ei < 0:
            status = _OK
            break
        k = _cycle(basic, m, n, ei, ej, path_r, path_c, parent, seen, stack)
        # cells at even positions of the path lose flow
        theta = np.inf
        for t in range(0, k, 2):
            f = X[path_r[t], path_c[t]]
            if f < theta:
                theta = f
        lr = -1
        lc = -1
        best = m * n
        for t in range(0, k, 2):
            r = path_r[t]
            c = path_c[t]
            if X[r, c] <= theta and r * n + c < best:
                best = r * n + c
                lr = r
                lc = c
        if theta <= 0.0:
            degenerate_run += 1
            if degenerate_run > m + n:
                bland = True
        else:
            degenerate_run = 0
        for t in range(k):
            r = path_r[t]
            c = path_c[t]
            if t % 2 == 0:
                X[r, c] -= theta
            else:
                X[r, c] += theta
        X[ei, ej] += theta
        X[lr, lc] = 0.0
        basic[lr, lc] = False
        basic[ei, ej] = True
    _potentials(basic, C, u, v, m, n, seen_r, seen_c, stack)
    for i in range(m):
        for j in range(n):
            if X[i, j] < 0.0:
                X[i, j] = 0.0
    return status


@njit(cache=True)
def transport_kernel(a, b, C, max_iter):
    """Solve ``min <C, X>`` with row sums ``a`` and column sums ``b`` (all positive).

    Returns ``(X, u, v, status)`` with ``u_i + v_j <= C_ij`` and equality on
    basic cells.
    """
    m = a.size
    n = b.size
    ws = _workspace(m, n)
    status = _kernel(a, b, C, m, n, max_iter, ws)
    return ws[0].copy(), ws[6].copy(), ws[7].copy(), status


@njit(cache=True)
def _reduced_into(a, b, C, max_iter, ws, ri, ci, ar, bc, Cr, plan, u, v):
    """Solve on the positive-mass block of ``(a, b)``, scattering into ``plan``, ``u``, ``v``.

    Dual values for dropped rows/columns are set to the tightest feasible
    value, so ``(u, v)`` is dual feasible on the full cost matrix.
    Returns ``(value, status)``.
    """
    m_full = a.size
    n_full = b.size
    m = 0
    for i in range(m_full):
        if a[i] > 0.0:
            ri[m] = i
            ar[m] = a[i]
            m += 1
    n = 0
    for j in range(n_full):
        if b[j] > 0.0:
            ci[n] = j
            bc[n] = b[j]
            n += 1
    for i in range(m_full):
        u[i] = 0.0
        for j in range(n_full):
            plan[i, j] = 0.0
    for j in range(n_full):
        v[j] = 0.0
    if m == 0 or n == 0:
        return 0.0, _OK
    for i in range(m):
        for j in range(n):
            Cr[i, j] = C[ri[i], ci[j]]
    status = _kernel(ar, bc, Cr, m, n, max_iter, ws)
    X = ws[0]
    ur = ws[6]
    vr = ws[7]
    value = 0.0
    for i in range(m):
        u[ri[i]] = ur[i]
        for j in range(n):
            plan[ri[i], ci[j]] = X[i, j]
            value += X[i, j] * Cr[i, j]
    for j in range(n):
        v[ci[j]] = vr[j]
    for j in range(n_full):
        if not b[j] > 0.0:
            best = np.inf
            for t in range(m):
                i = ri[t]
                if C[i, j] - u[i] < best:
                    best = C[i, j] - u[i]
            v[j] = best
    for i in range(m_full):
        if not a[i] > 0.0:
            best = np.inf
            for j in range(n_full):
                if C[i, j] - v[j] < best:
                    best = C[i, j] - v[j]
            u[i] = best
    return value, status


@njit(cache=True)
def solve_reduced(a, b, C, max_iter):
    """Transport between full-length marginals, dropping zero-mass rows/columns.

    Returns ``(plan, value, u, v, status)``; ``(u, v)`` is dual feasible on
    the full cost matrix.
    """
    m_full = a.size
    n_full = b.size
    ws = _workspace(m_full, n_full)
    plan = np.zeros((m_full, n_full))
    u = np.zeros(m_full)
    v = np.zeros(n_full)
    value, status = _reduced_into(
        a, b, C, max_iter, ws,
        np.empty(m_full, dtype=np.int64), np.empty(n_full, dtype=np.int64),
        np.empty(m_full), np.empty(n_full), np.empty((m_full, n_full)), plan, u, v,
    )
    return plan, value, u, v, status


@njit(cache=True)
def w2_batch(P0, P, C, pin, max_iter):
    """Per-row transport values, plans and column potentials for two stacks of marginals."""
    N, K = P0.shape
    values = np.zeros(N)
    plans = np.zeros((N, K, K))
    pots = np.zeros((N, K))
    ws = _workspace(K, K)
    ri = np.empty(K, dtype=np.int64)
    ci = np.empty(K, dtype=np.int64)
    ar = np.empty(K)
    bc = np.empty(K)
    Cr = np.empty((K, K))
    u = np.empty(K)
    v = np.empty(K)
    status = _OK
    for n in range(N):
        val, st = _reduced_into(P0[n], P[n], C, max_iter, ws, ri, ci, ar, bc, Cr, plans[n], u, v)
        if st != _OK:
            status = st
        shift = v[pin]
        for k in range(K):
            pots[n, k] = v[k] - shift
        values[n] = val
    return values, plans, pots, status


class TransportSolution(NamedTuple):
    plan: np.ndarray
    value: float
    u: np.ndarray
    v: np.ndarray


def _max_iter(m: int, n: int) -> int:
    return 50 * (m + 1) * (n + 1) + 1000


def check_marginals(supplies, demands) -> tuple[np.ndarray, np.ndarray]:
    a = np.ascontiguousarray(supplies, dtype=float)
    b = np.ascontiguousarray(demands, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise DomainError("marginals must be vectors")
    if np.any(~np.isfinite(a)) or np.any(~np.isfinite(b)):
        raise DomainError("marginals must be finite")
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("marginals must be nonnegative")
    sa, sb = a.sum(), b.sum()
    if abs(sa - sb) > TOL.marginal_balance:
        raise DomainError(f"unbalanced marginals: {sa!r} vs {sb!r}")
    if sb > 0 and sa != sb:
        b = b * (sa / sb)
    return a, b


def solve_transportation(supplies, demands, cost) -> TransportSolution:
    """Exact optimal transport plan, value and dual potentials.

    ``u[i] + v[j] <= cost[i, j]`` for all cells, with equality wherever the
    plan is positive.
    """
    a, b = check_marginals(supplies, demands)
    C = np.ascontiguousarray(cost, dtype=float)
    if C.shape != (a.size, b.size):
        raise DomainError(f"cost shape {C.shape} does not match marginals ({a.size}, {b.size})")
    plan, value, u, v, status = solve_reduced(a, b, C, _max_iter(a.size, b.size))
    if status != _OK:
        raise LpError("transportation simplex hit its iteration limit")
    return TransportSolution(plan, float(value), u, v)
