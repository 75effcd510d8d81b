"""Randomized-incremental LP kernel for small dimensions.

Solves  min c.x  s.t.  A x <= b  inside an artificial box |x_i| <= BOX_BOUND.
The box keeps every subproblem bounded; a solution pressed against it with a
steep objective is reported as unbounded by the caller.

Ties between optimal vertices are broken lexicographically (objective first,
then x_1, x_2, ...), which keeps the incremental invariant valid for
degenerate objectives. Constraint order is shuffled once by the caller with a
seeded generator, so results are reproducible bit-for-bit per seed.
"""

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard dep, guard for safety
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

FEAS_TOL = 1e-9
BOX_BOUND = 1e6

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1


@njit(cache=True, nogil=True)
def _box_optimum(lo, hi, C, x):
    d = x.shape[0]
    for j in range(d):
        t = lo[j]
        for r in range(C.shape[0]):
            crj = C[r, j]
            if crj > 0.0:
                t = lo[j]
                break
            elif crj < 0.0:
                t = hi[j]
                break
        x[j] = t


@njit(cache=True, nogil=True)
def _solve_1d(A, b, lo, hi, C, x):
    L = lo[0]
    U = hi[0]
    for i in range(A.shape[0]):
        a = A[i, 0]
        bi = b[i]
        if a > 1e-14:
            u = bi / a
            if u < U:
                U = u
        elif a < -1e-14:
            v = bi / a
            if v > L:
                L = v
        else:
            scale = max(1.0, abs(bi))
            if bi < -FEAS_TOL * scale:
                return STATUS_INFEASIBLE
    if L > U:
        gap = L - U
        if gap > FEAS_TOL * max(1.0, abs(L), abs(U)):
            return STATUS_INFEASIBLE
        x[0] = 0.5 * (L + U)
        return STATUS_OPTIMAL
    t = L
    for r in range(C.shape[0]):
        cr = C[r, 0]
        if cr > 0.0:
            t = L
            break
        elif cr < 0.0:
            t = U
            break
    x[0] = t
    return STATUS_OPTIMAL


@njit(cache=True, nogil=True)
def seidel_solve(A, b, lo, hi, C):
    """Recursive Seidel step. Returns (status, x)."""
    n = A.shape[0]
    d = A.shape[1]
    x = np.empty(d)
    _box_optimum(lo, hi, C, x)
    if d == 1:
        st = _solve_1d(A, b, lo, hi, C, x)
        return st, x
    for i in range(n):
        # violation test, scaled so huge intermediate coordinates do not
        # poison the absolute tolerance
        s = 0.0
        scale = 1.0
        for j in range(d):
            p = A[i, j] * x[j]
            s += p
            ap = abs(p)
            if ap > scale:
                scale = ap
        bi = b[i]
        if abs(bi) > scale:
            scale = abs(bi)
        if s - bi <= FEAS_TOL * scale:
            continue
        # optimum of the prefix plus this constraint lies on its boundary;
        # eliminate the pivot variable and recurse in dimension d-1
        piv = 0
        apiv = abs(A[i, 0])
        for j in range(1, d):
            aj = abs(A[i, j])
            if aj > apiv:
                apiv = aj
                piv = j
        if apiv <= 1e-13:
            return STATUS_INFEASIBLE, x
        inv = 1.0 / A[i, piv]
        beta = bi * inv
        m = i + 2
        A2 = np.empty((m, d - 1))
        b2 = np.empty(m)
        for row in range(i):
            apm = A[row, piv] * inv
            cc = 0
            for j in range(d):
                if j == piv:
                    continue
                A2[row, cc] = A[row, j] - apm * A[i, j]
                cc += 1
            b2[row] = b[row] - apm * bi
        # box bounds of the eliminated variable become ordinary rows
        cc = 0
        for j in range(d):
            if j == piv:
                continue
            g = A[i, j] * inv
            A2[i, cc] = -g
            A2[i + 1, cc] = g
            cc += 1
        b2[i] = hi[piv] - beta
        b2[i + 1] = beta - lo[piv]
        C2 = np.empty((C.shape[0], d - 1))
        for r in range(C.shape[0]):
            cp = C[r, piv] * inv
            cc = 0
            for j in range(d):
                if j == piv:
                    continue
                C2[r, cc] = C[r, j] - cp * A[i, j]
                cc += 1
        lo2 = np.empty(d - 1)
        hi2 = np.empty(d - 1)
        cc = 0
        for j in range(d):
            if j == piv:
                continue
            lo2[cc] = lo[j]
            hi2[cc] = hi[j]
            cc += 1
        st, y = seidel_solve(A2[:m], b2[:m], lo2, hi2, C2)
        if st != STATUS_OPTIMAL:
            return st, x
        acc = beta
        cc = 0
        for j in range(d):
            if j == piv:
                continue
            x[j] = y[cc]
            acc -= A[i, j] * inv * y[cc]
            cc += 1
        x[piv] = acc
    return STATUS_OPTIMAL, x


@njit(cache=True, nogil=True)
def pair_sweep(rows, rhs_shifted, ptr, cand, bounds, obj_red, gamma_off,
               piv, g, beta, extra_A, extra_b, best0):
    """Solve the per-leaf pair LPs of one constraint piece, cheapest first.

    `cand` holds candidate leaf indices sorted by a valid lower bound
    (`bounds`, same order); the loop stops as soon as the bound can no
    longer beat the running best. Leaf halfspace rows come CSR-packed in
    (rows, rhs_shifted, ptr); the boundary equality is pre-reduced to the
    substitution x_piv = beta - g . x_rest, and `extra_A/extra_b` carry the
    already-reduced constraint-partition rows.

    Returns (best, best leaf index, reduced argmin, LPs solved, infeasible).
    """
    d1 = obj_red.shape[1]
    lo = np.full(d1, -BOX_BOUND)
    hi = np.full(d1, BOX_BOUND)
    best = best0
    best_leaf = -1
    best_y = np.zeros(d1)
    nlp = 0
    ninf = 0
    me = extra_b.shape[0]
    d_full = rows.shape[1]
    for ci in range(cand.shape[0]):
        if bounds[ci] >= best:
            break
        k = cand[ci]
        m = ptr[k + 1] - ptr[k]
        A2 = np.empty((m + me, d1))
        b2 = np.empty(m + me)
        for r in range(m):
            ap = rows[ptr[k] + r, piv]
            cc = 0
            for j in range(d_full):
                if j == piv:
                    continue
                A2[r, cc] = rows[ptr[k] + r, j] - ap * g[cc]
                cc += 1
            b2[r] = rhs_shifted[ptr[k] + r] - ap * beta
        for r in range(me):
            for j in range(d1):
                A2[m + r, j] = extra_A[r, j]
            b2[m + r] = extra_b[r]
        C = np.zeros((d1 + 1, d1))
        for j in range(d1):
            C[0, j] = obj_red[k, j]
            C[j + 1, j] = 1.0
        st, y = seidel_solve(A2, b2, lo, hi, C)
        nlp += 1
        if st != STATUS_OPTIMAL:
            ninf += 1
            continue
        val = gamma_off[k]
        for j in range(d1):
            val += obj_red[k, j] * y[j]
        if val < best:
            best = val
            best_leaf = k
            best_y = y.copy()
    return best, best_leaf, best_y, nlp, ninf


def warmup():
    """Force JIT compilation with a tiny problem (import-time friendly)."""
    A = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b = np.array([1.0, 0.0, 1.0, 0.0])
    lo = np.full(2, -BOX_BOUND)
    hi = np.full(2, BOX_BOUND)
    C = np.vstack([np.array([1.0, 1.0]), np.eye(2)])
    seidel_solve(A, b, lo, hi, C)
    pair_sweep(A, b, np.array([0, 4], dtype=np.int64),
               np.array([0], dtype=np.int64), np.array([-1.0]),
               np.array([[1.0]]), np.array([0.0]),
               0, np.array([0.0]), 0.5,
               np.zeros((0, 1)), np.zeros(0), np.inf)
