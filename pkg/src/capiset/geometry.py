"""Halfspace polytope algebra and the low-dimensional LP layer.

Everything downstream (region enumeration, admissible-level search, the
estimator verifier) funnels its optimization into :func:`solve_lp`, which
wraps the Seidel kernel. Polytopes are closed halfspace intersections with
optional equality constraints; emptiness and side-of-hyperplane queries are
one or two LPs each.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import seidel
from .seidel import BOX_BOUND, FEAS_TOL

# strict-interior tolerance: separates a genuine cut from face tangency
STRICT_TOL = 1e-7

# slack allowed on the returned point before declaring numerical failure
_POSTCHECK_TOL = 1e-7

_UNBOUNDED_COORD = 0.9 * BOX_BOUND


class NumericalFailure(RuntimeError):
    """The LP kernel produced a point that fails its own feasibility check."""


def _as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Halfspace:
    """The closed region {x : normal . x <= offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _as_vector(self.normal, "normal")
        if not np.any(n):
            raise ValueError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.shape[0]

    def contains(self, x, tol=FEAS_TOL):
        return float(self.normal @ x) <= self.offset + tol


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """The set {x : normal . x = offset}."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _as_vector(self.normal, "normal")
        if not np.any(n):
            raise ValueError("hyperplane normal must be nonzero")
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self):
        return self.normal.shape[0]

    def normalized(self):
        """Unit-normal copy, so strict-feasibility tolerances are scale-free."""
        s = float(np.linalg.norm(self.normal))
        return Hyperplane(self.normal / s, self.offset / s)

    def upper(self):
        """Halfspace on the normal side: {normal . x >= offset}."""
        return Halfspace(-self.normal, -self.offset)

    def lower(self):
        """Halfspace {normal . x <= offset}."""
        return Halfspace(self.normal, self.offset)


class Polytope:
    """Closed intersection of halfspaces (plus optional equalities).

    Immutable after construction; derived matrices are cached lazily.
    """

    __slots__ = ("dim", "halfspaces", "equalities", "_ab")

    def __init__(self, dim, halfspaces=(), equalities=()):
        if dim <= 0:
            raise ValueError("dimension must be positive")
        self.dim = int(dim)
        hs = tuple(halfspaces)
        eqs = tuple(equalities)
        for h in hs:
            if h.dim != self.dim:
                raise ValueError("halfspace dimension mismatch")
        for h in eqs:
            if h.dim != self.dim:
                raise ValueError("equality dimension mismatch")
        self.halfspaces = hs
        self.equalities = eqs
        self._ab = None

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("bounds must be equal-length vectors")
        if np.any(lower > upper):
            raise ValueError("lower bound exceeds upper bound")
        d = lower.shape[0]
        hs = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            hs.append(Halfspace(e, upper[i]))
            hs.append(Halfspace(-e, -lower[i]))
        return cls(d, hs)

    def matrices(self):
        """(A, b) with rows a.x <= b; cached."""
        if self._ab is None:
            if self.halfspaces:
                A = np.array([h.normal for h in self.halfspaces])
                b = np.array([h.offset for h in self.halfspaces])
            else:
                A = np.zeros((0, self.dim))
                b = np.zeros(0)
            A.setflags(write=False)
            b.setflags(write=False)
            self._ab = (A, b)
        return self._ab

    def with_halfspaces(self, extra):
        return Polytope(self.dim, self.halfspaces + tuple(extra), self.equalities)

    def translate(self, t):
        """Shift the set by +t: {x + t : x in self}."""
        t = np.asarray(t, dtype=float)
        hs = [Halfspace(h.normal, h.offset + float(h.normal @ t)) for h in self.halfspaces]
        eqs = [Hyperplane(h.normal, h.offset + float(h.normal @ t)) for h in self.equalities]
        return Polytope(self.dim, hs, eqs)

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        for h in self.halfspaces:
            if float(h.normal @ x) > h.offset + tol:
                return False
        for h in self.equalities:
            if abs(float(h.normal @ x) - h.offset) > tol:
                return False
        return True

    def __repr__(self):
        return (f"Polytope(dim={self.dim}, {len(self.halfspaces)} halfspaces, "
                f"{len(self.equalities)} equalities)")


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    value: float = np.nan
    point: np.ndarray | None = None


_ORDER_CACHE = {}


def _shuffle_order(seed, n):
    """Cached seeded permutation; LP row shuffles dominate wrapper cost."""
    if n == 0:
        return np.zeros(0, dtype=int)
    key = (seed, n)
    order = _ORDER_CACHE.get(key)
    if order is None:
        order = np.random.default_rng(seed).permutation(n)
        order.setflags(write=False)
        _ORDER_CACHE[key] = order
    return order


class CutResult(enum.Enum):
    ABOVE = "above"    # polytope on the {normal . x >= offset} side
    BELOW = "below"    # polytope on the {normal . x <= offset} side
    CUTS = "cuts"


def _reduce_equalities(A, b, c, E, e):
    """Eliminate equality constraints by Gaussian substitution.

    Returns (A2, b2, c2, rebuild) where rebuild(y) -> x in original
    coordinates, or None if the equalities are inconsistent.
    """
    d = A.shape[1]
    E = np.array(E, dtype=float)
    e = np.array(e, dtype=float)
    # originals[i] = original index of current column i
    originals = list(range(d))
    steps = []  # (original var, original indices of remaining cols, g, beta)
    r = 0
    while r < E.shape[0]:
        row = E[r]
        rhs = e[r]
        scale = max(1.0, float(np.max(np.abs(row))) if row.size else 0.0, abs(rhs))
        if row.size == 0:
            if abs(rhs) > 1e-9 * scale:
                return None
            r += 1
            continue
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) <= 1e-12 * scale:
            if abs(rhs) > 1e-9 * scale:
                return None
            E = np.delete(E, r, axis=0)
            e = np.delete(e, r)
            continue
        inv = 1.0 / row[j]
        g = np.delete(row, j) * inv     # x_j = beta - g . x_rest
        beta = rhs * inv
        colA = A[:, j].copy()
        A = np.delete(A, j, axis=1) - np.outer(colA, g)
        b = b - colA * beta
        cj = c[j]
        c = np.delete(c, j) - cj * g
        colE = E[:, j].copy()
        E = np.delete(E, j, axis=1) - np.outer(colE, g)
        e = e - colE * beta
        var = originals[j]
        del originals[j]
        steps.append((var, list(originals), g, beta))
        E = np.delete(E, r, axis=0)
        e = np.delete(e, r)

    def rebuild(y):
        vals = dict(zip(originals, y))
        for var, rest, g, beta in reversed(steps):
            acc = beta
            for gi, vi in zip(g, rest):
                acc -= gi * vals[vi]
            vals[var] = acc
        x = np.empty(d)
        for i in range(d):
            x[i] = vals[i]
        return x

    return A, b, c, rebuild


def solve_lp_arrays(objective, A, b, eq_A=None, eq_b=None, seed=0):
    """Minimize objective . x over {A x <= b, eq_A x = eq_b}.

    Low-level entry used by the hot loops; see :func:`solve_lp` for the
    polytope-facing wrapper.
    """
    c = np.asarray(objective, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    d = c.shape[0]
    rebuild = None
    if eq_A is not None and len(eq_A) > 0:
        reduced = _reduce_equalities(A, b, c, eq_A, eq_b)
        if reduced is None:
            return LpResult(LpStatus.INFEASIBLE)
        A, b, c, rebuild = reduced
        if A.shape[1] == 0:
            # equalities pin down a single point; only feasibility remains
            x = rebuild(np.zeros(0))
            if b.size and float(np.min(b / np.maximum(1.0, np.abs(b)))) < -FEAS_TOL:
                return LpResult(LpStatus.INFEASIBLE)
            value = float(np.asarray(objective, dtype=float) @ x)
            return LpResult(LpStatus.OPTIMAL, value, x)
    dred = c.shape[0]
    order = _shuffle_order(seed, A.shape[0])
    A2 = np.ascontiguousarray(A[order]) if A.shape[0] else np.zeros((0, dred))
    b2 = np.ascontiguousarray(b[order]) if A.shape[0] else np.zeros(0)
    lo = np.full(dred, -BOX_BOUND)
    hi = np.full(dred, BOX_BOUND)
    C = np.vstack([c[None, :], np.eye(dred)])
    status, y = seidel.seidel_solve(A2, b2, lo, hi, C)
    if status == seidel.STATUS_INFEASIBLE:
        return LpResult(LpStatus.INFEASIBLE)
    x = rebuild(y) if rebuild is not None else y
    value = float(np.asarray(objective, dtype=float) @ x)
    # unboundedness: pressed hard against the artificial box along the objective
    if np.any(np.abs(y) >= _UNBOUNDED_COORD):
        cmax = float(np.max(np.abs(c))) if c.size else 0.0
        if cmax > 0.0 and value < -0.1 * BOX_BOUND * cmax:
            return LpResult(LpStatus.UNBOUNDED, -np.inf, x)
    # never return a silently-infeasible point
    if A.shape[0]:
        resid = A @ y - b
        scale = np.maximum(1.0, np.maximum(np.abs(b), np.abs(A) @ np.abs(y)))
        if float(np.max(resid / scale)) > _POSTCHECK_TOL:
            raise NumericalFailure(
                f"LP point violates constraints by {float(np.max(resid)):.3e}")
    return LpResult(LpStatus.OPTIMAL, value, x)


def solve_lp(objective, poly, extra_equalities=(), seed=0):
    """Minimize objective . x over a polytope intersected with equalities."""
    c = np.asarray(objective, dtype=float)
    if c.shape != (poly.dim,):
        raise ValueError(f"objective has shape {c.shape}, polytope dim {poly.dim}")
    A, b = poly.matrices()
    eqs = tuple(poly.equalities) + tuple(extra_equalities)
    for h in eqs:
        if h.dim != poly.dim:
            raise ValueError("equality dimension mismatch")
    if eqs:
        eq_A = np.array([h.normal for h in eqs])
        eq_b = np.array([h.offset for h in eqs])
    else:
        eq_A = eq_b = None
    return solve_lp_arrays(c, A, b, eq_A, eq_b, seed=seed)


def is_empty(poly, seed=0):
    """True iff the polytope (closed, faces included) has no point at all."""
    res = solve_lp(np.zeros(poly.dim), poly, seed=seed)
    return res.status == LpStatus.INFEASIBLE


def support_interval(poly, direction, seed=0):
    """(min, max) of direction . x over the polytope."""
    lo = solve_lp(direction, poly, seed=seed)
    hi = solve_lp(-np.asarray(direction, dtype=float), poly, seed=seed)
    if lo.status == LpStatus.INFEASIBLE or hi.status == LpStatus.INFEASIBLE:
        raise ValueError("support interval of an empty polytope")
    lo_v = -np.inf if lo.status == LpStatus.UNBOUNDED else lo.value
    hi_v = np.inf if hi.status == LpStatus.UNBOUNDED else -hi.value
    return lo_v, hi_v


def hyperplane_cuts(poly, h, seed=0):
    """Classify a polytope against a hyperplane.

    CUTS iff both open sides contain points deeper than STRICT_TOL (on the
    unit-normalized plane); otherwise reports the side holding the polytope.
    Face-tangent polytopes count as lying on the side with interior points.
    """
    if h.dim != poly.dim:
        raise ValueError("hyperplane dimension mismatch")
    hn = h.normalized()
    lo, hi = support_interval(poly, hn.normal, seed=seed)
    below = lo < hn.offset - STRICT_TOL
    above = hi > hn.offset + STRICT_TOL
    if below and above:
        return CutResult.CUTS
    if above:
        return CutResult.ABOVE
    if below:
        return CutResult.BELOW
    # degenerate: polytope flat on the plane; call it BELOW per the
    # inactive-side ("<= 0 means off") convention
    return CutResult.BELOW


def remove_redundant_halfspaces(poly, seed=0):
    """Minimal halfspace description of the same set.

    Row i is dropped when maximizing its normal over the remaining rows
    (with row i relaxed) cannot exceed its offset. One LP per row; worth it
    for regions that accumulate rows through repeated splitting and then
    feed thousands of downstream LPs.
    """
    hs = list(poly.halfspaces)
    if len(hs) <= poly.dim + 1:
        return poly
    active = list(range(len(hs)))
    i = 0
    while i < len(active):
        idx = active[i]
        h = hs[idx]
        others = [hs[j] for j in active if j != idx]
        relaxed = Polytope(poly.dim,
                           others + [Halfspace(h.normal, h.offset + 1.0)],
                           poly.equalities)
        res = solve_lp(-h.normal, relaxed, seed=seed)
        if (res.status == LpStatus.OPTIMAL
                and -res.value <= h.offset + FEAS_TOL * max(1.0, abs(h.offset))):
            active.pop(i)
        else:
            i += 1
    if len(active) == len(hs):
        return poly
    return Polytope(poly.dim, [hs[j] for j in active], poly.equalities)


def split_by_hyperplanes(poly, hyperplanes, seed=0):
    """Cells of the hyperplane arrangement restricted to the polytope.

    Returns a list of (cell, sides) pairs where sides[i] is 1 when the cell
    lies on the normal ({normal . x >= offset}) side of hyperplanes[i] and 0
    otherwise. Only cells with nonempty interior (up to STRICT_TOL) survive;
    their closed regions tile the input polytope.
    """
    if is_empty(poly, seed=seed):
        raise ValueError("cannot split an empty polytope")
    cells = [(poly, ())]
    for h in hyperplanes:
        if h.dim != poly.dim:
            raise ValueError("hyperplane dimension mismatch")
        nxt = []
        for region, sides in cells:
            cut = hyperplane_cuts(region, h, seed=seed)
            if cut == CutResult.CUTS:
                nxt.append((region.with_halfspaces([h.lower()]), sides + (0,)))
                nxt.append((region.with_halfspaces([h.upper()]), sides + (1,)))
            elif cut == CutResult.ABOVE:
                nxt.append((region, sides + (1,)))
            else:
                nxt.append((region, sides + (0,)))
        cells = nxt
    return cells
