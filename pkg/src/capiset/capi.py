"""Maximal admissible Lyapunov level over a partition tree.

The level for one reference is the minimum of the Lyapunov function on the
admissible-set boundary, found by solving one small LP per (Lyapunov region,
constraint piece) pair and taking the minimum. Two pruning strategies cut
the pair count: plane pruning skips regions separated from a constraint
piece by a non-cutting first-layer hyperplane (a bitmask test on the
activation pattern); bound pruning skips subtrees whose Lyapunov lower
bound already exceeds the running minimum. Neither changes the result.

Coordinate convention: the partition tree lives in shifted coordinates
y = x - x_bar(r). Pair LPs translate the Lyapunov region by +x_bar into
state coordinates; constraint pieces stay in state coordinates.
"""

import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .geometry import (
    CutResult,
    Halfspace,
    Hyperplane,
    LpResult,
    LpStatus,
    NumericalFailure,
    Polytope,
    hyperplane_cuts,
    is_empty,
    solve_lp,
    solve_lp_arrays,
    support_interval,
)
from .pwanet import AffinePiece, forward_batch

_ZERO_TOL = 1e-9


class InfeasibleReference(ValueError):
    """The reference's equilibrium violates a constraint."""


@dataclass(frozen=True, eq=False)
class PwaConstraint:
    """A continuous PWA constraint function c with admissible set {c <= 0}.

    Each piece is (partition polytope, affine map); partitions have disjoint
    interiors and the induced function is continuous across shared faces.
    """

    pieces: tuple
    name: str = "c"

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if not self.pieces:
            raise ValueError("constraint needs at least one piece")
        object.__setattr__(self, "_violating_cache", None)

    def value(self, x, tol=1e-7):
        x = np.asarray(x, dtype=float)
        best = None
        best_viol = np.inf
        for region, piece in self.pieces:
            A, b = region.matrices()
            viol = float(np.max(A @ x - b)) if len(b) else 0.0
            if viol <= tol:
                return piece(x)
            if viol < best_viol:
                best_viol = viol
                best = piece
        if best is None:
            raise ValueError("constraint has no pieces")
        if best_viol > 1e-6:
            raise ValueError(f"point {x} lies outside every constraint piece")
        return best(x)

    def value_batch(self, X):
        X = np.asarray(X, dtype=float)
        if len(self.pieces) == 1:
            _, piece = self.pieces[0]
            return X @ piece.C + piece.d
        out = np.full(X.shape[0], np.nan)
        for region, piece in self.pieces:
            A, b = region.matrices()
            inside = np.all(X @ A.T <= b + 1e-9, axis=1) if len(b) else np.ones(X.shape[0], bool)
            out[inside] = X[inside] @ piece.C + piece.d
        if np.any(np.isnan(out)):
            raise ValueError("constraint pieces do not cover all queried points")
        return out

    def violating_pieces(self):
        """Indices of pieces holding at least one inadmissible state (max c > 0).

        Reference independent, computed once and cached.
        """
        cached = object.__getattribute__(self, "_violating_cache")
        if cached is not None:
            return cached
        keep = []
        for i, (region, piece) in enumerate(self.pieces):
            res = solve_lp(-piece.C, region)
            if res.status == LpStatus.UNBOUNDED:
                keep.append(i)
            elif res.status == LpStatus.OPTIMAL and -res.value + piece.d > 0.0:
                keep.append(i)
        keep = tuple(keep)
        object.__setattr__(self, "_violating_cache", keep)
        return keep



@dataclass
class LevelResult:
    """Gamma-star with the witness state and solve statistics."""

    gamma_star: float
    argmin: np.ndarray | None
    binding: str | None
    counters: dict
    wall_seconds: float
    reference: np.ndarray | None = None

    @property
    def bounded(self):
        return math.isfinite(self.gamma_star)


def box_constraints(lower, upper):
    """One single-piece affine constraint per finite coordinate bound.

    `lower`/`upper` are sequences with None where a bound is absent; the
    piece's partition is all of space (the admissible boundary is a single
    hyperplane, so one piece suffices).
    """
    lower = list(lower)
    upper = list(upper)
    if len(lower) != len(upper):
        raise ValueError("bound vectors must have equal length")
    dim = len(lower)
    everything = Polytope(dim)
    out = []
    for i, (lo, hi) in enumerate(zip(lower, upper)):
        if lo is not None and hi is not None and lo >= hi:
            raise ValueError(f"coordinate {i}: lower bound {lo} >= upper bound {hi}")
        e = np.zeros(dim)
        e[i] = 1.0
        if hi is not None:
            out.append(PwaConstraint(((everything, AffinePiece(e, -float(hi))),),
                                     name=f"x{i}_max"))
        if lo is not None:
            out.append(PwaConstraint(((everything, AffinePiece(-e, float(lo))),),
                                     name=f"x{i}_min"))
    return out


def find_inactive_hyperplanes(first_layer_planes, pc):
    """Alg.-3 inactive set for one constraint partition.

    `first_layer_planes` is a list of (neuron index, unit hyperplane) pairs.
    For each plane that does not cut `pc`, records (neuron, forbidden bit):
    Lyapunov regions whose first-layer bit equals the forbidden bit lie on
    the far side of the plane and cannot intersect `pc`.
    """
    entries = set()
    for j, plane in first_layer_planes:
        cut = hyperplane_cuts(pc, plane)
        if cut == CutResult.CUTS:
            continue
        pc_bit = 1 if cut == CutResult.ABOVE else 0
        entries.add((j, 1 - pc_bit))
    return frozenset(entries)


class _EqualityReducer:
    """Pre-factored elimination of one equality row C . x = e."""

    def __init__(self, C, e):
        C = np.asarray(C, dtype=float)
        self.pivot = int(np.argmax(np.abs(C)))
        cp = C[self.pivot]
        if abs(cp) <= 1e-13:
            raise ValueError("degenerate equality row")
        self.g = np.delete(C, self.pivot) / cp
        self.beta = float(e) / cp

    def rows(self, A, b):
        col = A[:, self.pivot]
        A2 = np.delete(A, self.pivot, axis=1) - np.outer(col, self.g)
        return A2, b - col * self.beta

    def objective(self, c):
        cp = c[self.pivot]
        return np.delete(c, self.pivot) - cp * self.g, cp * self.beta

    def lift(self, y):
        xp = self.beta - float(self.g @ y)
        return np.insert(y, self.pivot, xp)


def pair_lp(piece_V, region_V, piece_c, region_c, r_shift, seed=0):
    """Minimum Lyapunov value on one (region, constraint piece) pair.

    Minimizes C_V (x - x_bar) + d_V over the shifted Lyapunov region
    intersected with the constraint partition and the boundary c(x) = 0.
    """
    r_shift = np.asarray(r_shift, dtype=float)
    shifted = region_V.translate(r_shift)
    combined = Polytope(
        shifted.dim,
        shifted.halfspaces + region_c.halfspaces,
        shifted.equalities + region_c.equalities,
    )
    eq = Hyperplane(piece_c.C, -piece_c.d)
    res = solve_lp(piece_V.C, combined, extra_equalities=[eq], seed=seed)
    if res.status != LpStatus.OPTIMAL:
        return res
    gamma = res.value - float(piece_V.C @ r_shift) + piece_V.d
    return LpResult(LpStatus.OPTIMAL, gamma, res.point)


class _QueryPiece:
    """One constraint piece prepared for a specific reference shift."""

    __slots__ = ("constraint_name", "region", "piece", "A", "b", "C", "d",
                 "reducer", "A_red", "b_red", "mask_one", "mask_zero",
                 "bbox_lower", "bbox_upper")

    def __init__(self, name, region, piece):
        self.constraint_name = name
        self.region = region
        self.piece = piece
        self.A, self.b = region.matrices()
        self.C = piece.C
        self.d = piece.d
        self.reducer = _EqualityReducer(piece.C, -piece.d)
        self.A_red, self.b_red = self.reducer.rows(self.A, self.b) if len(self.b) else (
            np.zeros((0, len(piece.C) - 1)), np.zeros(0))
        self.mask_one = 0
        self.mask_zero = 0
        self.bbox_lower = None
        self.bbox_upper = None


def _leaf_cache(tree):
    """Per-leaf arrays reused across queries (built lazily on the tree)."""
    cache = getattr(tree, "_leaf_cache", None)
    if cache is not None:
        return cache
    masks = np.zeros(len(tree.leaves), dtype=np.int64)
    for i, leaf in enumerate(tree.leaves):
        m = 0
        for j, bit in enumerate(leaf.pattern.layer(0)):
            if bit:
                m |= 1 << j
        masks[i] = m
    if tree.leaves and tree.leaves[0].bbox_lower is not None:
        bl = np.array([leaf.bbox_lower for leaf in tree.leaves])
        bu = np.array([leaf.bbox_upper for leaf in tree.leaves])
        v_lo = np.array([leaf.v_lower for leaf in tree.leaves])
    else:
        bl = bu = v_lo = None
    # CSR-packed leaf halfspace rows for the numba sweep
    ptr = np.zeros(len(tree.leaves) + 1, dtype=np.int64)
    blocks_A = []
    blocks_b = []
    for i, leaf in enumerate(tree.leaves):
        A, b = leaf.matrices()
        ptr[i + 1] = ptr[i] + len(b)
        blocks_A.append(A)
        blocks_b.append(b)
    rows = np.ascontiguousarray(np.vstack(blocks_A))
    rhs = np.concatenate(blocks_b)
    cache = {
        "masks": masks, "bbox_lower": bl, "bbox_upper": bu, "v_lower": v_lo,
        "rows": rows, "rhs": rhs, "ptr": ptr,
        "C": np.array([leaf.piece.C for leaf in tree.leaves]),
        "d": np.array([leaf.piece.d for leaf in tree.leaves]),
    }
    tree._leaf_cache = cache
    return cache


def _prepare_query_pieces(tree, constraints, x_bar, use_plane_pruning, counters):
    """Screen and prepare constraint pieces for one reference.

    Pieces with no inadmissible state are dropped (cached, reference
    independent); pieces whose working region (piece partition, inadmissible
    side, shifted domain) is empty are skipped for this reference.
    Plane-pruning bitmasks are derived from first-layer planes that miss the
    working region.
    """
    dim = tree.domain.dim
    shifted_domain = tree.domain.translate(x_bar)
    prepared = []
    for con in constraints:
        for idx in con.violating_pieces():
            region, piece = con.pieces[idx]
            # keep only pieces with a strictly inadmissible state reachable
            # inside the shifted domain; a boundary grazing the domain face
            # yields no inadmissible states and hence no level cap
            scoped = Polytope(
                dim,
                region.halfspaces + shifted_domain.halfspaces,
                region.equalities,
            )
            mx = solve_lp(-piece.C, scoped)
            if mx.status != LpStatus.OPTIMAL or -mx.value + piece.d <= _ZERO_TOL:
                counters["pieces_screened"] += 1
                continue
            slab = Halfspace(-piece.C, piece.d)  # {c(x) >= 0}
            work = scoped.with_halfspaces([slab])
            qp = _QueryPiece(con.name, region, piece)
            lo = np.empty(dim)
            hi = np.empty(dim)
            for i in range(dim):
                e = np.zeros(dim)
                e[i] = 1.0
                lo[i], hi[i] = support_interval(work, e)
            qp.bbox_lower = lo
            qp.bbox_upper = hi
            if use_plane_pruning:
                shifted_planes = [
                    (j, Hyperplane(p.normal, p.offset + float(p.normal @ x_bar)))
                    for j, p in tree.first_layer_planes
                ]
                for j, forbidden in find_inactive_hyperplanes(shifted_planes, work):
                    if forbidden:
                        qp.mask_one |= 1 << j
                    else:
                        qp.mask_zero |= 1 << j
            prepared.append(qp)
    return prepared


def _count_leaves(node):
    if node.is_leaf:
        return 1
    return sum(_count_leaves(ch) for ch in node.children)


def max_admissible_level(tree, constraints, r, emap, use_plane_pruning=True,
                         use_bound_pruning=True, prefilter=True, seed=0):
    """Maximal admissible Lyapunov level for one reference.

    Traverses the annotated partition tree breadth first, solving the pair
    LP for every surviving (leaf, constraint piece) combination and returning
    the minimum with its witness. Returns +inf (unbounded sentinel) when no
    constraint piece holds an inadmissible state near the shifted domain.

    Raises InfeasibleReference when a constraint is strictly violated at the
    reference equilibrium; returns 0 when one is exactly active there.
    """
    t0 = time.perf_counter()
    if not tree.leaves:
        raise ValueError("empty partition tree")
    if use_bound_pruning and not tree.annotated:
        raise ValueError(
            "tree must be annotated for bound pruning (run annotate_lower_bounds)")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x_bar = emap.equilibrium(r)
    counters = {
        "lps_solved": 0, "pruned_planes": 0, "pruned_bounds": 0,
        "pruned_prefilter": 0, "infeasible": 0, "pieces_screened": 0,
    }

    for con in constraints:
        v = con.value(x_bar)
        if v > _ZERO_TOL:
            raise InfeasibleReference(
                f"constraint {con.name} has value {v:.3e} > 0 at the equilibrium")
    for con in constraints:
        if abs(con.value(x_bar)) <= _ZERO_TOL:
            return LevelResult(0.0, x_bar.copy(), con.name, counters,
                               time.perf_counter() - t0, r)

    pieces = _prepare_query_pieces(tree, constraints, x_bar,
                                   use_plane_pruning, counters)
    if not pieces:
        return LevelResult(math.inf, None, None, counters,
                           time.perf_counter() - t0, r)

    if prefilter:
        best, best_point, best_name = _sweep_pairs(
            tree, pieces, x_bar, use_plane_pruning, use_bound_pruning, counters)
    else:
        best, best_point, best_name = _bfs_pairs(
            tree, pieces, x_bar, use_plane_pruning, use_bound_pruning, counters, seed)

    if best_point is not None and best < 0.0:
        best = 0.0  # float dust below the exact zero level
    return LevelResult(best if best_point is not None else math.inf,
                       best_point, best_name, counters,
                       time.perf_counter() - t0, r)


def _bfs_pairs(tree, pieces, x_bar, use_plane_pruning, use_bound_pruning, counters, seed):
    """Reference breadth-first pair enumeration (one LP call per pair)."""
    cache = _leaf_cache(tree)
    masks = cache["masks"]
    best = math.inf
    best_point = None
    best_name = None
    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        if use_bound_pruning and node.v_lower is not None and node.v_lower > best:
            counters["pruned_bounds"] += _count_leaves(node) * len(pieces)
            continue
        if not node.is_leaf:
            children = node.children
            if use_bound_pruning and all(ch.v_lower is not None for ch in children):
                children = sorted(children, key=lambda ch: ch.v_lower)
            queue.extend(children)
            continue
        leaf = node
        lmask = int(masks[leaf.leaf_index])
        A_leaf, b_leaf = leaf.matrices()
        b_shift = b_leaf + A_leaf @ x_bar if len(b_leaf) else b_leaf
        for qp in pieces:
            if use_plane_pruning and ((lmask & qp.mask_one) or ((~lmask) & qp.mask_zero)):
                counters["pruned_planes"] += 1
                continue
            red = qp.reducer
            A1, b1 = red.rows(A_leaf, b_shift) if len(b_leaf) else (
                np.zeros((0, len(qp.C) - 1)), np.zeros(0))
            A = np.vstack([A1, qp.A_red]) if len(qp.b_red) else A1
            b = np.concatenate([b1, qp.b_red]) if len(qp.b_red) else b1
            obj, const = red.objective(leaf.piece.C)
            res = solve_lp_arrays(obj, A, b, seed=seed)
            counters["lps_solved"] += 1
            if res.status != LpStatus.OPTIMAL:
                counters["infeasible"] += 1
                continue
            gamma = res.value + const - float(leaf.piece.C @ x_bar) + leaf.piece.d
            if gamma < best:
                best = gamma
                best_point = red.lift(res.point)
                best_name = qp.constraint_name
    return best, best_point, best_name


def _sweep_pairs(tree, pieces, x_bar, use_plane_pruning, use_bound_pruning, counters):
    """Fast pair enumeration: bound-sorted batched LP sweep per piece.

    Candidate leaves pass an exact box/plane reachability screen; surviving
    pairs are solved in ascending order of a valid lower bound (box
    relaxation of the pair LP, tightened by the leaf's Lyapunov floor when
    bound pruning is on), stopping once the bound can no longer beat the running
    minimum. The winning pair is re-solved through the reference LP path
    and must agree to 1e-9, so a kernel inconsistency cannot pass silently.
    """
    from .seidel import pair_sweep

    cache = _leaf_cache(tree)
    masks = cache["masks"]
    bl_x = cache["bbox_lower"] + x_bar
    bu_x = cache["bbox_upper"] + x_bar
    Cmat = cache["C"]
    dvec = cache["d"]
    rows = cache["rows"]
    rhs_shift = cache["rhs"] + rows @ x_bar
    ptr = cache["ptr"]
    n_leaves = len(tree.leaves)

    best = math.inf
    best_leaf = None
    best_qp = None
    for qp in pieces:
        mask = np.all(bl_x <= qp.bbox_upper + 1e-9, axis=1)
        mask &= np.all(qp.bbox_lower <= bu_x + 1e-9, axis=1)
        plane_lo = np.minimum(bl_x * qp.C, bu_x * qp.C).sum(axis=1)
        plane_hi = np.maximum(bl_x * qp.C, bu_x * qp.C).sum(axis=1)
        mask &= (plane_lo <= -qp.d + 1e-9) & (plane_hi >= -qp.d - 1e-9)
        counters["pruned_prefilter"] += int(n_leaves - np.count_nonzero(mask))
        if use_plane_pruning and (qp.mask_one or qp.mask_zero):
            plane_hit = ((masks & qp.mask_one) != 0) | ((~masks & qp.mask_zero) != 0)
            counters["pruned_planes"] += int(np.count_nonzero(mask & plane_hit))
            mask &= ~plane_hit
        cand = np.nonzero(mask)[0].astype(np.int64)
        if not len(cand):
            continue
        red = qp.reducer
        piv = red.pivot
        # box relaxation of each pair LP, with the boundary coordinate
        # pinned when the boundary is axis aligned (then it is exact in
        # that coordinate)
        lo2 = bl_x.copy()
        hi2 = bu_x.copy()
        if np.count_nonzero(qp.C) == 1:
            pin = -qp.d / qp.C[piv]
            lo2[:, piv] = pin
            hi2[:, piv] = pin
        bounds = (np.minimum(Cmat * lo2, Cmat * hi2).sum(axis=1)
                  + dvec - Cmat @ x_bar)
        if use_bound_pruning and cache["v_lower"] is not None:
            bounds = np.maximum(bounds, cache["v_lower"])
        obj_red = np.delete(Cmat, piv, axis=1) - Cmat[:, piv:piv + 1] * red.g
        gamma_off = Cmat[:, piv] * red.beta + dvec - Cmat @ x_bar
        order = np.argsort(bounds[cand], kind="stable")
        cand_sorted = cand[order]
        bounds_sorted = np.ascontiguousarray(bounds[cand_sorted])
        g, b_lp, y, nlp, ninf = pair_sweep(
            rows, rhs_shift, ptr, cand_sorted, bounds_sorted,
            np.ascontiguousarray(obj_red), gamma_off,
            piv, red.g, red.beta, qp.A_red, qp.b_red, best)
        counters["lps_solved"] += int(nlp)
        counters["infeasible"] += int(ninf)
        counters["pruned_bounds"] += int(len(cand_sorted) - nlp)
        if b_lp >= 0 and g < best:
            best = g
            best_leaf = tree.leaves[int(b_lp)]
            best_qp = qp

    if best_leaf is None:
        return math.inf, None, None
    check = pair_lp(best_leaf.piece, best_leaf.region, best_qp.piece,
                    best_qp.region, x_bar)
    if check.status != LpStatus.OPTIMAL or abs(check.value - best) > 1e-9:
        raise NumericalFailure(
            f"sweep/reference disagreement: {best!r} vs {check.value!r}")
    return best, check.point, best_qp.constraint_name


def max_admissible_level_convex(tree, A_c, b_c, boundary_piece, r, emap,
                                use_bound_pruning=True, seed=0):
    """Single-LP-per-region variant for one facet of a convex admissible set.

    For the admissible polytope {A_c x <= b_c} and the affine boundary
    function of one facet, solves min C_V (x - x_bar) + d_V over each
    Lyapunov region intersected with the polytope and the facet plane,
    skipping the per-piece iteration of the general path.
    """
    t0 = time.perf_counter()
    A_c = np.asarray(A_c, dtype=float)
    b_c = np.asarray(b_c, dtype=float)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x_bar = emap.equilibrium(r)
    counters = {"lps_solved": 0, "pruned_bounds": 0, "infeasible": 0}

    v_eq = boundary_piece(x_bar)
    if v_eq > _ZERO_TOL:
        raise InfeasibleReference(
            f"facet function is {v_eq:.3e} > 0 at the equilibrium")
    slack = A_c @ x_bar - b_c
    if np.any(slack > _ZERO_TOL):
        raise InfeasibleReference("equilibrium outside the admissible polytope")
    if abs(v_eq) <= _ZERO_TOL:
        return LevelResult(0.0, x_bar.copy(), "facet", counters,
                           time.perf_counter() - t0, r)

    dim = tree.domain.dim
    facet = Polytope(
        dim,
        [Halfspace(a, bb) for a, bb in zip(A_c, b_c)]
        + list(tree.domain.translate(x_bar).halfspaces),
        [Hyperplane(boundary_piece.C, -boundary_piece.d)],
    )
    if is_empty(facet):
        return LevelResult(math.inf, None, None, counters,
                           time.perf_counter() - t0, r)

    reducer = _EqualityReducer(boundary_piece.C, -boundary_piece.d)
    A_red, b_red = reducer.rows(A_c, b_c)

    best = math.inf
    best_point = None
    queue = deque([tree.root])
    while queue:
        node = queue.popleft()
        if use_bound_pruning and node.v_lower is not None and node.v_lower > best:
            counters["pruned_bounds"] += _count_leaves(node)
            continue
        if not node.is_leaf:
            children = node.children
            if use_bound_pruning and all(ch.v_lower is not None for ch in children):
                children = sorted(children, key=lambda ch: ch.v_lower)
            queue.extend(children)
            continue
        leaf = node
        A_leaf, b_leaf = leaf.matrices()
        b_shift = b_leaf + A_leaf @ x_bar if len(b_leaf) else b_leaf
        A1, b1 = reducer.rows(A_leaf, b_shift)
        A = np.vstack([A1, A_red])
        b = np.concatenate([b1, b_red])
        obj, const = reducer.objective(leaf.piece.C)
        res = solve_lp_arrays(obj, A, b, seed=seed)
        counters["lps_solved"] += 1
        if res.status != LpStatus.OPTIMAL:
            counters["infeasible"] += 1
            continue
        gamma = res.value + const - float(leaf.piece.C @ x_bar) + leaf.piece.d
        if gamma < best:
            best = gamma
            best_point = reducer.lift(res.point)

    if best_point is not None and best < 0.0:
        best = 0.0
    return LevelResult(best if best_point is not None else math.inf,
                       best_point, "facet" if best_point is not None else None,
                       counters, time.perf_counter() - t0, r)


def grid_oracle_gamma(net, emap, constraints, r, resolution, domain):
    """Independent grid estimate of the admissible level.

    Evaluates the Lyapunov value on a regular grid over the shifted domain
    and returns its minimum over the corners of grid cells straddling a
    constraint boundary {c = 0}. Converges to the true level from either
    side as the grid refines; use with slack, not as exact truth.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    x_bar = emap.equilibrium(r)
    from .partition import _domain_bbox
    lo, hi = _domain_bbox(domain)
    dim = len(lo)
    if np.isscalar(resolution):
        res = [int(resolution)] * dim
    else:
        res = [int(v) for v in resolution]
    cells = 1
    for v in res:
        cells *= max(v - 1, 1)
    if cells > 10 ** 8:
        raise ValueError(f"grid has {cells} cells, over the 1e8 cap")
    full = [(lo[i] + x_bar[i], hi[i] + x_bar[i]) for i in range(dim)]
    gamma = math.inf
    for con in constraints:
        g, x_best = _min_boundary_crossing(net, con, x_bar, full, res)
        # zoom passes: re-grid a shrinking window around the incumbent
        # minimizer so the along-boundary discretization error vanishes
        passes = 3 if dim <= 2 else 2
        pts_per_axis = 41 if dim <= 2 else 11
        cur_win, cur_res = full, res
        for _ in range(passes):
            if x_best is None:
                break
            spans = [(cur_win[i][1] - cur_win[i][0]) / (cur_res[i] - 1) * 2.0
                     for i in range(dim)]
            window = [(max(x_best[i] - spans[i], full[i][0]),
                       min(x_best[i] + spans[i], full[i][1]))
                      for i in range(dim)]
            g2, x2 = _min_boundary_crossing(net, con, x_bar, window,
                                            [pts_per_axis] * dim)
            if x2 is None or g2 >= g:
                break
            g, x_best = g2, x2
            cur_win, cur_res = window, [pts_per_axis] * dim
        gamma = min(gamma, g)
    return gamma


def _min_boundary_crossing(net, con, x_bar, windows, res):
    """Min Lyapunov value over interpolated {c = 0} crossings of a grid.

    Walks every grid edge; where the constraint strictly changes sign the
    crossing is linearly interpolated (exact when both endpoints share an
    affine piece) and the network is evaluated on the boundary point.
    """
    dim = len(windows)
    axes = [np.linspace(w[0], w[1], r) for w, r in zip(windows, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    cvals = con.value_batch(pts).reshape(res)
    flat = pts.reshape(tuple(res) + (dim,))
    best = math.inf
    best_x = None
    for ax in range(dim):
        sl_lo = [slice(None)] * dim
        sl_hi = [slice(None)] * dim
        sl_lo[ax] = slice(0, -1)
        sl_hi[ax] = slice(1, None)
        c0 = cvals[tuple(sl_lo)]
        c1 = cvals[tuple(sl_hi)]
        cross = (c0 > 0.0) ^ (c1 > 0.0)
        if not np.any(cross):
            continue
        p0 = flat[tuple(sl_lo)][cross]
        p1 = flat[tuple(sl_hi)][cross]
        a = c0[cross]
        b = c1[cross]
        t = np.clip(a / (a - b), 0.0, 1.0)
        xc = p0 + t[:, None] * (p1 - p0)
        vals = forward_batch(net, xc - x_bar)
        i = int(np.argmin(vals))
        if vals[i] < best:
            best = float(vals[i])
            best_x = xc[i]
    return best, best_x
