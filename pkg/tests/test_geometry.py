import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from capiset.geometry import (
    CutResult,
    Halfspace,
    Hyperplane,
    LpStatus,
    Polytope,
    hyperplane_cuts,
    is_empty,
    solve_lp,
    split_by_hyperplanes,
    support_interval,
)

STRICT = 1e-7


def strictly_feasible_sides(poly, hyperplanes, sides):
    """Independent oracle: does the sign cell given by `sides` have interior?

    Maximizes the worst slack over all signed halfplanes with one LP in
    (x, t); the cell counts as a real region when the optimum exceeds the
    strict tolerance used by the implementation.
    """
    dim = poly.dim
    hs = list(poly.halfspaces)
    aug = []
    for h in hs:
        aug.append((np.append(h.normal, 0.0), h.offset))
    for hp, side in zip(hyperplanes, sides):
        sign = 1.0 if side else -1.0
        # sign * (normal . x - offset) >= t  ->  -sign*normal . x + t <= -sign*offset
        aug.append((np.append(-sign * hp.normal, 1.0), -sign * hp.offset))
    big = Polytope(dim + 1, [Halfspace(a, b) for a, b in aug]
                   + [Halfspace(np.append(np.zeros(dim), 1.0), 1.0)])
    obj = np.append(np.zeros(dim), -1.0)
    res = solve_lp(obj, big)
    if res.status != LpStatus.OPTIMAL:
        return False
    return -res.value > STRICT


class TestSolveLp:
    def test_box_minimum(self):
        poly = Polytope.box([0.0], [1.0])
        res = solve_lp(np.array([1.0]), poly)
        assert res.status == LpStatus.OPTIMAL
        assert res.value == pytest.approx(0.0, abs=1e-9)
        assert res.point == pytest.approx([0.0], abs=1e-9)

    def test_contradictory_halfspaces(self):
        poly = Polytope(1, [Halfspace(np.array([1.0]), 0.0),
                            Halfspace(np.array([-1.0]), -1.0)])
        assert solve_lp(np.array([1.0]), poly).status == LpStatus.INFEASIBLE

    def test_square_diagonal_equality(self):
        # oracle: enumerate square vertices on the diagonal x1 = x2
        square = Polytope.box([0.0, 0.0], [1.0, 1.0])
        diag_vertices = [(0.0, 0.0), (1.0, 1.0)]
        expected = min(a + b for a, b in diag_vertices)
        res = solve_lp(np.array([1.0, 1.0]), square,
                       extra_equalities=[Hyperplane(np.array([1.0, -1.0]), 0.0)])
        assert res.status == LpStatus.OPTIMAL
        assert res.value == pytest.approx(expected, abs=1e-9)
        assert res.point == pytest.approx([0.0, 0.0], abs=1e-9)

    def test_unbounded(self):
        assert solve_lp(np.array([1.0]), Polytope(1)).status == LpStatus.UNBOUNDED

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            solve_lp(np.array([1.0, 2.0]), Polytope.box([0.0], [1.0]))

    def test_optimal_point_feasible(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            A = rng.normal(size=(12, 3))
            b = rng.uniform(0.5, 2.0, size=12)  # contains the origin
            poly = Polytope(3, [Halfspace(a, bb) for a, bb in zip(A, b)])
            c = rng.normal(size=3)
            res = solve_lp(c, poly, seed=trial)
            assert res.status == LpStatus.OPTIMAL
            assert np.all(A @ res.point <= b + 1e-7)

    def test_matches_scipy_on_random_bounded_lps(self):
        from scipy.optimize import linprog
        rng = np.random.default_rng(42)
        for trial in range(60):
            d = int(rng.integers(1, 5))
            A = rng.normal(size=(3 * d + 2, d))
            b = rng.uniform(0.2, 2.0, size=3 * d + 2)
            # bounding box rows keep the problem bounded for any objective
            A = np.vstack([A, np.eye(d), -np.eye(d)])
            b = np.concatenate([b, np.full(2 * d, 3.0)])
            c = rng.normal(size=d)
            poly = Polytope(d, [Halfspace(a, bb) for a, bb in zip(A, b)])
            res = solve_lp(c, poly, seed=trial)
            ref = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * d,
                          method="highs")
            assert res.status == LpStatus.OPTIMAL
            assert res.value == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)

    @given(seed=st.integers(0, 2 ** 20))
    @settings(max_examples=25, deadline=None)
    def test_seeded_reproducibility(self, seed):
        rng = np.random.default_rng(123)
        A = rng.normal(size=(10, 3))
        b = rng.uniform(0.5, 1.5, size=10)
        poly = Polytope(3, [Halfspace(a, bb) for a, bb in zip(A, b)])
        c = rng.normal(size=3)
        r1 = solve_lp(c, poly, seed=seed)
        r2 = solve_lp(c, poly, seed=seed)
        assert r1.value == r2.value
        assert np.array_equal(r1.point, r2.point)


class TestIsEmpty:
    def test_contradiction(self):
        poly = Polytope(1, [Halfspace(np.array([1.0]), 0.0),
                            Halfspace(np.array([-1.0]), -1.0)])
        assert is_empty(poly)

    def test_unit_box(self):
        assert not is_empty(Polytope.box([0.0, 0.0], [1.0, 1.0]))

    def test_sum_of_lower_bounds_exceeds_upper(self):
        # x1 + x2 <= 1, x1 >= 1, x2 >= 1 is empty: lower bounds sum to 2 > 1
        poly = Polytope(2, [Halfspace(np.array([1.0, 1.0]), 1.0),
                            Halfspace(np.array([-1.0, 0.0]), -1.0),
                            Halfspace(np.array([0.0, -1.0]), -1.0)])
        assert is_empty(poly)

    def test_single_point_face_counts_nonempty(self):
        poly = Polytope(1, [Halfspace(np.array([1.0]), 0.0),
                            Halfspace(np.array([-1.0]), 0.0)])
        assert not is_empty(poly)

    def test_nonempty_implies_solvable(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            A = rng.normal(size=(8, 2))
            b = rng.uniform(-0.2, 1.0, size=8)
            poly = Polytope(2, [Halfspace(a, bb) for a, bb in zip(A, b)])
            if not is_empty(poly):
                res = solve_lp(rng.normal(size=2), poly, seed=trial)
                assert res.status != LpStatus.INFEASIBLE


class TestHyperplaneCuts:
    def test_square_cut(self, unit_square):
        assert hyperplane_cuts(unit_square,
                               Hyperplane(np.array([1.0, 0.0]), 0.5)) == CutResult.CUTS

    def test_square_below(self, unit_square):
        assert hyperplane_cuts(unit_square,
                               Hyperplane(np.array([1.0, 0.0]), 2.0)) == CutResult.BELOW

    def test_tangent_face_is_above(self):
        square = Polytope.box([0.5, 0.5], [1.0, 1.0])
        assert hyperplane_cuts(square,
                               Hyperplane(np.array([1.0, 0.0]), 0.5)) == CutResult.ABOVE

    def test_empty_polytope_rejected(self):
        empty = Polytope(1, [Halfspace(np.array([1.0]), 0.0),
                             Halfspace(np.array([-1.0]), -1.0)])
        with pytest.raises(ValueError):
            hyperplane_cuts(empty, Hyperplane(np.array([1.0]), 0.3))


class TestSplit:
    def test_one_line(self, unit_square):
        cells = split_by_hyperplanes(unit_square, [Hyperplane(np.array([1.0, 0.0]), 0.5)])
        assert len(cells) == 2

    def test_two_lines(self, unit_square):
        hs = [Hyperplane(np.array([1.0, 0.0]), 0.5),
              Hyperplane(np.array([0.0, 1.0]), 0.5)]
        assert len(split_by_hyperplanes(unit_square, hs)) == 4

    def test_three_lines_five_cells(self, unit_square):
        # x1 + x2 = 0.3 only crosses the lower-left quadrant: oracle below
        hs = [Hyperplane(np.array([1.0, 0.0]), 0.5),
              Hyperplane(np.array([0.0, 1.0]), 0.5),
              Hyperplane(np.array([1.0, 1.0]), 0.3)]
        expected = sum(
            1 for sides in itertools.product((0, 1), repeat=3)
            if strictly_feasible_sides(unit_square, hs, sides))
        assert expected == 5
        cells = split_by_hyperplanes(unit_square, hs)
        assert len(cells) == expected

    def test_cells_cover_and_are_disjoint(self, unit_square):
        rng = np.random.default_rng(11)
        hs = [Hyperplane(rng.normal(size=2), rng.uniform(-0.3, 0.8))
              for _ in range(4)]
        cells = split_by_hyperplanes(unit_square, hs)
        pts = rng.uniform(0, 1, size=(2000, 2))
        hits = np.zeros(len(pts), dtype=int)
        for region, _ in cells:
            A, b = region.matrices()
            hits += np.all(pts @ A.T <= b + 1e-9, axis=1)
        assert np.all(hits >= 1)
        # points strictly inside one cell belong to exactly one
        strict_hits = np.zeros(len(pts), dtype=int)
        for region, _ in cells:
            A, b = region.matrices()
            strict_hits += np.all(pts @ A.T <= b - 1e-9, axis=1)
        assert np.all(strict_hits <= 1)

    @given(seed=st.integers(0, 10 ** 6))
    @settings(max_examples=20, deadline=None)
    def test_cells_match_sign_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        square = Polytope.box([0.0, 0.0], [1.0, 1.0])
        k = int(rng.integers(1, 5))
        hs = []
        for _ in range(k):
            n = rng.normal(size=2)
            n /= np.linalg.norm(n)
            hs.append(Hyperplane(n, rng.uniform(-0.5, 1.2)))
        cells = split_by_hyperplanes(square, hs)
        got = sorted(sides for _, sides in cells)
        expected = sorted(
            sides for sides in itertools.product((0, 1), repeat=k)
            if strictly_feasible_sides(square, hs, sides))
        assert got == expected


class TestSupportInterval:
    def test_box(self):
        poly = Polytope.box([-2.0, 1.0], [3.0, 4.0])
        lo, hi = support_interval(poly, np.array([1.0, 0.0]))
        assert (lo, hi) == pytest.approx((-2.0, 3.0), abs=1e-9)
