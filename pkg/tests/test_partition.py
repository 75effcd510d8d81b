import itertools

import numpy as np
import pytest

from capiset.geometry import Halfspace, LpStatus, Polytope, solve_lp
from capiset.partition import (
    NotInDomain,
    annotate_lower_bounds,
    build_partition_tree,
    locate,
)
from capiset.pwanet import PwaNetwork, forward, forward_batch

STRICT = 1e-7


def feasible_patterns(net, domain):
    """Exhaustive activation-pattern enumeration oracle (<= 12 neurons).

    For each candidate full pattern, builds the signed pre-activation
    constraints of every neuron (using the pattern's own prefix products)
    and asks one max-slack LP whether the region has interior.
    """
    widths = net.hidden_widths
    total = sum(widths)
    assert total <= 12
    dim = net.input_dim
    out = set()
    for bits_flat in itertools.product((0, 1), repeat=total):
        bits = []
        k = 0
        for w in widths:
            bits.append(tuple(bits_flat[k:k + w]))
            k += w
        rows = []
        T = np.eye(dim + 1)
        degenerate_ok = True
        for l, w in enumerate(widths):
            F, b = net.layers[l]
            theta = np.hstack([F, b[:, None]])
            pre_rows = theta @ T
            for j in range(w):
                wvec = pre_rows[j, :-1]
                cst = pre_rows[j, -1]
                scale = np.linalg.norm(wvec)
                if scale <= 1e-12:
                    if (cst > 0) != bool(bits[l][j]):
                        degenerate_ok = False
                    continue
                sign = 1.0 if bits[l][j] else -1.0
                rows.append((sign * wvec / scale, sign * cst / scale))
            lam = np.diag([float(bb) for bb in bits[l]] + [1.0])
            T = lam @ np.vstack([pre_rows, np.append(np.zeros(dim), 1.0)])
        if not degenerate_ok:
            continue
        # max-slack LP in (x, t): every signed pre-activation >= t
        hs = list(domain.halfspaces)
        aug = [(np.append(h.normal, 0.0), h.offset) for h in hs]
        for wvec, cst in rows:
            aug.append((np.append(-wvec, 1.0), cst))
        aug.append((np.append(np.zeros(dim), 1.0), 1.0))
        big = Polytope(dim + 1, [Halfspace(a, bb) for a, bb in aug])
        res = solve_lp(np.append(np.zeros(dim), -1.0), big)
        if res.status == LpStatus.OPTIMAL and -res.value > STRICT:
            out.add(tuple(bits))
    return out


class TestBuild:
    def test_abs_two_leaves(self, abs_net):
        tree = build_partition_tree(abs_net, Polytope.box([-1.0], [1.0]))
        assert tree.n_leaves == 2
        pieces = sorted((lf.piece.C[0], lf.piece.d) for lf in tree.leaves)
        assert pieces == [(-1.0, 0.0), (1.0, 0.0)]

    def test_two_generic_neurons_four_leaves(self):
        net = PwaNetwork([(np.array([[1.0, 0.2], [-0.3, 1.0]]), np.array([0.1, -0.1])),
                          (np.array([[1.0, 1.0]]), np.zeros(1))])
        tree = build_partition_tree(net, Polytope.box([-1, -1], [1, 1]))
        assert tree.n_leaves == len(feasible_patterns(net, tree.domain)) == 4

    def test_leaf_count_matches_enumeration_oracle(self):
        rng = np.random.default_rng(21)
        for trial in range(4):
            net = PwaNetwork([(rng.normal(size=(4, 2)), rng.normal(size=4) * 0.4),
                              (rng.normal(size=(4, 4)), rng.normal(size=4) * 0.4),
                              (rng.normal(size=(1, 4)), np.zeros(1))])
            domain = Polytope.box([-1, -1], [1, 1])
            tree = build_partition_tree(net, domain)
            expected = feasible_patterns(net, domain)
            got = {lf.pattern.bits for lf in tree.leaves}
            assert got == expected

    def test_pendulum_leaf_count_matches_oracle(self, pend_net, pendulum, pend_tree):
        expected = feasible_patterns(pend_net, pendulum.domain())
        got = {lf.pattern.bits for lf in pend_tree.leaves}
        assert got == expected

    def test_unbounded_domain_rejected(self, abs_net):
        with pytest.raises(ValueError):
            build_partition_tree(abs_net, Polytope(1, [Halfspace(np.array([1.0]), 1.0)]))

    def test_pattern_uniqueness(self, pend_tree):
        pats = [lf.pattern.bits for lf in pend_tree.leaves]
        assert len(set(pats)) == len(pats)


class TestAnnotate:
    def test_abs_bounds(self, abs_net):
        tree = build_partition_tree(abs_net, Polytope.box([-1.0], [1.0]))
        annotate_lower_bounds(tree)
        assert all(lf.v_lower == pytest.approx(0.0, abs=1e-9) for lf in tree.leaves)
        assert tree.root.v_lower == pytest.approx(0.0, abs=1e-9)
        assert tree.root.v_upper == pytest.approx(1.0, abs=1e-9)

    def test_parent_is_child_min(self, pend_tree):
        def walk(node):
            if node.is_leaf:
                return
            assert node.v_lower == min(ch.v_lower for ch in node.children)
            assert node.v_upper == max(ch.v_upper for ch in node.children)
            for ch in node.children:
                walk(ch)
        walk(pend_tree.root)

    def test_leaf_bound_sound_against_samples(self, pend_net, pend_tree):
        rng = np.random.default_rng(22)
        for leaf in pend_tree.leaves:
            A, b = leaf.matrices()
            pts = rng.uniform(leaf.bbox_lower, leaf.bbox_upper, size=(1000, 2))
            inside = pts[np.all(pts @ A.T <= b + 1e-12, axis=1)]
            if len(inside) == 0:
                continue
            vals = forward_batch(pend_net, inside)
            assert vals.min() >= leaf.v_lower - 1e-9
            assert vals.max() <= leaf.v_upper + 1e-9

    def test_root_lower_bound_is_zero(self, pend_tree):
        # a valid Lyapunov net on a domain containing the origin has min 0
        assert pend_tree.root.v_lower == pytest.approx(0.0, abs=1e-9)


class TestLocate:
    def test_abs(self, abs_net):
        tree = build_partition_tree(abs_net, Polytope.box([-1.0], [1.0]))
        assert locate(tree, np.array([0.5])).piece.C[0] == 1.0

    def test_boundary_point_consistent(self, abs_net):
        tree = build_partition_tree(abs_net, Polytope.box([-1.0], [1.0]))
        leaf = locate(tree, np.array([0.0]))
        assert leaf.piece(np.array([0.0])) == pytest.approx(
            forward(abs_net, np.array([0.0])), abs=1e-12)

    def test_outside_domain(self, abs_net):
        tree = build_partition_tree(abs_net, Polytope.box([-1.0], [1.0]))
        with pytest.raises(NotInDomain):
            locate(tree, np.array([2.0]))

    def test_locate_agrees_with_forward(self, pend_net, pend_tree):
        rng = np.random.default_rng(23)
        X = rng.uniform(-1, 1, size=(10000, 2))
        worst = 0.0
        for x in X:
            leaf = locate(pend_tree, x)
            worst = max(worst, abs(leaf.piece(x) - forward(pend_net, x)))
        assert worst <= 1e-9


class TestCover:
    def test_cover_and_consistency(self, pend_net, pend_tree):
        rng = np.random.default_rng(24)
        X = rng.uniform(-1, 1, size=(100000, 2))
        vals = forward_batch(pend_net, X)
        hits = np.zeros(len(X), dtype=int)
        err = np.full(len(X), np.inf)
        for leaf in pend_tree.leaves:
            A, b = leaf.matrices()
            inside = np.all(X @ A.T <= b + 1e-9, axis=1)
            hits += inside
            piece_vals = X[inside] @ leaf.piece.C + leaf.piece.d
            err[inside] = np.minimum(err[inside], np.abs(piece_vals - vals[inside]))
        assert np.all(hits >= 1)
        assert float(err.max()) <= 1e-9

    def test_reference_invariance(self, pend_net, pendulum, pend_tree):
        # rebuilt tree is identical: construction never depends on a reference
        tree2 = build_partition_tree(pend_net, pendulum.domain())
        assert {lf.pattern.bits for lf in tree2.leaves} == {
            lf.pattern.bits for lf in pend_tree.leaves}


class TestSerialization:
    def test_round_trip(self, pend_tree, tmp_path):
        from capiset.io import load_tree, save_tree
        path = tmp_path / "tree.json"
        save_tree(pend_tree, path)
        back = load_tree(path)
        assert back.n_leaves == pend_tree.n_leaves
        assert back.annotated
        for a, b in zip(pend_tree.leaves, back.leaves):
            assert a.pattern.bits == b.pattern.bits
            assert np.array_equal(a.piece.C, b.piece.C)
            assert a.piece.d == b.piece.d
            assert a.v_lower == b.v_lower
            assert np.array_equal(a.bbox_lower, b.bbox_lower)
