import numpy as np
import pytest

from capiset.pwanet import (
    ActivationPattern,
    DegenerateNeuron,
    PwaNetwork,
    ReferenceMap,
    activation_pattern,
    affine_piece,
    assert_zero_at_origin,
    forward,
    forward_batch,
    neuron_hyperplane,
    normalize_origin,
    rdlf_value,
)


def straight_line_forward(layers, x):
    """Independent re-implementation of the layer maps with plain loops."""
    z = list(x)
    for li, (W, b) in enumerate(layers):
        out = []
        for row, bias in zip(W, b):
            acc = bias
            for wij, zj in zip(row, z):
                acc += wij * zj
            if li < len(layers) - 1:
                acc = acc if acc > 0.0 else 0.0
            out.append(acc)
        z = out
    return z[0]


def random_net(rng, widths):
    layers = []
    dims = list(widths)
    for a, b in zip(dims, dims[1:]):
        layers.append((rng.normal(size=(b, a)), rng.normal(size=b) * 0.5))
    return PwaNetwork(layers)


class TestForward:
    def test_abs_value(self, abs_net):
        assert forward(abs_net, np.array([-0.3])) == pytest.approx(0.3, abs=1e-12)

    def test_zero_bias_at_origin(self):
        rng = np.random.default_rng(0)
        net = PwaNetwork([(rng.normal(size=(4, 2)), np.zeros(4)),
                          (rng.normal(size=(1, 4)), np.zeros(1))])
        assert forward(net, np.zeros(2)) == 0.0

    def test_matches_straight_line_reimplementation(self):
        rng = np.random.default_rng(1)
        net = random_net(rng, [2, 8, 1])
        for _ in range(100):
            x = rng.uniform(-2, 2, size=2)
            assert forward(net, x) == pytest.approx(
                straight_line_forward(net.layers, x), abs=1e-12)

    def test_batch_matches_single(self):
        rng = np.random.default_rng(2)
        net = random_net(rng, [3, 5, 4, 1])
        X = rng.uniform(-1, 1, size=(50, 3))
        batch = forward_batch(net, X)
        for x, v in zip(X, batch):
            assert forward(net, x) == pytest.approx(v, abs=1e-12)

    def test_dimension_mismatch(self, abs_net):
        with pytest.raises(ValueError):
            forward(abs_net, np.array([1.0, 2.0]))


class TestActivationPattern:
    def test_abs_positive_side(self, abs_net):
        assert activation_pattern(abs_net, np.array([0.5])).bits == ((1, 0),)

    def test_boundary_maps_to_zero_bit(self, abs_net):
        assert activation_pattern(abs_net, np.array([0.0])).bits == ((0, 0),)

    def test_bits_match_recomputed_preactivations(self):
        rng = np.random.default_rng(3)
        net = random_net(rng, [2, 4, 4, 1])
        for _ in range(50):
            x = rng.uniform(-1, 1, size=2)
            ap = activation_pattern(net, x)
            z = x
            for l, (W, b) in enumerate(net.layers[:-1]):
                pre = W @ z + b
                assert ap.bits[l] == tuple(int(p > 0) for p in pre)
                z = np.maximum(pre, 0.0)

    def test_hashable_identity(self):
        a = ActivationPattern(((1, 0), (0, 1)))
        b = ActivationPattern(((1, 0), (0, 1)))
        assert a == b and hash(a) == hash(b)


class TestAffinePiece:
    def test_abs_pieces(self, abs_net):
        pos = affine_piece(abs_net, ActivationPattern(((1, 0),)))
        assert pos.C == pytest.approx([1.0]) and pos.d == 0.0
        dead = affine_piece(abs_net, ActivationPattern(((0, 0),)))
        assert dead.C == pytest.approx([0.0]) and dead.d == 0.0

    def test_pattern_piece_consistency(self):
        rng = np.random.default_rng(4)
        net = random_net(rng, [2, 8, 1])
        X = rng.uniform(-2, 2, size=(10000, 2))
        worst = 0.0
        for x in X:
            piece = affine_piece(net, activation_pattern(net, x))
            worst = max(worst, abs(piece(x) - forward(net, x)))
        assert worst <= 1e-9

    def test_same_pattern_same_piece(self):
        rng = np.random.default_rng(5)
        net = random_net(rng, [2, 6, 1])
        x = rng.uniform(-1, 1, size=2)
        ap = activation_pattern(net, x)
        p1 = affine_piece(net, ap)
        p2 = affine_piece(net, ap)
        assert np.array_equal(p1.C, p2.C) and p1.d == p2.d

    def test_nearby_same_pattern_points_agree(self, pend_net):
        rng = np.random.default_rng(6)
        x0 = rng.uniform(-0.5, 0.5, size=2)
        ap = activation_pattern(pend_net, x0)
        piece = affine_piece(pend_net, ap)
        hits = 0
        for _ in range(200):
            x = x0 + rng.normal(0, 1e-4, size=2)
            if activation_pattern(pend_net, x) == ap:
                hits += 1
                assert abs(piece(x) - forward(pend_net, x)) <= 1e-9
        assert hits >= 10


class TestNeuronHyperplane:
    def test_abs_first_neuron(self, abs_net):
        h = neuron_hyperplane(abs_net, (), 0, 0)
        assert h.normal == pytest.approx([1.0])
        assert h.offset == pytest.approx(0.0)

    def test_first_layer_ignores_prefix(self):
        rng = np.random.default_rng(7)
        net = random_net(rng, [2, 3, 3, 1])
        h = neuron_hyperplane(net, (), 0, 1)
        W, b = net.layers[0]
        scale = np.linalg.norm(W[1])
        assert h.normal == pytest.approx(W[1] / scale, abs=1e-12)
        assert h.offset == pytest.approx(-b[1] / scale, abs=1e-12)

    def test_second_layer_matches_matrix_product_oracle(self):
        # oracle: homogeneous-form product of layer matrices, by hand
        rng = np.random.default_rng(8)
        net = random_net(rng, [2, 2, 2, 1])
        prefix = (1, 1)
        h = neuron_hyperplane(net, (prefix,), 1, 0)
        W1, b1 = net.layers[0]
        W2, b2 = net.layers[1]
        lam = np.diag([1.0, 1.0])
        row_w = W2[0] @ lam @ W1
        row_b = W2[0] @ lam @ b1 + b2[0]
        scale = np.linalg.norm(row_w)
        assert h.normal == pytest.approx(row_w / scale, abs=1e-12)
        assert h.offset == pytest.approx(-row_b / scale, abs=1e-12)

    def test_degenerate_neuron_raises(self):
        # second-layer neuron fed only by a clamped-off prefix is constant
        net = PwaNetwork([(np.array([[1.0]]), np.zeros(1)),
                          (np.array([[1.0]]), np.array([0.5])),
                          (np.array([[1.0]]), np.zeros(1))])
        with pytest.raises(DegenerateNeuron) as exc:
            neuron_hyperplane(net, ((0,),), 1, 0)
        assert exc.value.value == pytest.approx(0.5)


class TestReferenceShift:
    def test_zero_reference_is_plain_forward(self, pend_net):
        emap = ReferenceMap(np.zeros((2, 1)))
        x = np.array([0.3, -0.2])
        assert rdlf_value(pend_net, emap, x, np.array([0.0])) == forward(pend_net, x)

    def test_equilibrium_value_is_zero(self, cart_net, cartpole):
        r = np.array([0.2])
        x_bar = cartpole.emap.equilibrium(r)
        assert rdlf_value(cart_net, cartpole.emap, x_bar, r) == pytest.approx(0.0, abs=1e-12)

    def test_shift_invariance(self, cart_net, cartpole):
        rng = np.random.default_rng(9)
        emap = cartpole.emap
        for _ in range(100):
            x = rng.uniform(-0.5, 0.5, size=4)
            r = rng.uniform(-0.3, 0.3, size=1)
            delta = rng.uniform(-0.2, 0.2, size=1)
            a = rdlf_value(cart_net, emap, x, r)
            b = rdlf_value(cart_net, emap, x + emap.equilibrium(delta), r + delta)
            assert a == pytest.approx(b, abs=1e-9)

    def test_decrease_transfers_to_shifted_states(self, cart_net, cartpole):
        # Lyapunov decrease at zero reference implies decrease at any
        # reference for the shifted state, by reference symmetry
        rng = np.random.default_rng(10)
        emap = cartpole.emap
        Y = rng.uniform(-0.4, 0.4, size=(200, 4))
        v = forward_batch(cart_net, Y)
        vn = forward_batch(cart_net, cartpole.closed_loop_shifted(Y))
        dec = vn - v <= 0
        r = np.array([0.15])
        shift = emap.equilibrium(r)
        for y, ok in zip(Y[dec][:50], np.ones(50, bool)):
            x = y + shift
            a = rdlf_value(cart_net, emap, x, r)
            b = rdlf_value(cart_net, emap, cartpole.closed_loop(x, r), r)
            assert b - a <= 1e-9


class TestOriginNormalization:
    def test_assert_zero_at_origin(self, pend_net):
        assert_zero_at_origin(pend_net)

    def test_normalize_origin(self):
        rng = np.random.default_rng(11)
        net = random_net(rng, [2, 4, 1])
        fixed = normalize_origin(net)
        assert abs(forward(fixed, np.zeros(2))) <= 1e-12

    def test_violating_net_rejected(self):
        rng = np.random.default_rng(12)
        net = random_net(rng, [2, 4, 1])
        if abs(forward(net, np.zeros(2))) > 1e-8:
            with pytest.raises(ValueError):
                assert_zero_at_origin(net)
