import numpy as np
import pytest

from capiset import backprop
from capiset.capi import box_constraints, max_admissible_level
from capiset.estimator import (
    EstimatorConfig,
    EstimatorNet,
    Unverified,
    clamp_network,
    mse_loss_and_grad,
    pretrain_dataset,
    train_estimator,
    verify_estimator,
)
from capiset.geometry import Polytope
from capiset.pwanet import forward_batch


@pytest.fixture(scope="module")
def pend_setup(pend_net, pend_tree, pendulum):
    cons = box_constraints([-0.5, None], [0.5, None])

    def oracle(r):
        return max_admissible_level(pend_tree, cons, np.atleast_1d(r),
                                    pendulum.emap).gamma_star

    return pend_net, pend_tree, pendulum, cons, oracle


def constant_estimator(value):
    raw = backprop.to_network([[np.zeros((1, 1)), np.array([float(value)])]])
    return EstimatorNet(clamp_network(raw))


class TestPretrainDataset:
    def test_degenerate_point_domain(self, pend_setup):
        _, _, _, _, oracle = pend_setup
        ds = pretrain_dataset(oracle, Polytope.box([0.0], [0.0]), 1, seed=0)
        assert len(ds) == 1
        assert ds.references[0] == pytest.approx([0.0])
        assert ds.levels[0] == pytest.approx(oracle(np.array([0.0])))

    def test_deterministic_per_seed(self, pend_setup):
        _, _, _, _, oracle = pend_setup
        dom = Polytope.box([-0.1], [0.1])
        a = pretrain_dataset(oracle, dom, 25, seed=7)
        b = pretrain_dataset(oracle, dom, 25, seed=7)
        assert np.array_equal(a.references, b.references)
        assert np.array_equal(a.levels, b.levels)

    def test_levels_nonnegative_and_finite_for_cartpole_domain(
            self, cart_tree, cartpole):
        cons = (box_constraints([-0.7, None, None, None], [0.4, None, None, None])
                + box_constraints([None, None, -0.1, None], [None, None, 0.1, None]))

        def oracle(r):
            return max_admissible_level(cart_tree, cons, np.atleast_1d(r),
                                        cartpole.emap).gamma_star

        lo, hi = cartpole.reference_bounds
        ds = pretrain_dataset(oracle, Polytope.box([lo], [hi]), 20, seed=0)
        assert np.all(ds.levels >= 0) and np.all(np.isfinite(ds.levels))


class TestVerify:
    def test_zero_level_verified(self, pend_setup):
        net, tree, system, cons, _ = pend_setup
        res = verify_estimator(net, system.emap, constant_estimator(0.0), cons,
                               system.domain(), Polytope.box([-0.1], [0.1]),
                               v_tree=tree)
        assert res.verified
        assert res.opt_value == pytest.approx(-0.5, abs=1e-8)

    def test_oversized_level_rejected_with_witness(self, pend_setup):
        net, tree, system, cons, _ = pend_setup
        res = verify_estimator(net, system.emap, constant_estimator(100.0), cons,
                               system.domain(), Polytope.box([-0.1], [0.1]),
                               v_tree=tree)
        assert not res.verified
        assert res.opt_value > 0
        # the witness really lies in the sublevel set it incriminates
        x, r = res.witness_state, res.witness_reference
        v = forward_batch(net, (x - system.emap.equilibrium(r))[None, :])[0]
        assert v <= 100.0 + 1e-8

    def test_matches_grid_maximum(self, pend_setup):
        # brute-force oracle over (x, r) for a constant estimator level
        net, tree, system, cons, oracle = pend_setup
        level = 0.25
        res = verify_estimator(net, system.emap, constant_estimator(level), cons,
                               system.domain(), Polytope.box([0.0], [0.0]),
                               v_tree=tree)
        xs = np.linspace(-1, 1, 801)
        grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
        V = forward_batch(net, grid)
        inside = grid[V <= level]
        cmax = max(c.value_batch(inside).max() for c in cons)
        assert res.opt_value == pytest.approx(cmax, abs=5e-3)
        assert res.verified == (cmax <= 0)


class TestTraining:
    def test_constant_gamma_converges_fast(self, pend_setup):
        net, tree, system, cons, oracle = pend_setup
        cfg = EstimatorConfig(n_pretrain=30, max_iters=5, pretrain_steps=1500, seed=0)
        trained = train_estimator(oracle, cons, net, system.emap, system.domain(),
                                  Polytope.box([-0.1], [0.1]), cfg, v_tree=tree)
        assert trained.verified
        assert trained.iterations <= 5
        q = oracle(np.array([0.0]))
        for v in np.linspace(-0.1, 0.1, 21):
            e = trained.level(np.array([v]))
            assert e <= q + 1e-6
            assert e >= 0.8 * q  # near-constant fit, not collapsed to zero

    def test_adversarial_init_recovers(self, pend_setup):
        net, tree, system, cons, oracle = pend_setup
        big = [[np.zeros((4, 1)), np.full(4, 5.0)],
               [np.ones((1, 4)), np.array([5.0])]]
        cfg = EstimatorConfig(n_pretrain=20, max_iters=10, pretrain_steps=0,
                              steps_per_iter=3000, seed=0)
        trained = train_estimator(oracle, cons, net, system.emap, system.domain(),
                                  Polytope.box([-0.1], [0.1]), cfg, v_tree=tree,
                                  initial_params=big)
        assert trained.verified
        assert trained.iterations > 1  # the first verification must have failed

    def test_unverified_carries_witness(self, pend_setup):
        net, tree, system, cons, oracle = pend_setup
        big = [[np.zeros((4, 1)), np.full(4, 5.0)],
               [np.ones((1, 4)), np.array([5.0])]]
        cfg = EstimatorConfig(n_pretrain=5, max_iters=1, pretrain_steps=0,
                              steps_per_iter=1, seed=0)
        with pytest.raises(Unverified) as exc:
            train_estimator(oracle, cons, net, system.emap, system.domain(),
                            Polytope.box([-0.1], [0.1]), cfg, v_tree=tree,
                            initial_params=big)
        assert exc.value.witness is not None

    def test_counterexamples_were_violations(self, pend_setup):
        net, tree, system, cons, oracle = pend_setup
        big = [[np.zeros((4, 1)), np.full(4, 5.0)],
               [np.ones((1, 4)), np.array([5.0])]]
        cfg = EstimatorConfig(n_pretrain=10, max_iters=10, pretrain_steps=0,
                              steps_per_iter=3000, seed=0)
        trained = train_estimator(oracle, cons, net, system.emap, system.domain(),
                                  Polytope.box([-0.1], [0.1]), cfg, v_tree=tree,
                                  initial_params=big)
        assert trained.verified
        assert trained.metadata["counterexample_opts"]
        assert all(v > 0 for v in trained.metadata["counterexample_opts"])


class TestShippedEstimator:
    def test_verified_flag_and_safety_sampling(self, cart_net, cart_estimator,
                                               cartpole):
        assert cart_estimator.verified
        rng = np.random.default_rng(0)
        lo, hi = cartpole.reference_bounds
        cons = (box_constraints([-0.7, None, None, None], [0.4, None, None, None])
                + box_constraints([None, -0.3, None, None], [None, 0.3, None, None])
                + box_constraints([None, None, -0.1, None], [None, None, 0.1, None]))
        for _ in range(20):
            r = rng.uniform(lo, hi, size=1)
            levels = cart_estimator.level(r)
            Y = rng.uniform(np.array(cartpole.domain_bounds[0]),
                            np.array(cartpole.domain_bounds[1]), size=(1000, 4))
            V = forward_batch(cart_net, Y)
            X = Y[V <= levels] + cartpole.emap.equilibrium(r)
            for c in cons:
                assert np.all(c.value_batch(X) <= 1e-8)


class TestGradients:
    def test_backprop_matches_central_differences(self):
        rng = np.random.default_rng(0)
        params = backprop.init_params([1, 8, 4, 1], seed=0)
        R = rng.uniform(-1, 1, size=(64, 1))
        t = rng.uniform(0, 1, size=64)
        _, grads = mse_loss_and_grad(params, R, t)
        flat_g = backprop.flatten(grads)
        theta = backprop.flatten(params)
        h = 1e-5
        for _ in range(20):
            u = rng.normal(size=theta.shape)
            u /= np.linalg.norm(u)
            lp, _ = mse_loss_and_grad(backprop.unflatten(theta + h * u, params), R, t)
            lm, _ = mse_loss_and_grad(backprop.unflatten(theta - h * u, params), R, t)
            fd = (lp - lm) / (2 * h)
            an = float(flat_g @ u)
            assert an == pytest.approx(fd, rel=1e-4, abs=1e-10)
