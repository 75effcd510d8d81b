import numpy as np
import pytest

from capiset.capi import box_constraints
from capiset.erg import (
    ConstraintViolated,
    ErgConfig,
    LevelSource,
    dsm,
    erg_step,
    estimator_level_source,
    exact_level_source,
    initial_reference,
    navigation_field,
    simulate_erg,
)
def cartpole_constraints():
    return (box_constraints([-0.7, None, None, None], [0.4, None, None, None])
            + box_constraints([None, -0.3, None, None], [None, 0.3, None, None])
            + box_constraints([None, None, -0.1, None], [None, None, 0.1, None]))


@pytest.fixture(scope="module")
def cart_source(cart_estimator, cart_net, cartpole):
    return estimator_level_source(cart_estimator, cart_net, cartpole.emap)


@pytest.fixture(scope="module")
def cart_cfg(cartpole):
    return ErgConfig(eta=2.0, dt=cartpole.tau, horizon=3000,
                     r_bounds=cartpole.reference_bounds)


class TestDsm:
    def test_arithmetic(self):
        assert dsm(1.0, 0.4, 2.0) == pytest.approx(1.2)

    def test_boundary(self):
        assert dsm(0.7, 0.7, 2.0) == 0.0

    def test_negative_outside(self):
        assert dsm(0.5, 0.9, 2.0) < 0

    def test_eta_validation(self):
        with pytest.raises(ValueError):
            dsm(1.0, 0.0, 0.0)


class TestNavigationField:
    def test_forward(self):
        assert navigation_field(0.399, -0.4) == 1.0

    def test_still(self):
        assert navigation_field(0.2, 0.2) == 0.0

    def test_backward(self):
        assert navigation_field(-0.1, 0.2) == -1.0


class FixedSource(LevelSource):
    """Level source with hand-set gamma and value, for arithmetic tests."""

    def __init__(self, gamma_value, v_value):
        super().__init__(lambda v: gamma_value, None, None, kind="fixed")
        self._v = v_value

    def value(self, x, v):
        return self._v


class TestErgStep:
    def test_zero_margin_freezes(self):
        cfg = ErgConfig(eta=2.0, dt=0.05, horizon=10, r_bounds=(-1, 1))
        src = FixedSource(0.5, 0.5)
        assert erg_step(np.zeros(2), 0.1, 0.9, src, cfg) == pytest.approx(0.1)

    def test_euler_arithmetic(self):
        cfg = ErgConfig(eta=2.0, dt=0.05, horizon=10, r_bounds=(-1, 1))
        src = FixedSource(1.0, 0.4)  # delta = 1.2
        assert erg_step(np.zeros(2), 0.1, 0.9, src, cfg) == pytest.approx(0.16)

    def test_clip_at_target(self):
        cfg = ErgConfig(eta=2.0, dt=0.05, horizon=10, r_bounds=(-1, 1))
        src = FixedSource(10.0, 0.0)  # huge margin
        assert erg_step(np.zeros(2), 0.395, 0.4, src, cfg) == pytest.approx(0.4)

    def test_negative_margin_does_not_retreat(self):
        cfg = ErgConfig(eta=2.0, dt=0.05, horizon=10, r_bounds=(-1, 1))
        src = FixedSource(0.1, 0.9)  # delta < 0
        assert erg_step(np.zeros(2), 0.3, 0.9, src, cfg) == pytest.approx(0.3)


class TestInitialReference:
    def test_equilibrium_start(self, cart_source, cartpole):
        x0 = np.array([-0.4, 0.0, 0.0, 0.0])
        v0 = initial_reference(x0, cart_source, cartpole.reference_bounds)
        assert v0 == pytest.approx(-0.4, abs=2e-3)


class TestSimulate:
    def test_stationary_at_equilibrium(self, cartpole, cart_net, cart_source,
                                       cart_cfg):
        x0 = np.array([-0.2, 0.0, 0.0, 0.0])
        traj = simulate_erg(cartpole, cartpole.policy, cart_net, cartpole.emap,
                            cart_source, cartpole_constraints(), x0, -0.2, cart_cfg,
                            v0=-0.2)
        assert len(traj) <= 3
        assert traj.v[-1] == pytest.approx(-0.2, abs=1e-12)
        assert np.allclose(traj.x[-1], x0, atol=1e-12)

    def test_safety_and_margin_sign(self, cartpole, cart_net, cart_source,
                                    cart_cfg):
        x0 = np.array([-0.4, 0.0, 0.0, 0.0])
        traj = simulate_erg(cartpole, cartpole.policy, cart_net, cartpole.emap,
                            cart_source, cartpole_constraints(), x0, 0.399, cart_cfg)
        assert np.all(traj.constraint_values <= 1e-8)
        assert np.all(traj.delta >= 0)
        assert abs(traj.v[-1] - 0.399) <= 0.01
        assert np.all(np.diff(traj.v) >= -1e-12)
        # positive margin keeps the next state inside the current sublevel set
        for k in range(0, len(traj) - 1, 25):
            if traj.delta[k] >= 0:
                v_next_state = cart_source.value(traj.x[k + 1], traj.v[k])
                assert v_next_state <= traj.gamma[k] + 1e-9

    def test_no_governor_baseline_violates(self, cartpole, cart_net, cart_source,
                                           cart_cfg):
        x0 = np.array([-0.4, 0.0, 0.0, 0.0])
        with pytest.raises(ConstraintViolated) as exc:
            simulate_erg(cartpole, cartpole.policy, cart_net, cartpole.emap,
                         cart_source, cartpole_constraints(), x0, 0.399, cart_cfg,
                         v0=0.399)
        assert exc.value.trajectory is not None
        assert exc.value.step < 200

    def test_estimator_no_less_conservative_than_exact(
            self, cartpole, cart_net, cart_estimator, cart_tree, cart_cfg):
        cons = cartpole_constraints()
        est_src = estimator_level_source(cart_estimator, cart_net, cartpole.emap)
        exact_src = exact_level_source(cart_tree, cons, cartpole.emap, cart_net)
        cfg = ErgConfig(eta=2.0, dt=cartpole.tau, horizon=60,
                        r_bounds=cartpole.reference_bounds)
        x0 = np.array([-0.4, 0.0, 0.0, 0.0])
        t_est = simulate_erg(cartpole, cartpole.policy, cart_net, cartpole.emap,
                             est_src, cons, x0, 0.399, cfg, v0=-0.4)
        t_exact = simulate_erg(cartpole, cartpole.policy, cart_net, cartpole.emap,
                               exact_src, cons, x0, 0.399, cfg, v0=-0.4)
        n = min(len(t_est), len(t_exact))
        assert np.all(t_est.v[:n] <= t_exact.v[:n] + 1e-9)

    def test_record_count_and_uniform_time(self, cartpole, cart_net, cart_source):
        cfg = ErgConfig(eta=2.0, dt=cartpole.tau, horizon=40,
                        r_bounds=cartpole.reference_bounds, v_tol=0.0)
        x0 = np.array([-0.4, 0.0, 0.0, 0.0])
        traj = simulate_erg(cartpole, cartpole.policy, cart_net, cartpole.emap,
                            cart_source, cartpole_constraints(), x0, 0.399, cfg)
        assert len(traj) == 41
        assert np.allclose(np.diff(traj.t), cartpole.tau)
