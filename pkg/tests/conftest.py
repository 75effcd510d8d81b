import numpy as np
import pytest

from capiset import fixtures
from capiset.geometry import Polytope
from capiset.partition import annotate_lower_bounds, build_partition_tree
from capiset.pwanet import PwaNetwork
from capiset.systems import cartpole_system, pendulum_system


@pytest.fixture(scope="session")
def abs_net():
    """relu(x) + relu(-x) = |x|; the canonical two-region 1-D network."""
    return PwaNetwork([(np.array([[1.0], [-1.0]]), np.zeros(2)),
                       (np.array([[1.0, 1.0]]), np.zeros(1))])


@pytest.fixture(scope="session")
def pendulum():
    return pendulum_system()


@pytest.fixture(scope="session")
def cartpole():
    return cartpole_system()


@pytest.fixture(scope="session")
def pend_net():
    return fixtures.pendulum_lyapunov()


@pytest.fixture(scope="session")
def cart_net():
    return fixtures.cartpole_lyapunov()


@pytest.fixture(scope="session")
def cart_estimator():
    return fixtures.cartpole_estimator()


@pytest.fixture(scope="session")
def pend_tree(pend_net, pendulum):
    return annotate_lower_bounds(build_partition_tree(pend_net, pendulum.domain()))


@pytest.fixture(scope="session")
def cart_tree(cart_net, cartpole):
    return annotate_lower_bounds(build_partition_tree(cart_net, cartpole.domain()))


@pytest.fixture(scope="session")
def unit_square():
    return Polytope.box([0.0, 0.0], [1.0, 1.0])
