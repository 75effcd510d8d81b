"""Committed benchmark fixtures: validated Lyapunov nets and the estimator.

Weights ship with the package so nothing retrains at test time; each file
carries its validation report in the metadata block. Regenerate with
scripts/make_fixtures.py.
"""

from importlib import resources

from ..io import network_from_dict
from ..estimator import EstimatorNet
import json

_PKG = "capiset.fixtures"


def _load(name, require_zero_origin=False):
    with resources.files(_PKG).joinpath(name).open() as f:
        doc = json.load(f)
    return network_from_dict(doc, require_zero_origin=require_zero_origin)


def pendulum_lyapunov():
    """Validated 2-8-1 Lyapunov net for the pendulum loop on [-1, 1]^2."""
    return _load("pendulum_lyap.json", require_zero_origin=True)


def cartpole_lyapunov():
    """Validated 4-12-12-1 zero-bias Lyapunov net for the cart-pole loop."""
    return _load("cartpole_lyap.json", require_zero_origin=True)


def cartpole_estimator():
    """Verified admissible-level estimator for the cart-pole benchmark."""
    net = _load("cartpole_estimator.json")
    meta = net.metadata
    est = EstimatorNet(net, verified=bool(meta.get("verified", False)),
                       iterations=int(meta.get("iterations", 0)),
                       dataset_size=int(meta.get("dataset_size", 0)),
                       metadata=dict(meta))
    return est


def lyapunov_for(system_name):
    if system_name == "pendulum":
        return pendulum_lyapunov()
    if system_name == "cartpole":
        return cartpole_lyapunov()
    raise ValueError(f"no fixture for system {system_name!r}")
