#!/usr/bin/env python3
"""Regenerate the committed fixtures: Lyapunov nets, estimator, goldens.

Run from the repo root. Training is seeded but can take several minutes for
the cart-pole Lyapunov net; fixtures only change when this script is rerun
on purpose.

    python3 scripts/make_fixtures.py [pendulum|cartpole|estimator|goldens]...
"""

import json
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from capiset import capi, estimator as est, io as cio, partition as pt, systems as sy
from capiset.geometry import Polytope

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "capiset" / "fixtures"


def validate(net, system, seeds=(777, 12345, 31337, 424242, 550), n=1000000):
    reports = {}
    total = 0
    for seed in seeds:
        rep = sy.check_lyapunov(net, system.emap, system, n_samples=n, seed=seed)
        total += rep.positivity_violations + rep.decrease_violations
        reports[str(seed)] = {
            "samples": rep.samples,
            "positivity_violations": rep.positivity_violations,
            "decrease_violations": rep.decrease_violations,
            "worst_positivity": rep.worst_positivity,
            "worst_decrease": rep.worst_decrease,
            "origin_error": rep.origin_error,
        }
        print(f"  seed {seed}: pos={rep.positivity_violations} "
              f"dec={rep.decrease_violations}")
    if total:
        raise SystemExit("validation found violations; fixture not saved")
    return {"n_samples_per_seed": n, "seeds": list(seeds), "reports": reports}


def make_pendulum():
    print("training pendulum Lyapunov fixture (2-8-1)")
    system = sy.pendulum_system()
    cfg = sy.FixtureConfig(seed=0)
    net = sy.train_lyapunov_fixture(system, [8], cfg)
    net.metadata["validation"] = validate(net, system)
    net.metadata["positivity_margin"] = cfg.positivity_margin
    net.metadata["decrease_margin"] = cfg.decrease_margin
    cio.save_network(net, FIXTURES / "pendulum_lyap.json")
    print("  saved pendulum_lyap.json")


def make_cartpole():
    print("training cart-pole Lyapunov fixture (4-12-12-1, zero bias)")
    system = sy.cartpole_system()
    cfg = sy.FixtureConfig(seed=3, zero_bias=True, finetune_rounds=120,
                           pretrain_steps=3000, steps_per_round=400, batch=8192,
                           decrease_margin=0.002, scan_samples=1000000,
                           clean_scans=3)
    net = sy.train_lyapunov_fixture(system, [12, 12], cfg)
    net.metadata["validation"] = validate(net, system)
    net.metadata["positivity_margin"] = cfg.positivity_margin
    net.metadata["decrease_margin"] = cfg.decrease_margin
    cio.save_network(net, FIXTURES / "cartpole_lyap.json")
    print("  saved cartpole_lyap.json")


def cartpole_constraints():
    return (capi.box_constraints([-0.7, None, None, None], [0.4, None, None, None])
            + capi.box_constraints([None, -0.3, None, None], [None, 0.3, None, None])
            + capi.box_constraints([None, None, -0.1, None], [None, None, 0.1, None]))


def make_estimator():
    print("training cart-pole level estimator (CEGIS)")
    system = sy.cartpole_system()
    net = cio.load_network(FIXTURES / "cartpole_lyap.json", require_zero_origin=True)
    tree = pt.annotate_lower_bounds(pt.build_partition_tree(net, system.domain()))
    cons = cartpole_constraints()

    def oracle(r):
        return capi.max_admissible_level(tree, cons, np.atleast_1d(r),
                                         system.emap).gamma_star

    r_lo, r_hi = system.reference_bounds
    cfg = est.EstimatorConfig(seed=0)
    t0 = time.perf_counter()
    trained = est.train_estimator(oracle, cons, net, system.emap, system.domain(),
                                  Polytope.box([r_lo], [r_hi]), cfg, v_tree=tree)
    train_seconds = time.perf_counter() - t0
    assert trained.verified
    meta = {
        "verified": True,
        "iterations": trained.iterations,
        "dataset_size": trained.dataset_size,
        "train_seconds": train_seconds,
        "system": "cartpole",
        "constraints": "x in [-0.7, 0.4], |xdot| <= 0.3, |theta| <= 0.1",
        **trained.metadata,
    }
    cio.save_network(trained.network, FIXTURES / "cartpole_estimator.json",
                     metadata=meta)
    print(f"  saved cartpole_estimator.json (iterations={trained.iterations}, "
          f"train={train_seconds:.0f}s)")


def make_goldens():
    """Reference gamma values, produced by the independent grid oracle."""
    print("computing golden gamma values (grid oracle)")
    system = sy.pendulum_system()
    net = cio.load_network(FIXTURES / "pendulum_lyap.json", require_zero_origin=True)
    tree = pt.annotate_lower_bounds(pt.build_partition_tree(net, system.domain()))
    cons = capi.box_constraints([-0.5, None], [0.5, None])
    r = np.array([0.0])
    alg = capi.max_admissible_level(tree, cons, r, system.emap).gamma_star
    grid = capi.grid_oracle_gamma(net, system.emap, cons, r, 2001, system.domain())
    doc = {
        "pendulum_theta_max_0.5": {
            "gamma": alg,
            "grid_oracle": grid,
            "grid_resolution": 2001,
            "rel_gap": abs(alg - grid) / grid,
        },
    }
    with open(FIXTURES / "goldens.json", "w") as f:
        json.dump(doc, f, indent=1)
    print(f"  alg={alg:.9f} grid={grid:.9f}")


STEPS = {
    "pendulum": make_pendulum,
    "cartpole": make_cartpole,
    "estimator": make_estimator,
    "goldens": make_goldens,
}

if __name__ == "__main__":
    targets = sys.argv[1:] or list(STEPS)
    for name in targets:
        STEPS[name]()
