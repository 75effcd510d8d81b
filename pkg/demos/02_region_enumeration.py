#!/usr/bin/env python3
"""Linear regions of small PWA networks, from first principles.

Starts with relu(x) + relu(-x) = |x| (two regions, pieces +-1) and works up
to the pendulum fixture. Each leaf of the partition tree is one activation
pattern; its affine coefficients reproduce the forward pass exactly.
"""

import numpy as np

from capiset import fixtures
from capiset.geometry import Polytope
from capiset.partition import annotate_lower_bounds, build_partition_tree, locate
from capiset.pwanet import PwaNetwork, forward
from capiset.systems import pendulum_system

# |x| as a one-hidden-layer network
abs_net = PwaNetwork([(np.array([[1.0], [-1.0]]), np.zeros(2)),
                      (np.array([[1.0, 1.0]]), np.zeros(1))])
tree = build_partition_tree(abs_net, Polytope.box([-1.0], [1.0]))
print("|x| network on [-1, 1]:")
for leaf in tree.leaves:
    print(f"  pattern {leaf.pattern.bits} -> piece C={leaf.piece.C}, d={leaf.piece.d}")

# the shipped pendulum Lyapunov function
system = pendulum_system()
net = fixtures.pendulum_lyapunov()
tree = annotate_lower_bounds(build_partition_tree(net, system.domain()))
print(f"\npendulum fixture (2-8-1): {tree.n_leaves} regions, "
      f"{tree.stats['node_count']} tree nodes")
print(f"value range over the domain: [{tree.root.v_lower:.4f}, {tree.root.v_upper:.4f}]")

rng = np.random.default_rng(0)
print("\nspot check: leaf piece vs forward pass")
for x in rng.uniform(-1, 1, size=(5, 2)):
    leaf = locate(tree, x)
    print(f"  x={np.round(x, 3)}: piece={leaf.piece(x):.6f} "
          f"forward={forward(net, x):.6f}")
