"""Partition tree of a PWA network's linear regions.

The domain is split layer by layer with each hidden neuron's hyperplane;
depth-k nodes fix the activation bits of the first k hidden layers. Leaves
are the network's linear regions and carry the exact affine coefficients.
Every node is annotated with the minimum (and maximum) of the network over
its region, the bound that drives subtree pruning during level queries.

The tree is built once in shifted coordinates (zero reference) and reused
for every reference.
"""

import time

import numpy as np

from .geometry import (
    CutResult,
    LpStatus,
    NumericalFailure,
    hyperplane_cuts,
    remove_redundant_halfspaces,
    solve_lp,
    split_by_hyperplanes,
    support_interval,
)
from .pwanet import (
    ActivationPattern,
    DegenerateNeuron,
    affine_piece,
    layer_hyperplanes,
)


class NotInDomain(ValueError):
    """Point lies outside the tree's domain."""


class PartitionNode:
    __slots__ = (
        "region", "layer", "ap_prefix", "children",
        "piece", "pattern", "v_lower", "v_upper",
        "bbox_lower", "bbox_upper", "leaf_index", "_mat",
    )

    def __init__(self, region, layer, ap_prefix):
        self.region = region
        self.layer = layer
        self.ap_prefix = ap_prefix
        self.children = []
        self.piece = None
        self.pattern = None
        self.v_lower = None
        self.v_upper = None
        self.bbox_lower = None
        self.bbox_upper = None
        self.leaf_index = None
        self._mat = None

    @property
    def is_leaf(self):
        return not self.children

    def matrices(self):
        if self._mat is None:
            self._mat = self.region.matrices()
        return self._mat

    def __repr__(self):
        kind = "leaf" if self.is_leaf else f"{len(self.children)} children"
        return f"PartitionNode(layer={self.layer}, {kind})"


class PartitionTree:
    """Root node plus a flat leaf index and build statistics."""

    def __init__(self, root, leaves, domain, first_layer_planes, stats):
        self.root = root
        self.leaves = leaves
        self.domain = domain
        # (neuron index, unit-normalized plane) for first-layer neurons whose
        # plane actually cuts the domain; this is the plane-pruning candidate set
        self.first_layer_planes = first_layer_planes
        self.stats = stats
        self.annotated = False

    @property
    def n_leaves(self):
        return len(self.leaves)


def _domain_bbox(domain):
    lows = np.empty(domain.dim)
    highs = np.empty(domain.dim)
    for i in range(domain.dim):
        e = np.zeros(domain.dim)
        e[i] = 1.0
        lo, hi = support_interval(domain, e)
        lows[i] = lo
        highs[i] = hi
    return lows, highs


def build_partition_tree(net, domain):
    """Enumerate the network's linear regions over a bounded domain.

    Walks the hidden layers in order; for each current region the layer's
    neuron hyperplanes are computed from the region's prefix bits and the
    region is split by them. Neurons with constant pre-activation contribute
    a fixed bit instead of a split. Leaves get their affine piece and full
    pattern.
    """
    if domain.dim != net.input_dim:
        raise ValueError("domain dimension does not match network input")
    t0 = time.perf_counter()
    lows, highs = _domain_bbox(domain)
    if not (np.all(np.isfinite(lows)) and np.all(np.isfinite(highs))):
        raise ValueError("domain must be bounded")

    root = PartitionNode(domain, 0, ())
    frontier = [root]
    node_count = 1
    for layer in range(net.n_layers - 1):
        width = net.hidden_widths[layer]
        nxt = []
        for node in frontier:
            planes = layer_hyperplanes(net, node.ap_prefix, layer)
            fixed = {}
            cutters = []
            for j, p in enumerate(planes):
                if isinstance(p, DegenerateNeuron):
                    fixed[j] = int(p.value > 0.0)
                else:
                    cutters.append((j, p))
            cells = split_by_hyperplanes(node.region, [p for _, p in cutters])
            for region, sides in cells:
                bits = [0] * width
                for (j, _), s in zip(cutters, sides):
                    bits[j] = int(s)
                for j, bval in fixed.items():
                    bits[j] = bval
                # splitting stacks up rows; a minimal description keeps every
                # downstream LP (further splits, bound and level queries) small
                region = remove_redundant_halfspaces(region)
                child = PartitionNode(region, layer + 1, node.ap_prefix + (tuple(bits),))
                node.children.append(child)
                nxt.append(child)
                node_count += 1
        frontier = nxt

    for idx, leaf in enumerate(frontier):
        leaf.pattern = ActivationPattern(leaf.ap_prefix)
        leaf.piece = affine_piece(net, leaf.pattern)
        leaf.leaf_index = idx

    cutting_planes = []
    for j, p in enumerate(layer_hyperplanes(net, (), 0)):
        if isinstance(p, DegenerateNeuron):
            continue
        if hyperplane_cuts(domain, p) == CutResult.CUTS:
            cutting_planes.append((j, p))

    stats = {
        "node_count": node_count,
        "leaf_count": len(frontier),
        "build_seconds": time.perf_counter() - t0,
        "domain_lower": lows,
        "domain_upper": highs,
    }
    return PartitionTree(root, frontier, domain, cutting_planes, stats)


def annotate_lower_bounds(tree, net=None, with_bbox=True):
    """Per-leaf min/max of the network via one LP pair, then child-min upward.

    Also records per-leaf coordinate bounding boxes (used by pair prefilters)
    unless with_bbox is False. Returns the same tree, annotated in place.
    """
    t0 = time.perf_counter()
    dim = tree.domain.dim
    for leaf in tree.leaves:
        try:
            lo = solve_lp(leaf.piece.C, leaf.region)
            hi = solve_lp(-leaf.piece.C, leaf.region)
            if lo.status != LpStatus.OPTIMAL or hi.status != LpStatus.OPTIMAL:
                raise NumericalFailure(f"bound LP returned {lo.status}/{hi.status}")
            leaf.v_lower = lo.value + leaf.piece.d
            leaf.v_upper = -hi.value + leaf.piece.d
            if with_bbox:
                bl = np.empty(dim)
                bu = np.empty(dim)
                for i in range(dim):
                    e = np.zeros(dim)
                    e[i] = 1.0
                    bl[i], bu[i] = support_interval(leaf.region, e)
                leaf.bbox_lower = bl
                leaf.bbox_upper = bu
        except NumericalFailure as err:
            raise NumericalFailure(f"leaf {leaf.leaf_index}: {err}") from err

    def up(node):
        if node.is_leaf:
            return
        for ch in node.children:
            up(ch)
        node.v_lower = min(ch.v_lower for ch in node.children)
        node.v_upper = max(ch.v_upper for ch in node.children)
        if node.children[0].bbox_lower is not None:
            node.bbox_lower = np.min([ch.bbox_lower for ch in node.children], axis=0)
            node.bbox_upper = np.max([ch.bbox_upper for ch in node.children], axis=0)

    up(tree.root)
    tree.annotated = True
    tree.stats["annotate_seconds"] = time.perf_counter() - t0
    return tree


def locate(tree, x, tol=1e-9):
    """Leaf whose region contains x; boundary points may return any neighbor."""
    x = np.asarray(x, dtype=float)
    if not tree.root.region.contains(x, tol):
        raise NotInDomain(f"point {x} outside the partition domain")
    node = tree.root
    while not node.is_leaf:
        best = None
        best_viol = np.inf
        hit = None
        for ch in node.children:
            A, b = ch.matrices()
            viol = float(np.max(A @ x - b)) if len(b) else 0.0
            if viol <= tol:
                hit = ch
                break
            if viol < best_viol:
                best_viol = viol
                best = ch
        node = hit if hit is not None else best
    return node
