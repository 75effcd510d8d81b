"""File formats: network weights, constraint sets, partition trees, headers.

All schemas are versioned JSON ("schema_version": 1). Floats rely on JSON
round-trip repr, which preserves full double precision. Every artifact the
CLI writes embeds a header with the tool version, the seed, and sha256
hashes of its input files.
"""

import hashlib
import json

import numpy as np

from .capi import PwaConstraint, box_constraints
from .geometry import Halfspace, Hyperplane, Polytope
from .partition import PartitionNode, PartitionTree
from .pwanet import Activation, AffinePiece, PwaNetwork, assert_zero_at_origin

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """Input file does not match its schema."""


def _require(cond, msg):
    if not cond:
        raise SchemaError(msg)


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def artifact_header(seed=None, inputs=None):
    from . import __version__
    header = {"tool": "capiset", "version": __version__,
              "schema_version": SCHEMA_VERSION}
    if seed is not None:
        header["seed"] = seed
    if inputs:
        header["input_hashes"] = {name: file_sha256(p) for name, p in inputs.items()}
    return header


# -- network weights ---------------------------------------------------------

def network_to_dict(net, metadata=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "input_dim": net.input_dim,
        "activation": net.activation.name,
        "layers": [{"weights": W.tolist(), "bias": b.tolist()} for W, b in net.layers],
        "metadata": {**net.metadata, **(metadata or {})},
    }
    if net.activation.slope:
        doc["slope"] = net.activation.slope
    return doc


def network_from_dict(doc, require_zero_origin=False, zero_origin_tol=1e-8):
    _require(isinstance(doc, dict), "weight document must be an object")
    _require(doc.get("schema_version") == SCHEMA_VERSION,
             f"unsupported weight schema_version {doc.get('schema_version')}")
    _require("layers" in doc and doc["layers"], "weight document needs layers")
    act_name = doc.get("activation", "relu")
    if act_name == "relu":
        act = Activation(0.0)
    elif act_name == "leaky_relu":
        act = Activation(float(doc.get("slope", 0.01)))
    else:
        raise SchemaError(f"unknown activation {act_name!r}")
    layers = []
    for i, layer in enumerate(doc["layers"]):
        _require("weights" in layer and "bias" in layer,
                 f"layer {i} needs weights and bias")
        layers.append((np.array(layer["weights"], dtype=float),
                       np.array(layer["bias"], dtype=float)))
    net = PwaNetwork(layers, act, doc.get("metadata", {}))
    _require(net.input_dim == doc.get("input_dim", net.input_dim),
             "declared input_dim does not match layer shapes")
    if require_zero_origin:
        try:
            assert_zero_at_origin(net, tol=zero_origin_tol)
        except ValueError as err:
            raise SchemaError(str(err)) from err
    return net


def save_network(net, path, metadata=None):
    with open(path, "w") as f:
        json.dump(network_to_dict(net, metadata), f)


def load_network(path, require_zero_origin=False):
    with open(path) as f:
        doc = json.load(f)
    return network_from_dict(doc, require_zero_origin=require_zero_origin)


# -- constraints --------------------------------------------------------------

def _halfspace_from_dict(d, dim):
    _require("normal" in d and "offset" in d, "halfspace needs normal and offset")
    normal = np.array(d["normal"], dtype=float)
    _require(normal.shape == (dim,), "halfspace normal has wrong dimension")
    return Halfspace(normal, float(d["offset"]))


def constraints_from_dict(doc, dim):
    """Constraint list (and optional convex polytope) from the schema.

    The three forms can be mixed: per-coordinate boxes, general PWA
    constraints given piece by piece, and one convex admissible polytope
    (returned separately so callers can use the single-LP facet path).
    """
    _require(isinstance(doc, dict), "constraint document must be an object")
    _require(doc.get("schema_version", SCHEMA_VERSION) == SCHEMA_VERSION,
             "unsupported constraint schema_version")
    out = []
    for entry in doc.get("boxes", ()):
        _require("coord" in entry, "box entry needs coord")
        i = int(entry["coord"])
        _require(0 <= i < dim, f"box coord {i} out of range")
        lower = [None] * dim
        upper = [None] * dim
        has = False
        if "upper" in entry:
            upper[i] = float(entry["upper"])
            has = True
        if "lower" in entry:
            lower[i] = float(entry["lower"])
            has = True
        _require(has, "box entry needs lower or upper")
        out.extend(box_constraints(lower, upper))
    for k, entry in enumerate(doc.get("pwa", ())):
        _require("pieces" in entry and entry["pieces"], f"pwa entry {k} needs pieces")
        pieces = []
        for piece in entry["pieces"]:
            _require("C" in piece and "d" in piece, "pwa piece needs C and d")
            hs = [_halfspace_from_dict(h, dim) for h in piece.get("halfspaces", ())]
            region = Polytope(dim, hs)
            pieces.append((region, AffinePiece(np.array(piece["C"], dtype=float),
                                               float(piece["d"]))))
        out.append(PwaConstraint(tuple(pieces), name=entry.get("name", f"pwa_{k}")))
    convex = None
    if "convex_polytope" in doc:
        cp = doc["convex_polytope"]
        _require("A" in cp and "b" in cp, "convex_polytope needs A and b")
        A = np.array(cp["A"], dtype=float)
        b = np.array(cp["b"], dtype=float)
        _require(A.ndim == 2 and A.shape[1] == dim and A.shape[0] == b.shape[0],
                 "convex_polytope A/b shapes inconsistent")
        convex = (A, b)
    _require(out or convex is not None, "constraint document is empty")
    return out, convex


def load_constraints(path, dim):
    with open(path) as f:
        doc = json.load(f)
    return constraints_from_dict(doc, dim)


def constraints_to_dict(constraints):
    doc = {"schema_version": SCHEMA_VERSION, "pwa": []}
    for con in constraints:
        pieces = []
        for region, piece in con.pieces:
            pieces.append({
                "halfspaces": [{"normal": h.normal.tolist(), "offset": h.offset}
                               for h in region.halfspaces],
                "C": piece.C.tolist(),
                "d": piece.d,
            })
        doc["pwa"].append({"name": con.name, "pieces": pieces})
    return doc


# -- partition trees ----------------------------------------------------------

def _poly_to_dict(poly):
    return {
        "halfspaces": [{"normal": h.normal.tolist(), "offset": h.offset}
                       for h in poly.halfspaces],
        "equalities": [{"normal": h.normal.tolist(), "offset": h.offset}
                       for h in poly.equalities],
    }


def _poly_from_dict(d, dim):
    hs = [_halfspace_from_dict(h, dim) for h in d.get("halfspaces", ())]
    eqs = [Hyperplane(np.array(h["normal"], dtype=float), float(h["offset"]))
           for h in d.get("equalities", ())]
    return Polytope(dim, hs, eqs)


def tree_to_dict(tree):
    """Flat node-array serialization so level queries can skip rebuilds."""
    nodes = []
    index = {}

    def visit(node):
        idx = len(nodes)
        index[id(node)] = idx
        entry = {
            "layer": node.layer,
            "region": _poly_to_dict(node.region),
            "ap_prefix": [list(b) for b in node.ap_prefix],
            "children": [],
        }
        if node.v_lower is not None:
            entry["v_lower"] = node.v_lower
            entry["v_upper"] = node.v_upper
        if node.bbox_lower is not None:
            entry["bbox_lower"] = node.bbox_lower.tolist()
            entry["bbox_upper"] = node.bbox_upper.tolist()
        if node.is_leaf:
            entry["piece"] = {"C": node.piece.C.tolist(), "d": node.piece.d}
            entry["leaf_index"] = node.leaf_index
        nodes.append(entry)
        for ch in node.children:
            entry["children"].append(visit(ch))
        return idx

    visit(tree.root)
    return {
        "schema_version": SCHEMA_VERSION,
        "dim": tree.domain.dim,
        "domain": _poly_to_dict(tree.domain),
        "first_layer_planes": [
            {"neuron": j, "normal": p.normal.tolist(), "offset": p.offset}
            for j, p in tree.first_layer_planes],
        "stats": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in tree.stats.items()},
        "annotated": tree.annotated,
        "nodes": nodes,
    }


def tree_from_dict(doc):
    _require(doc.get("schema_version") == SCHEMA_VERSION,
             "unsupported tree schema_version")
    dim = int(doc["dim"])
    domain = _poly_from_dict(doc["domain"], dim)
    raw = doc["nodes"]
    built = [None] * len(raw)

    def build(idx):
        entry = raw[idx]
        node = PartitionNode(
            _poly_from_dict(entry["region"], dim),
            int(entry["layer"]),
            tuple(tuple(int(b) for b in layer) for layer in entry["ap_prefix"]),
        )
        if "v_lower" in entry:
            node.v_lower = float(entry["v_lower"])
            node.v_upper = float(entry["v_upper"])
        if "bbox_lower" in entry:
            node.bbox_lower = np.array(entry["bbox_lower"], dtype=float)
            node.bbox_upper = np.array(entry["bbox_upper"], dtype=float)
        if "piece" in entry:
            node.piece = AffinePiece(np.array(entry["piece"]["C"], dtype=float),
                                     float(entry["piece"]["d"]))
            node.leaf_index = entry.get("leaf_index")
            from .pwanet import ActivationPattern
            node.pattern = ActivationPattern(node.ap_prefix)
        built[idx] = node
        for ch in entry["children"]:
            node.children.append(build(ch))
        return node

    root = build(0)
    leaves = [n for n in built if n is not None and n.is_leaf]
    leaves.sort(key=lambda n: n.leaf_index if n.leaf_index is not None else 0)
    planes = [(int(p["neuron"]),
               Hyperplane(np.array(p["normal"], dtype=float), float(p["offset"])))
              for p in doc.get("first_layer_planes", ())]
    tree = PartitionTree(root, leaves, domain, planes, dict(doc.get("stats", {})))
    tree.annotated = bool(doc.get("annotated", False))
    return tree


def save_tree(tree, path, header=None):
    doc = tree_to_dict(tree)
    if header:
        doc["header"] = header
    with open(path, "w") as f:
        json.dump(doc, f)


def load_tree(path):
    with open(path) as f:
        return tree_from_dict(json.load(f))
