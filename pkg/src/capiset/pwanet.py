"""Piecewise-affine neural network algebra.

A network with a single-breakpoint activation (ReLU / leaky ReLU) is affine
on each activation-pattern region. This module evaluates the network, reads
off patterns, extracts the exact affine map of a pattern, and produces the
neuron hyperplanes that bound the regions. It also applies the
reference-symmetry shift V(x, r) = V'(x - E r).
"""

from dataclasses import dataclass

import numpy as np

from .geometry import Hyperplane

# below this infinity-norm a neuron's gradient row is considered constant
DEGENERATE_TOL = 1e-12


class DegenerateNeuron(ValueError):
    """Raised when a neuron's pre-activation is constant on a region.

    Carries the constant value so callers can fix the activation bit.
    """

    def __init__(self, layer, neuron, value):
        super().__init__(
            f"neuron {neuron} of layer {layer} has constant pre-activation {value:.3e}")
        self.layer = layer
        self.neuron = neuron
        self.value = float(value)


@dataclass(frozen=True)
class Activation:
    """Single-breakpoint activation: identity above zero, `slope` below."""

    slope: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.slope < 1.0:
            raise ValueError("slope must be in [0, 1)")

    @property
    def name(self):
        return "relu" if self.slope == 0.0 else "leaky_relu"

    def __call__(self, z):
        return np.where(z > 0.0, z, self.slope * z)

    def multiplier(self, bit):
        return 1.0 if bit else self.slope


RELU = Activation(0.0)


@dataclass(frozen=True, eq=False)
class AffinePiece:
    """The affine map x -> C . x + d on one region."""

    C: np.ndarray
    d: float

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float).reshape(-1).copy()
        if not np.all(np.isfinite(C)) or not np.isfinite(self.d):
            raise ValueError("affine piece coefficients must be finite")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", float(self.d))

    def __call__(self, x):
        return float(self.C @ np.asarray(x, dtype=float)) + self.d


@dataclass(frozen=True)
class ActivationPattern:
    """Per-hidden-layer binary activation bits; identifies one linear region."""

    bits: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "bits", tuple(tuple(int(b) for b in layer) for layer in self.bits))

    def layer(self, l):
        return self.bits[l]

    @property
    def n_layers(self):
        return len(self.bits)

    def prefix(self, n):
        return ActivationPattern(self.bits[:n])


class PwaNetwork:
    """Feed-forward network with one PWA activation, stored as (F, b) layers.

    `layers` holds L entries; the first L-1 are followed by the activation,
    the last is affine. Immutable after construction.
    """

    __slots__ = ("layers", "activation", "input_dim", "output_dim", "metadata")

    def __init__(self, layers, activation=RELU, metadata=None):
        if not layers:
            raise ValueError("network needs at least one layer")
        clean = []
        for F, b in layers:
            F = np.asarray(F, dtype=float)
            b = np.asarray(b, dtype=float).reshape(-1)
            if F.ndim != 2 or F.shape[0] != b.shape[0]:
                raise ValueError("layer weight/bias shapes inconsistent")
            F = F.copy()
            b = b.copy()
            F.setflags(write=False)
            b.setflags(write=False)
            clean.append((F, b))
        for (F0, _), (F1, _) in zip(clean, clean[1:]):
            if F1.shape[1] != F0.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        self.layers = tuple(clean)
        self.activation = activation
        self.input_dim = clean[0][0].shape[1]
        self.output_dim = clean[-1][0].shape[0]
        self.metadata = dict(metadata or {})

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def hidden_widths(self):
        return tuple(F.shape[0] for F, _ in self.layers[:-1])

    def theta(self, l):
        """Homogeneous layer matrix [[F, b], [0, 1]] for layer index l."""
        F, b = self.layers[l]
        m = np.zeros((F.shape[0] + 1, F.shape[1] + 1))
        m[:-1, :-1] = F
        m[:-1, -1] = b
        m[-1, -1] = 1.0
        return m

    def lam(self, l, bits):
        """Activation multiplier matrix diag([m(bits); 1]) for hidden layer l."""
        mult = np.array([self.activation.multiplier(b) for b in bits] + [1.0])
        return np.diag(mult)

    def __repr__(self):
        widths = [self.input_dim] + [F.shape[0] for F, _ in self.layers]
        return f"PwaNetwork({'-'.join(map(str, widths))}, {self.activation.name})"


def forward(net, x):
    """Evaluate the network at a single point. Scalar for 1-output networks."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    z = x
    for F, b in net.layers[:-1]:
        z = net.activation(F @ z + b)
    F, b = net.layers[-1]
    out = F @ z + b
    return float(out[0]) if net.output_dim == 1 else out


def forward_batch(net, X):
    """Evaluate on an (N, input_dim) batch; returns (N,) for 1-output nets."""
    Z = np.asarray(X, dtype=float)
    for F, b in net.layers[:-1]:
        Z = net.activation(Z @ F.T + b)
    F, b = net.layers[-1]
    out = Z @ F.T + b
    return out[:, 0] if net.output_dim == 1 else out


def activation_pattern(net, x):
    """Pattern bits at a point; pre-activation exactly zero maps to bit 0."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    bits = []
    z = x
    for F, b in net.layers[:-1]:
        pre = F @ z + b
        bits.append(tuple(int(v > 0.0) for v in pre))
        z = net.activation(pre)
    return ActivationPattern(tuple(bits))


def _prefix_product(net, bits_per_layer, n_layers):
    """Homogeneous product Lam^(k) Theta^(k) for k = 0..n_layers-1."""
    T = np.eye(net.input_dim + 1)
    for l in range(n_layers):
        T = net.lam(l, bits_per_layer[l]) @ (net.theta(l) @ T)
    return T


def affine_piece(net, ap):
    """Exact affine map of the region identified by a full activation pattern."""
    bits = ap.bits if isinstance(ap, ActivationPattern) else tuple(ap)
    if len(bits) != net.n_layers - 1:
        raise ValueError("pattern does not cover all hidden layers")
    for layer_bits, w in zip(bits, net.hidden_widths):
        if len(layer_bits) != w:
            raise ValueError("pattern width mismatch")
    T = _prefix_product(net, bits, net.n_layers - 1)
    P = net.theta(net.n_layers - 1) @ T
    return AffinePiece(P[0, :-1], P[0, -1])


def layer_hyperplanes(net, ap_prefix, layer):
    """Hyperplanes of every neuron in one hidden layer, given the prefix bits.

    Returns a list with one entry per neuron: a unit-normalized Hyperplane, or
    a DegenerateNeuron instance when the pre-activation is constant on the
    prefix region.
    """
    bits = ap_prefix.bits if isinstance(ap_prefix, ActivationPattern) else tuple(ap_prefix)
    if not 0 <= layer < net.n_layers - 1:
        raise ValueError(f"layer index {layer} out of range")
    if len(bits) < layer:
        raise ValueError("prefix does not cover the layers below")
    T = _prefix_product(net, bits, layer)
    rows = net.theta(layer)[:-1] @ T  # (w_l, n+1): pre-activation affine forms
    out = []
    for j in range(rows.shape[0]):
        w = rows[j, :-1]
        c = rows[j, -1]
        s = float(np.max(np.abs(w)))
        if s <= DEGENERATE_TOL:
            out.append(DegenerateNeuron(layer, j, c))
        else:
            nrm = float(np.linalg.norm(w))
            out.append(Hyperplane(w / nrm, -c / nrm))
    return out


def neuron_hyperplane(net, ap_prefix, layer, neuron):
    """Zero set of one neuron's pre-activation over a prefix region.

    The returned plane is unit-normalized with the convention that the
    pre-activation is positive on the {normal . x > offset} side. Raises
    DegenerateNeuron when the gradient vanishes on the region.
    """
    planes = layer_hyperplanes(net, ap_prefix, layer)
    if not 0 <= neuron < len(planes):
        raise ValueError(f"neuron index {neuron} out of range")
    res = planes[neuron]
    if isinstance(res, DegenerateNeuron):
        raise res
    return res


@dataclass(frozen=True, eq=False)
class ReferenceMap:
    """Matrix E mapping a reference r to its equilibrium state E r."""

    E: np.ndarray

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E, dtype=float)).copy()
        E.setflags(write=False)
        object.__setattr__(self, "E", E)

    @property
    def state_dim(self):
        return self.E.shape[0]

    @property
    def reference_dim(self):
        return self.E.shape[1]

    def equilibrium(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        return self.E @ r


def rdlf_value(net, emap, x, r):
    """Reference-dependent Lyapunov value V(x, r) = V'(x - E r)."""
    x = np.asarray(x, dtype=float)
    shift = emap.equilibrium(r)
    if shift.shape != x.shape:
        raise ValueError("reference map output does not match state dimension")
    return forward(net, x - shift)


def rdlf_batch(net, emap, X, r):
    """Batched rdlf_value for a fixed reference."""
    shift = emap.equilibrium(r)
    return forward_batch(net, np.asarray(X, dtype=float) - shift)


def assert_zero_at_origin(net, tol=1e-8):
    """Check V(0) = 0, the hard precondition for Lyapunov use."""
    v0 = forward(net, np.zeros(net.input_dim))
    if abs(v0) > tol:
        raise ValueError(f"network value at the origin is {v0:.3e}, expected 0")


def normalize_origin(net):
    """Return a copy with the last-layer bias shifted so the origin maps to 0."""
    v0 = forward(net, np.zeros(net.input_dim))
    F, b = net.layers[-1]
    layers = list(net.layers[:-1]) + [(F, b - v0)]
    return PwaNetwork(layers, net.activation, net.metadata)
