"""Minimal dense-layer training utilities: forward cache, backprop, Adam.

Shared by the Lyapunov fixture trainer and the level estimator. Parameters
are a plain list of (W, b) float64 pairs, convertible to/from PwaNetwork.
No autodiff dependency; gradients are hand-derived and checked against
finite differences in the test suite.
"""

import numpy as np

from .pwanet import RELU, PwaNetwork


def init_params(widths, seed, zero_bias=False, scale=None):
    """He-style random init for layer sizes [in, h1, ..., out]."""
    rng = np.random.default_rng(seed)
    params = []
    for w_in, w_out in zip(widths, widths[1:]):
        s = scale if scale is not None else np.sqrt(2.0 / w_in)
        W = rng.normal(0.0, s, size=(w_out, w_in))
        b = np.zeros(w_out)
        params.append([W, b])
    return params


def to_network(params, activation=RELU, metadata=None):
    return PwaNetwork([(W.copy(), b.copy()) for W, b in params], activation, metadata)


def from_network(net):
    return [[W.copy(), b.copy()] for W, b in net.layers]


def forward_cached(params, X, slope=0.0):
    """Batch forward pass; returns (output (N,), cache for backprop)."""
    Z = np.asarray(X, dtype=float)
    zs = [Z]
    pres = []
    for W, b in params[:-1]:
        pre = Z @ W.T + b
        pres.append(pre)
        Z = np.where(pre > 0.0, pre, slope * pre)
        zs.append(Z)
    W, b = params[-1]
    out = Z @ W.T + b
    return out[:, 0], (zs, pres)


def backprop(params, cache, dout, slope=0.0):
    """Gradients of sum(dout * output) w.r.t. every parameter."""
    zs, pres = cache
    grads = [[np.zeros_like(W), np.zeros_like(b)] for W, b in params]
    delta = np.asarray(dout, dtype=float)[:, None]  # (N, 1)
    W_last, _ = params[-1]
    grads[-1][0][:] = delta.T @ zs[-1]
    grads[-1][1][:] = delta.sum(axis=0)
    dZ = delta @ W_last
    for l in range(len(params) - 2, -1, -1):
        act_grad = np.where(pres[l] > 0.0, 1.0, slope)
        dpre = dZ * act_grad
        grads[l][0][:] = dpre.T @ zs[l]
        grads[l][1][:] = dpre.sum(axis=0)
        if l > 0:
            dZ = dpre @ params[l][0]
    return grads


class Adam:
    """Plain Adam over a (W, b) parameter list."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [[np.zeros_like(W), np.zeros_like(b)] for W, b in params]
        self.v = [[np.zeros_like(W), np.zeros_like(b)] for W, b in params]

    def step(self, params, grads, freeze_bias=False):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for l, (g, m, v) in enumerate(zip(grads, self.m, self.v)):
            for k in range(2):
                if k == 1 and freeze_bias:
                    continue
                m[k] *= self.beta1
                m[k] += (1.0 - self.beta1) * g[k]
                v[k] *= self.beta2
                v[k] += (1.0 - self.beta2) * g[k] ** 2
                params[l][k] -= self.lr * (m[k] / b1c) / (np.sqrt(v[k] / b2c) + self.eps)


def sgd_step(params, grads, lr, freeze_bias=False):
    for l, g in enumerate(grads):
        params[l][0] -= lr * g[0]
        if not freeze_bias:
            params[l][1] -= lr * g[1]


def flatten(params):
    return np.concatenate([np.concatenate([W.ravel(), b.ravel()]) for W, b in params])


def unflatten(vec, params_like):
    out = []
    i = 0
    for W, b in params_like:
        w_new = vec[i:i + W.size].reshape(W.shape).copy()
        i += W.size
        b_new = vec[i:i + b.size].copy()
        i += b.size
        out.append([w_new, b_new])
    return out
