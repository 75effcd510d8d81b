"""Benchmark dynamics, saturating policies, and Lyapunov fixture training.

Two discrete-time benchmarks (explicit Euler at tau = 0.05): an inverted
pendulum with a torque-saturated linear policy, and a cart-pole tracking a
cart-position reference. Both closed loops are reference symmetric, so one
Lyapunov function trained at zero reference serves every reference.

The fixture trainer produces PWA Lyapunov networks for these loops so the
repo carries valid weights without depending on any external training
pipeline: it regresses onto a scaled sqrt-quadratic shape from the
linearized loop, then fine-tunes hinge losses on the positivity and decrease
conditions with hard-negative mining until a fresh sampled check is clean.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from . import backprop
from .geometry import Polytope
from .pwanet import ReferenceMap, forward, forward_batch, normalize_origin

PENDULUM_PARAMS = {"gravity": 9.81, "mass": 0.15, "length": 0.5, "friction": 0.1}
CARTPOLE_PARAMS = {"cart_mass": 1.0, "pole_mass": 0.1, "pole_length": 1.0, "gravity": 9.81}
TAU = 0.05

PENDULUM_GAIN = np.array([-2.20, -0.638])
PENDULUM_INPUT_BOUNDS = (-6.0, 6.0)
CARTPOLE_GAIN = np.array([1.09, 1.81, 34.6, 11.3])

PENDULUM_DOMAIN = ([-1.0, -1.0], [1.0, 1.0])
CARTPOLE_DOMAIN = ([-1.0, -1.0, -0.3, -1.0], [1.0, 1.0, 0.3, 1.0])
CARTPOLE_REFERENCE_DOMAIN = (-0.699, 0.399)


class TrainingFailed(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True, eq=False)
class LinearPolicy:
    """u = gain . (x - x_bar), clipped to the input bounds when present."""

    gain: np.ndarray
    u_min: float | None = None
    u_max: float | None = None

    def __post_init__(self):
        g = np.asarray(self.gain, dtype=float).reshape(-1).copy()
        g.setflags(write=False)
        object.__setattr__(self, "gain", g)

    def __call__(self, x, x_bar=None):
        x = np.asarray(x, dtype=float)
        if x_bar is not None:
            x = x - x_bar
        u = x @ self.gain
        if self.u_min is not None or self.u_max is not None:
            u = np.clip(u, self.u_min, self.u_max)
        return float(u) if np.ndim(u) == 0 else u


def pendulum_step(x, u, params=None, tau=TAU):
    """Euler step of the pendulum; x = [theta, theta_dot], torque u.

    Works on a single state or an (N, 2) batch.
    """
    p = params or PENDULUM_PARAMS
    x = np.asarray(x, dtype=float)
    g, m, l, b = p["gravity"], p["mass"], p["length"], p["friction"]
    theta = x[..., 0]
    theta_dot = x[..., 1]
    theta_ddot = (m * g * l * np.sin(theta) + u - b * theta_dot) / (m * l * l)
    return np.stack([theta + tau * theta_dot, theta_dot + tau * theta_ddot], axis=-1)


def cartpole_step(x, f_x, params=None, tau=TAU):
    """Euler step of the cart-pole; x = [pos, vel, angle, angular vel]."""
    p = params or CARTPOLE_PARAMS
    x = np.asarray(x, dtype=float)
    mc, mp, l, g = p["cart_mass"], p["pole_mass"], p["pole_length"], p["gravity"]
    pos, vel, th, thd = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    sin = np.sin(th)
    cos = np.cos(th)
    denom = mc + mp * sin * sin
    x_ddot = (f_x + mp * sin * (l * thd * thd - g * cos)) / denom
    th_ddot = (-(f_x + mp * l * thd * thd * sin) * cos + (mc + mp) * g * sin) / (l * denom)
    return np.stack([pos + tau * vel, vel + tau * x_ddot,
                     th + tau * thd, thd + tau * th_ddot], axis=-1)


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A benchmark: dynamics step, stabilizing policy, reference map, domains."""

    name: str
    state_dim: int
    reference_dim: int
    params: dict
    step: callable
    policy: LinearPolicy
    emap: ReferenceMap
    domain_bounds: tuple
    reference_bounds: tuple
    tau: float = TAU

    def domain(self):
        lo, hi = self.domain_bounds
        return Polytope.box(lo, hi)

    def closed_loop(self, x, r):
        """One step of x(t+1) = f(x, pi(x, r)). Batched when x is (N, n)."""
        x_bar = self.emap.equilibrium(r)
        u = self.policy(x, x_bar)
        return self.step(x, u, self.params, self.tau)

    def closed_loop_shifted(self, y):
        """Zero-reference closed loop in shifted coordinates (batch friendly)."""
        u = self.policy(y)
        return self.step(y, u, self.params, self.tau)


def pendulum_system():
    return SystemSpec(
        name="pendulum",
        state_dim=2,
        reference_dim=1,
        params=dict(PENDULUM_PARAMS),
        step=pendulum_step,
        policy=LinearPolicy(PENDULUM_GAIN, *PENDULUM_INPUT_BOUNDS),
        emap=ReferenceMap(np.zeros((2, 1))),
        domain_bounds=PENDULUM_DOMAIN,
        reference_bounds=(0.0, 0.0),
    )


def cartpole_system():
    return SystemSpec(
        name="cartpole",
        state_dim=4,
        reference_dim=1,
        params=dict(CARTPOLE_PARAMS),
        step=cartpole_step,
        policy=LinearPolicy(CARTPOLE_GAIN),
        emap=ReferenceMap(np.array([[1.0], [0.0], [0.0], [0.0]])),
        domain_bounds=CARTPOLE_DOMAIN,
        reference_bounds=CARTPOLE_REFERENCE_DOMAIN,
    )


SYSTEMS = {"pendulum": pendulum_system, "cartpole": cartpole_system}


@dataclass
class LyapunovReport:
    """Sampled check of the three Lyapunov conditions."""

    samples: int
    positivity_violations: int
    decrease_violations: int
    worst_positivity: float      # min V over nonzero samples (want > 0)
    worst_decrease: float        # max of V(f(y)) - V(y) (want <= 0)
    origin_error: float          # max |V(x_bar_r, r)| over sampled references
    positivity_witness: np.ndarray | None = None
    decrease_witness: np.ndarray | None = None

    @property
    def clean(self):
        return (self.positivity_violations == 0 and self.decrease_violations == 0
                and self.origin_error <= 1e-8)


def check_lyapunov(net, emap, system, policy=None, n_samples=10000, seed=0,
                   n_references=20, tol=1e-9):
    """Sample the domain and count violations of the Lyapunov conditions.

    Positivity and one-step decrease are checked at `n_samples` uniform
    states (in shifted coordinates, which covers every reference by
    symmetry); the zero condition is checked exactly at the equilibria of
    `n_references` random references.
    """
    if policy is not None and policy is not system.policy:
        system = SystemSpec(system.name, system.state_dim, system.reference_dim,
                            system.params, system.step, policy, system.emap,
                            system.domain_bounds, system.reference_bounds, system.tau)
    rng = np.random.default_rng(seed)
    lo, hi = system.domain_bounds
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    Y = rng.uniform(lo, hi, size=(n_samples, system.state_dim))
    V = forward_batch(net, Y)
    nonzero = np.max(np.abs(Y), axis=1) > 1e-9
    pos_viol = (V <= tol) & nonzero
    Ynext = system.closed_loop_shifted(Y)
    dV = forward_batch(net, Ynext) - V
    dec_viol = dV > tol

    r_lo, r_hi = system.reference_bounds
    refs = rng.uniform(r_lo, r_hi, size=(n_references, system.reference_dim))
    origin_err = 0.0
    for r in refs:
        x_bar = system.emap.equilibrium(r)
        origin_err = max(origin_err, abs(forward(net, x_bar - system.emap.equilibrium(r))))

    report = LyapunovReport(
        samples=n_samples,
        positivity_violations=int(pos_viol.sum()),
        decrease_violations=int(dec_viol.sum()),
        worst_positivity=float(V[nonzero].min()) if nonzero.any() else np.inf,
        worst_decrease=float(dV.max()),
        origin_error=float(origin_err),
    )
    if report.positivity_violations:
        report.positivity_witness = Y[pos_viol][0]
    if report.decrease_violations:
        report.decrease_witness = Y[dec_viol][0]
    return report


def _precheck_stability(system, rng, n_starts=40, horizon=400, settle=5e-2):
    lo, hi = system.domain_bounds
    starts = rng.uniform(np.asarray(lo), np.asarray(hi), size=(n_starts, system.state_dim))
    Y = starts
    for _ in range(horizon):
        Y = system.closed_loop_shifted(Y)
        if not np.all(np.isfinite(Y)):
            return False
    return bool(np.all(np.max(np.abs(Y), axis=1) < settle))


def _quadratic_shape(system):
    """sqrt(y' P y) target from the linearized closed loop, scaled to O(1)."""
    n = system.state_dim
    eps = 1e-6
    y0 = np.zeros(n)
    f0 = system.closed_loop_shifted(y0)
    A = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = eps
        A[:, i] = (system.closed_loop_shifted(y0 + e) - f0) / eps
    P = sla.solve_discrete_lyapunov(A.T, np.eye(n))
    lo, hi = system.domain_bounds
    corners = np.array(np.meshgrid(*zip(lo, hi))).T.reshape(-1, n)
    scale = np.sqrt(np.einsum("ij,jk,ik->i", corners, P, corners)).max()
    P = P / scale ** 2
    return P


@dataclass
class FixtureConfig:
    """Fixture-trainer knobs.

    positivity_margin is relative to the state norm (train V >= margin *
    |y|); decrease_margin is relative to the value (train V(f(y)) - V(y) <=
    -margin * V(y)), so it must stay below the closed loop's per-step
    contraction rate. central_neurons pins that many first-layer biases to
    zero; a PWA function positive around the origin needs kinks there, so
    some first-layer planes must pass through it (None picks a heuristic).
    """

    seed: int = 0
    zero_bias: bool = False
    pretrain_steps: int = 1500
    finetune_rounds: int = 60
    steps_per_round: int = 250
    batch: int = 4096
    lr: float = 2e-3
    positivity_margin: float | None = None
    decrease_margin: float | None = None
    central_neurons: int | None = None
    check_samples: int = 10000
    scan_samples: int = 100000
    clean_scans: int = 3


def _violation_terms(params, Y, Ynext, cfg):
    """Hinge losses for positivity and decrease plus their output seeds.

    Positivity is enforced on the origin-normalized value V(y) - V(0), which
    is what ships after the final bias shift; the decrease margin scales
    with the (detached) current value. Per-sample terms are weighted by
    1/|y| so near-origin violations carry full gradient weight.
    """
    v, cache = backprop.forward_cached(params, Y)
    vn, cache_n = backprop.forward_cached(params, Ynext)
    origin = np.zeros((1, Y.shape[1]))
    v0, cache_0 = backprop.forward_cached(params, origin)
    norms = np.maximum(np.linalg.norm(Y, axis=1), 1e-9)
    inv_norms = 1.0 / norms
    vt = v - v0[0]
    pos_h = (-vt + cfg.positivity_margin * norms) * inv_norms
    dec_h = (vn - v + cfg.decrease_margin * np.maximum(vt, 0.0)) * inv_norms
    pos_active = pos_h > 0.0
    dec_active = dec_h > 0.0
    n = len(Y)
    dv = np.zeros(n)
    dvn = np.zeros(n)
    dv[pos_active] -= inv_norms[pos_active] / n
    dv[dec_active] -= inv_norms[dec_active] / n
    dvn[dec_active] += inv_norms[dec_active] / n
    d0 = np.array([(inv_norms[pos_active]).sum() / n])
    loss = float(pos_h[pos_active].sum() + dec_h[dec_active].sum()) / n
    g1 = backprop.backprop(params, cache, dv)
    g2 = backprop.backprop(params, cache_n, dvn)
    g3 = backprop.backprop(params, cache_0, d0)
    grads = [[a[0] + b[0] + c[0], a[1] + b[1] + c[1]]
             for a, b, c in zip(g1, g2, g3)]
    return loss, grads, pos_active, dec_active


def train_lyapunov_fixture(system, arch, config=None):
    """Train a PWA Lyapunov network for a benchmark closed loop.

    `arch` lists hidden widths (e.g. [8] or [12, 12]). Training fails fast if
    simulation from sampled initial states does not settle, and raises
    TrainingFailed with the last violation report when the budget runs out
    before a fresh 10^4-sample check comes back clean.
    """
    cfg = config or FixtureConfig()
    rng = np.random.default_rng(cfg.seed)
    if not _precheck_stability(system, rng):
        raise TrainingFailed("closed loop fails the simulation stability pre-check")

    lo = np.asarray(system.domain_bounds[0], dtype=float)
    hi = np.asarray(system.domain_bounds[1], dtype=float)
    n = system.state_dim
    widths = [n] + list(arch) + [1]
    params = backprop.init_params(widths, seed=cfg.seed)
    if cfg.zero_bias:
        pinned = widths[1]
        for p in params:
            p[1][:] = 0.0
    else:
        pinned = cfg.central_neurons
        if pinned is None:
            pinned = min(widths[1], n + 3)
        params[0][1][:pinned] = 0.0

    def mask_grads(grads):
        if cfg.zero_bias:
            return
        grads[0][1][:pinned] = 0.0

    P = _quadratic_shape(system)

    def sample(k):
        return rng.uniform(lo, hi, size=(k, n))

    # calibrate training margins against what the quadratic shape achieves;
    # asking for more decrease than the slowest mode affords cannot converge
    if cfg.positivity_margin is None or cfg.decrease_margin is None:
        Yc = sample(20000)
        Yc[:10000] *= 10.0 ** rng.uniform(-3.0, 0.0, size=(10000, 1))
        tc = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Yc, P, Yc), 0.0))
        tn = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i",
                                          system.closed_loop_shifted(Yc), P,
                                          system.closed_loop_shifted(Yc)), 0.0))
        rel_dec = (tc - tn) / np.maximum(tc, 1e-12)
        slope = tc / np.maximum(np.linalg.norm(Yc, axis=1), 1e-12)
        if cfg.positivity_margin is None:
            cfg.positivity_margin = float(np.clip(0.5 * slope.min(), 1e-3, 0.1))
        if cfg.decrease_margin is None:
            q = float(np.quantile(rel_dec, 0.01))
            cfg.decrease_margin = float(np.clip(0.5 * q, 1e-3, 0.02))

    # stage 1: regress onto the sqrt-quadratic shape of the linearized loop
    opt = backprop.Adam(params, lr=cfg.lr)
    for _ in range(cfg.pretrain_steps):
        Y = sample(cfg.batch)
        t = np.sqrt(np.maximum(np.einsum("ij,jk,ik->i", Y, P, Y), 0.0))
        v, cache = backprop.forward_cached(params, Y)
        dout = 2.0 * (v - t) / len(Y)
        grads = backprop.backprop(params, cache, dout)
        mask_grads(grads)
        opt.step(params, grads, freeze_bias=cfg.zero_bias)

    # stage 2: hinge fine-tuning with hard-negative mining from large scans
    def scan_violators(p, n_pts, seed, margin_frac):
        """States violating the real conditions or sitting within a fraction
        of the training margin of violating; returns (real count, mined)."""
        srng = np.random.default_rng(seed)
        Y = srng.uniform(lo, hi, size=(n_pts, n))
        m = n_pts // 4
        Y[:m] *= 10.0 ** srng.uniform(-3.0, 0.0, size=(m, 1))
        v, _ = backprop.forward_cached(p, Y)
        vn, _ = backprop.forward_cached(p, system.closed_loop_shifted(Y))
        v0, _ = backprop.forward_cached(p, np.zeros((1, n)))
        vt = v - v0[0]
        dv = vn - v
        norms = np.linalg.norm(Y, axis=1)
        real = (vt <= 1e-9) | (dv > 1e-9)
        near = ((vt <= margin_frac * cfg.positivity_margin * norms)
                | (dv > -margin_frac * cfg.decrease_margin * np.maximum(vt, 0.0)))
        return int(real.sum()), Y[near]

    def sample_curriculum(k):
        """Domain samples with half the batch pulled toward the origin on a
        log radius scale, so the tight near-origin conditions get signal."""
        U = rng.uniform(lo, hi, size=(k, n))
        m = k // 2
        U[:m] *= 10.0 ** rng.uniform(-3.0, 0.0, size=(m, 1))
        return U

    def decrease_gap(p, Y):
        v, _ = backprop.forward_cached(p, Y)
        vn, _ = backprop.forward_cached(p, system.closed_loop_shifted(Y))
        return vn - v

    def decrease_attack(p, seed, n_starts=2048, steps=25):
        """Projected sign-gradient ascent on the one-step gap V(f(y)) - V(y).

        Random scans miss violating pockets of tiny measure; this hunts them
        directly (dynamics gradient by finite differences).
        """
        arng = np.random.default_rng(seed)
        span = hi - lo
        Y = arng.uniform(lo, hi, size=(n_starts, n))
        m = n_starts // 4
        Y[:m] *= 10.0 ** arng.uniform(-2.0, 0.0, size=(m, 1))
        eps = 1e-6
        for k in range(steps):
            base = decrease_gap(p, Y)
            G = np.empty_like(Y)
            for i in range(n):
                E = np.zeros_like(Y)
                E[:, i] = eps
                G[:, i] = (decrease_gap(p, Y + E) - base) / eps
            step = 0.04 / (1.0 + 0.2 * k)
            Y = np.clip(Y + step * span * np.sign(G), lo, hi)
        return Y, decrease_gap(p, Y)

    pool = sample_curriculum(cfg.batch)
    opt = backprop.Adam(params, lr=cfg.lr * 0.25)
    last_real = None
    for rnd in range(cfg.finetune_rounds):
        opt.lr = cfg.lr * 0.25 / (1.0 + rnd / 25.0)
        for _ in range(cfg.steps_per_round):
            fresh = sample_curriculum(max(cfg.batch - len(pool), cfg.batch // 4))
            Y = np.vstack([pool, fresh]) if len(pool) else fresh
            Ynext = system.closed_loop_shifted(Y)
            _, grads, pos_a, dec_a = _violation_terms(params, Y, Ynext, cfg)
            mask_grads(grads)
            opt.step(params, grads, freeze_bias=cfg.zero_bias)
        real, mined = scan_violators(params, cfg.scan_samples,
                                     cfg.seed + 1000 + rnd, 0.5)
        adv, adv_dv = decrease_attack(params, cfg.seed + 7000 + rnd)
        v_adv, _ = backprop.forward_cached(params, adv)
        adv_bad = adv[adv_dv > -0.5 * cfg.decrease_margin * np.maximum(v_adv, 0.0)]
        last_real = real
        srng = np.random.default_rng(cfg.seed + 5000 + rnd)
        if len(mined) > cfg.batch:
            mined = mined[srng.permutation(len(mined))[:cfg.batch]]
        pool = np.vstack([mined, adv_bad]) if len(adv_bad) else mined
        if real == 0 and float(adv_dv.max()) < 0.0:
            # accept only when several independent large scans and attacks
            # all come back clean
            clean = all(
                scan_violators(params, cfg.scan_samples,
                               cfg.seed + 90000 + rnd * 10 + k, 0.0)[0] == 0
                for k in range(cfg.clean_scans))
            clean = clean and all(
                float(decrease_attack(params, cfg.seed + 70000 + rnd * 10 + k)[1].max()) < 0.0
                for k in range(2))
            if not clean:
                continue
            net = backprop.to_network(params)
            if not cfg.zero_bias:
                net = normalize_origin(net)
            report = check_lyapunov(net, system.emap, system,
                                    n_samples=cfg.check_samples,
                                    seed=cfg.seed + 1000 + rnd)
            if not report.clean:
                continue
            net.metadata.update({
                "system": system.name,
                "architecture": widths,
                "zero_bias": cfg.zero_bias,
                "seed": cfg.seed,
                "finetune_rounds": rnd + 1,
                "scan_samples": cfg.scan_samples,
                "clean_scans": cfg.clean_scans,
            })
            return net

    raise TrainingFailed(
        f"no clean Lyapunov scan within {cfg.finetune_rounds} rounds "
        f"(last scan: {last_real} violations)",
        report=check_lyapunov(backprop.to_network(params), system.emap, system,
                              n_samples=cfg.check_samples, seed=cfg.seed))
