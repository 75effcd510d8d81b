"""Fast admissible-level estimator: CEGIS training and exact verification.

The estimator is a small PWA network mapping a reference to an admissible
Lyapunov level. Verification maximizes the constraint value over the
estimator-induced sublevel set {(x, r) : V(x, r) <= E(r)}; because every
function involved is PWA, enumerating (Lyapunov region, estimator region,
constraint piece) triples and solving one LP in (x, r) per triple gives the
exact optimum, with no integer programming. Training alternates a
mean-squared-error fit against the exact level oracle with verification;
counterexamples join the training set until the verifier signs off.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import backprop
from .geometry import LpStatus, solve_lp_arrays
from .partition import annotate_lower_bounds, build_partition_tree
from .pwanet import PwaNetwork, forward, forward_batch


class Unverified(RuntimeError):
    """CEGIS ran out of iterations; carries the last witness for diagnosis."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class VerifyResult:
    opt_value: float
    witness_state: np.ndarray | None
    witness_reference: np.ndarray | None
    verified: bool
    triples_explored: int
    lps_solved: int
    wall_seconds: float


@dataclass
class TrainingSet:
    references: np.ndarray          # (N, n_r)
    levels: np.ndarray              # (N,) oracle values
    provenance: list                # "pretrain" | "counterexample"

    def append(self, r, gamma, tag):
        self.references = np.vstack([self.references, np.atleast_2d(r)])
        self.levels = np.append(self.levels, gamma)
        self.provenance.append(tag)

    def __len__(self):
        return len(self.levels)


@dataclass
class EstimatorNet:
    """Clamped estimator max(net(r), 0) with its training metadata.

    `network` includes the output clamp as a final ReLU stage, so the
    estimator itself is a PWA network and the partition machinery applies
    to it directly.
    """

    network: PwaNetwork
    verified: bool = False
    iterations: int = 0
    dataset_size: int = 0
    metadata: dict = field(default_factory=dict)

    def level(self, r):
        return forward(self.network, np.atleast_1d(np.asarray(r, dtype=float)))

    def level_batch(self, R):
        return forward_batch(self.network, np.atleast_2d(np.asarray(R, dtype=float)))


def clamp_network(raw):
    """Append max(., 0) as a ReLU stage so the clamp stays inside PWA algebra."""
    if raw.output_dim != 1:
        raise ValueError("estimator network must have one output")
    layers = list(raw.layers) + [(np.array([[1.0]]), np.zeros(1))]
    return PwaNetwork(layers, raw.activation, dict(raw.metadata))


def pretrain_dataset(oracle, r_domain, n, seed=0):
    """n uniform oracle samples over the box hull of the reference domain.

    Uses rejection for non-box domains; deterministic per seed.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    from .partition import _domain_bbox
    lo, hi = _domain_bbox(r_domain)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("reference domain must be bounded")
    hi = np.maximum(hi, lo)  # LP rounding can leave hi = lo - 0.0
    rng = np.random.default_rng(seed)
    refs = []
    while len(refs) < n:
        cand = rng.uniform(lo, hi)
        if r_domain.contains(cand, tol=1e-12):
            refs.append(cand)
    refs = np.array(refs)
    levels = np.array([oracle(r) for r in refs])
    return TrainingSet(refs, levels, ["pretrain"] * n)


def _estimator_tree(e_net, r_domain):
    tree = build_partition_tree(e_net, r_domain)
    return annotate_lower_bounds(tree, with_bbox=True)


def verify_estimator(v_net, emap, e_net, constraints, x_domain, r_domain,
                     v_tree=None, seed=0):
    """Exact maximum constraint violation over the estimator's sublevel sets.

    Enumerates every (Lyapunov leaf, estimator leaf, violating constraint
    piece) triple and solves one LP in (x, r) with the shift y = x - E r,
    the region constraints, and the level inequality V-piece <= E-piece.
    Pairs whose value intervals or coordinate boxes cannot meet are skipped;
    the skip tests are interval arithmetic, so the reported optimum is still
    exact over the enumerated decomposition.
    """
    t0 = time.perf_counter()
    net = e_net.network if isinstance(e_net, EstimatorNet) else e_net
    if v_tree is None:
        v_tree = annotate_lower_bounds(build_partition_tree(v_net, x_domain))
    elif not v_tree.annotated:
        annotate_lower_bounds(v_tree)
    e_tree = _estimator_tree(net, r_domain)

    n = x_domain.dim
    n_r = r_domain.dim
    E = emap.E
    A_x, b_x = x_domain.matrices()
    from .partition import _domain_bbox
    dom_lo, dom_hi = _domain_bbox(x_domain)

    best = -np.inf
    best_x = None
    best_r = None
    triples = 0
    lps = 0

    v_bl = np.array([lf.bbox_lower for lf in v_tree.leaves])
    v_bu = np.array([lf.bbox_upper for lf in v_tree.leaves])
    v_lo = np.array([lf.v_lower for lf in v_tree.leaves])

    for e_leaf in e_tree.leaves:
        r_lo = e_leaf.bbox_lower
        r_hi = e_leaf.bbox_upper
        # interval of E r over this estimator region, per state coordinate
        shift_lo = np.minimum(E @ r_lo, E @ r_hi)
        shift_hi = np.maximum(E @ r_lo, E @ r_hi)
        # interval of the estimator level on the region
        e_hi = e_leaf.v_upper
        A_er, b_er = e_leaf.matrices()
        # x ranges over leaf bbox + E r; reject leaves that cannot reach the
        # state domain or whose Lyapunov floor exceeds the level ceiling
        x_lo = v_bl + shift_lo
        x_hi = v_bu + shift_hi
        feasible = np.all(x_lo <= dom_hi + 1e-9, axis=1)
        feasible &= np.all(x_hi >= dom_lo - 1e-9, axis=1)
        feasible &= v_lo <= e_hi + 1e-9
        for con in constraints:
            for region_c, piece_c in con.pieces:
                A_c, b_c = region_c.matrices()
                for i, leaf in enumerate(v_tree.leaves):
                    triples += 1
                    if not feasible[i]:
                        continue
                    # assemble the LP in z = [x; r]
                    A_leaf, b_leaf = leaf.matrices()
                    rows = []
                    rhs = []
                    # Lyapunov region: a.(x - E r) <= b
                    rows.append(np.hstack([A_leaf, -A_leaf @ E]))
                    rhs.append(b_leaf)
                    # estimator region in r
                    if len(b_er):
                        rows.append(np.hstack([np.zeros((len(b_er), n)), A_er]))
                        rhs.append(b_er)
                    # state domain, constraint partition
                    rows.append(np.hstack([A_x, np.zeros((len(b_x), n_r))]))
                    rhs.append(b_x)
                    if len(b_c):
                        rows.append(np.hstack([A_c, np.zeros((len(b_c), n_r))]))
                        rhs.append(b_c)
                    # level inequality: C_V (x - E r) + d_V <= C_E r + d_E
                    cv = leaf.piece.C
                    ce = e_leaf.piece.C
                    rows.append(np.hstack([cv, -cv @ E - ce])[None, :])
                    rhs.append(np.array([e_leaf.piece.d - leaf.piece.d]))
                    A = np.vstack(rows)
                    b = np.concatenate(rhs)
                    obj = np.hstack([-piece_c.C, np.zeros(n_r)])
                    res = solve_lp_arrays(obj, A, b, seed=seed)
                    lps += 1
                    if res.status != LpStatus.OPTIMAL:
                        continue
                    val = -res.value + piece_c.d
                    if val > best:
                        best = val
                        best_x = res.point[:n]
                        best_r = res.point[n:]

    verified = best <= 0.0
    return VerifyResult(best, best_x, best_r, verified, triples, lps,
                        time.perf_counter() - t0)


@dataclass
class EstimatorConfig:
    n_pretrain: int = 200
    max_iters: int = 50
    learning_rate: float = 5e-3
    seed: int = 0
    safety_margin: float = 0.02
    hidden: tuple = (8, 4)
    pretrain_steps: int = 4000
    steps_per_iter: int = 1500
    counterexample_jitter: float = 1e-3
    jitter_count: int = 4


def mse_loss_and_grad(params, R, targets):
    """Mean squared error over the raw (unclamped) estimator output."""
    out, cache = backprop.forward_cached(params, R)
    err = out - targets
    loss = float(np.mean(err ** 2))
    grads = backprop.backprop(params, cache, 2.0 * err / len(R))
    return loss, grads


def train_estimator(oracle, constraints, v_net, emap, x_domain, r_domain,
                    config=None, v_tree=None, initial_params=None):
    """CEGIS loop: fit the oracle, verify exactly, learn from counterexamples.

    Training targets are oracle levels scaled down by the safety margin to
    bias toward first-pass verification. Counterexample references join the
    dataset with a small jittered cluster against single-point overfitting.
    Raises Unverified when max_iters verification rounds all fail.
    `initial_params` overrides the seeded weight init (mainly for tests that
    force a failing first verification).
    """
    cfg = config or EstimatorConfig()
    rng = np.random.default_rng(cfg.seed)
    data = pretrain_dataset(oracle, r_domain, cfg.n_pretrain, seed=cfg.seed)
    n_r = r_domain.dim
    widths = [n_r] + list(cfg.hidden) + [1]
    if initial_params is not None:
        params = [[np.array(W, dtype=float), np.array(b, dtype=float)]
                  for W, b in initial_params]
    else:
        params = backprop.init_params(widths, seed=cfg.seed)
    opt = backprop.Adam(params, lr=cfg.learning_rate)

    def targets():
        return data.levels * (1.0 - cfg.safety_margin)

    for _ in range(cfg.pretrain_steps):
        _, grads = mse_loss_and_grad(params, data.references, targets())
        opt.step(params, grads)

    if v_tree is None:
        v_tree = annotate_lower_bounds(build_partition_tree(v_net, x_domain))

    last_witness = None
    ce_opts = []
    for it in range(cfg.max_iters):
        raw = backprop.to_network(params)
        candidate = EstimatorNet(clamp_network(raw))
        res = verify_estimator(v_net, emap, candidate, constraints,
                               x_domain, r_domain, v_tree=v_tree)
        if res.verified:
            candidate.verified = True
            candidate.iterations = it + 1
            candidate.dataset_size = len(data)
            candidate.metadata.update({
                "seed": cfg.seed,
                "safety_margin": cfg.safety_margin,
                "opt_value": res.opt_value,
                "n_pretrain": cfg.n_pretrain,
                "counterexample_opts": ce_opts,
            })
            return candidate
        r_star = res.witness_reference
        ce_opts.append(float(res.opt_value))
        last_witness = (res.witness_state, r_star)
        cluster = [r_star]
        for _ in range(cfg.jitter_count):
            cand = r_star + rng.normal(0.0, cfg.counterexample_jitter, size=n_r)
            if r_domain.contains(cand, tol=1e-12):
                cluster.append(cand)
        for rr in cluster:
            data.append(rr, oracle(rr), "counterexample")
        opt = backprop.Adam(params, lr=cfg.learning_rate)
        for _ in range(cfg.steps_per_iter):
            _, grads = mse_loss_and_grad(params, data.references, targets())
            opt.step(params, grads)

    raise Unverified(f"estimator not verified after {cfg.max_iters} iterations",
                     witness=last_witness)
