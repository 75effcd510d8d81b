"""Explicit reference governor driven by admissible Lyapunov levels.

The governor filters a desired reference r into an applied reference v that
the closed loop can track safely: v moves toward r at a rate proportional
to the dynamic safety margin (the gap between the admissible level and the
current Lyapunov value), so it stalls at the CAPI boundary and never leads
the state into inadmissible territory. Discrete-time Euler implementation;
scalar references.
"""

from dataclasses import dataclass

import numpy as np

from .pwanet import forward


class ConstraintViolated(RuntimeError):
    def __init__(self, step, state, constraint, value, trajectory=None):
        super().__init__(
            f"constraint {constraint} = {value:.3e} > 0 at step {step}")
        self.step = step
        self.state = state
        self.constraint = constraint
        self.value = value
        self.trajectory = trajectory


@dataclass
class ErgConfig:
    eta: float = 2.0
    dt: float = 0.05
    horizon: int = 2000
    r_bounds: tuple = (-np.inf, np.inf)
    v_tol: float = 1e-4
    x_tol: float = 1e-3

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class LevelSource:
    """Admissible level gamma(v) plus the Lyapunov value it is compared to."""

    gamma: callable
    v_net: object
    emap: object
    kind: str = "exact"

    def value(self, x, v):
        shift = self.emap.equilibrium(np.atleast_1d(v))
        return forward(self.v_net, np.asarray(x, dtype=float) - shift)


def exact_level_source(tree, constraints, emap, v_net, **opts):
    """Per-query level computation over the cached partition tree."""
    from .capi import max_admissible_level

    def gamma(v):
        return max_admissible_level(tree, constraints, np.atleast_1d(v),
                                    emap, **opts).gamma_star

    return LevelSource(gamma, v_net, emap, kind="exact")


def estimator_level_source(est, v_net, emap):
    """Fast level inference from a verified estimator network."""
    return LevelSource(lambda v: est.level(np.atleast_1d(v)), v_net, emap,
                       kind="estimator")


def dsm(gamma_star, v_value, eta):
    """Dynamic safety margin: eta * (admissible level - current value)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    return eta * (gamma_star - v_value)


def navigation_field(r, v):
    """Sign field steering the applied reference toward the desired one."""
    r = float(r)
    v = float(v)
    if r > v:
        return 1.0
    if r < v:
        return -1.0
    return 0.0


def erg_step(x, v, r, level_source, cfg):
    """One Euler update of the applied reference.

    The margin is clamped at zero (a negative margin freezes v rather than
    retreating); the update clips at the desired reference and at the
    reference-domain bounds.
    """
    v = float(v)
    delta = dsm(level_source.gamma(v), level_source.value(x, v), cfg.eta)
    rho = navigation_field(r, v)
    v_new = v + cfg.dt * max(delta, 0.0) * rho
    if rho > 0:
        v_new = min(v_new, float(r))
    elif rho < 0:
        v_new = max(v_new, float(r))
    return float(np.clip(v_new, cfg.r_bounds[0], cfg.r_bounds[1]))


@dataclass
class ErgTrajectory:
    """Uniformly-sampled log of an ERG run."""

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    v: np.ndarray
    delta: np.ndarray
    lyapunov: np.ndarray
    gamma: np.ndarray
    constraint_values: np.ndarray
    constraint_names: list

    def __len__(self):
        return len(self.t)


def initial_reference(x0, level_source, r_bounds, n_grid=401):
    """Admissible starting reference: the grid v minimizing V(x0, v) among
    those with V(x0, v) <= gamma(v)."""
    lo, hi = r_bounds
    best_v = None
    best_val = np.inf
    for v in np.linspace(lo, hi, n_grid):
        val = level_source.value(x0, v)
        if val <= level_source.gamma(v) and val < best_val:
            best_val = val
            best_v = float(v)
    if best_v is None:
        raise ValueError("no grid reference admits the initial state")
    return best_v


def simulate_erg(system, policy, v_net, emap, level_source, constraints,
                 x0, r, cfg, v0=None, enforce_constraints=True):
    """Closed-loop simulation with the reference governor in the loop.

    Alternates a plant step (policy plus dynamics) with a reference update;
    logs state, input, applied reference, margin, Lyapunov value, level, and
    every constraint value per step. Terminates at the horizon or once the
    applied reference and the state have both converged. Raises
    ConstraintViolated (with the partial log attached) when enforcement is
    on and a logged state leaves the admissible set.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = float(np.atleast_1d(r)[0])
    if v0 is None:
        v0 = initial_reference(x, level_source, cfg.r_bounds)
    v = float(v0)

    names = [c.name for c in constraints]
    rows = {k: [] for k in ("t", "x", "u", "v", "delta", "lyap", "gamma", "c")}

    def log(step, x, v, u, delta, val, gam):
        rows["t"].append(step * cfg.dt)
        rows["x"].append(x.copy())
        rows["u"].append(u)
        rows["v"].append(v)
        rows["delta"].append(delta)
        rows["lyap"].append(val)
        rows["gamma"].append(gam)
        rows["c"].append([c.value(x) for c in constraints])

    def build():
        return ErgTrajectory(
            np.array(rows["t"]), np.array(rows["x"]), np.array(rows["u"]),
            np.array(rows["v"]), np.array(rows["delta"]), np.array(rows["lyap"]),
            np.array(rows["gamma"]), np.array(rows["c"]), names)

    for step in range(cfg.horizon + 1):
        gam = level_source.gamma(v)
        val = level_source.value(x, v)
        delta = dsm(gam, val, cfg.eta)
        x_bar = emap.equilibrium(np.atleast_1d(v))
        u = policy(x, x_bar)
        log(step, x, v, u, delta, val, gam)
        cvals = rows["c"][-1]
        if enforce_constraints:
            for name, cv in zip(names, cvals):
                if cv > 1e-8:
                    raise ConstraintViolated(step, x.copy(), name, cv,
                                             trajectory=build())
        if step == cfg.horizon:
            break
        if (abs(v - r) < cfg.v_tol
                and np.linalg.norm(x - emap.equilibrium(np.atleast_1d(r))) < cfg.x_tol):
            break
        x = system.step(x, u, system.params, system.tau)
        rho = navigation_field(r, v)
        v_new = v + cfg.dt * max(delta, 0.0) * rho
        if rho > 0:
            v_new = min(v_new, r)
        elif rho < 0:
            v_new = max(v_new, r)
        v = float(np.clip(v_new, cfg.r_bounds[0], cfg.r_bounds[1]))

    return build()
