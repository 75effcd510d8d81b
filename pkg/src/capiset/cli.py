"""Command-line entry point and the benchmark harness.

Subcommands: build-tree, gamma, train-estimator, verify, simulate-erg,
bench, check-lyapunov. Outputs are CSV/JSON with an embedded header carrying
the tool version, the seed, and input-file hashes; given the same seed,
repeated runs are byte-identical apart from timing fields.

Exit codes: 0 success, 1 validation/schema/usage error, 2 numerical failure.
"""

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, capi, erg, estimator as est_mod, fixtures, io as cio
from .geometry import NumericalFailure
from .partition import annotate_lower_bounds, build_partition_tree
from .systems import SYSTEMS, check_lyapunov

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage error: {message}")


class CliError(Exception):
    pass


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def write_csv(path, columns, rows, header=None):
    lines = []
    if header:
        lines.append("# " + json.dumps(header, sort_keys=True))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_csv(path):
    """Header dict (may be None), column names, and string-valued rows."""
    header = None
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            header = json.loads(ln[1:].strip())
        elif ln:
            body.append(ln)
    columns = body[0].split(",")
    rows = [ln.split(",") for ln in body[1:]]
    return header, columns, rows


def _system(args):
    if args.system not in SYSTEMS:
        raise CliError(f"validation error: unknown system {args.system!r}")
    return SYSTEMS[args.system]()


def _lyapunov(args, system):
    if getattr(args, "weights", None):
        return cio.load_network(args.weights, require_zero_origin=True)
    return fixtures.lyapunov_for(system.name)


def _tree(args, system, net):
    if getattr(args, "tree", None) and os.path.exists(args.tree):
        return cio.load_tree(args.tree)
    tree = build_partition_tree(net, system.domain())
    annotate_lower_bounds(tree)
    return tree


def _constraints(args, dim):
    if not getattr(args, "constraints", None):
        raise CliError("validation error: --constraints is required")
    if not os.path.exists(args.constraints):
        raise CliError(f"file error: constraint file {args.constraints} not found")
    return cio.load_constraints(args.constraints, dim)


def _inputs_header(args, **paths):
    real = {k: p for k, p in paths.items() if p and os.path.exists(p)}
    return cio.artifact_header(seed=getattr(args, "seed", None), inputs=real)


# -- subcommands --------------------------------------------------------------

def cmd_build_tree(args):
    system = _system(args)
    net = _lyapunov(args, system)
    tree = build_partition_tree(net, system.domain())
    annotate_lower_bounds(tree)
    header = _inputs_header(args, weights=getattr(args, "weights", None))
    cio.save_tree(tree, args.out, header=header)
    print(f"partition tree: {tree.n_leaves} leaves, "
          f"{tree.stats['node_count']} nodes, "
          f"build {tree.stats['build_seconds']:.3f} s -> {args.out}")
    return EXIT_OK


def cmd_gamma(args):
    system = _system(args)
    net = _lyapunov(args, system)
    tree = _tree(args, system, net)
    constraints, convex = _constraints(args, system.state_dim)
    if args.r is not None:
        refs = [float(args.r)]
    elif args.r_sweep:
        lo, hi, n = args.r_sweep
        refs = list(np.linspace(float(lo), float(hi), int(n)))
    else:
        refs = [0.0]

    def query(r):
        if args.convex and convex is not None:
            A_c, b_c = convex
            best = None
            for i in range(A_c.shape[0]):
                piece = capi.AffinePiece(A_c[i], -float(b_c[i]))
                res = capi.max_admissible_level_convex(
                    tree, A_c, b_c, piece, np.array([r]), system.emap,
                    use_bound_pruning=not args.no_bound_pruning)
                if best is None or res.gamma_star < best.gamma_star:
                    best = res
            return best
        return capi.max_admissible_level(
            tree, constraints, np.array([r]), system.emap,
            use_plane_pruning=not args.no_plane_pruning,
            use_bound_pruning=not args.no_bound_pruning,
            prefilter=not args.no_prefilter)

    workers = args.workers or os.cpu_count() or 1
    if workers > 1 and len(refs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(query, refs))
    else:
        results = [query(r) for r in refs]

    columns = ["r", "gamma", "binding", "lps_solved", "pruned_planes",
               "pruned_bounds", "wall_ms"]
    rows = []
    for r, res in zip(refs, results):
        rows.append([r, res.gamma_star, res.binding or "",
                     res.counters.get("lps_solved", 0),
                     res.counters.get("pruned_planes", 0),
                     res.counters.get("pruned_bounds", 0),
                     res.wall_seconds * 1e3])
    header = _inputs_header(args, constraints=args.constraints,
                            weights=getattr(args, "weights", None))
    if args.out:
        write_csv(args.out, columns, rows, header=header)
    for r, res in zip(refs, results):
        print(f"r={r:.6g} gamma={res.gamma_star:.9g} binding={res.binding} "
              f"lps={res.counters.get('lps_solved', 0)}")
    return EXIT_OK


def cmd_train_estimator(args):
    system = _system(args)
    net = _lyapunov(args, system)
    tree = _tree(args, system, net)
    constraints, _ = _constraints(args, system.state_dim)
    r_lo, r_hi = system.reference_bounds
    from .geometry import Polytope
    r_domain = Polytope.box([r_lo], [r_hi])

    def oracle(r):
        return capi.max_admissible_level(tree, constraints, np.atleast_1d(r),
                                         system.emap).gamma_star

    cfg = est_mod.EstimatorConfig(
        n_pretrain=args.n_pretrain, max_iters=args.max_iters,
        learning_rate=args.learning_rate, seed=args.seed,
        safety_margin=args.margin, hidden=tuple(args.hidden))
    t0 = time.perf_counter()
    trained = est_mod.train_estimator(oracle, constraints, net, system.emap,
                                      system.domain(), r_domain, cfg, v_tree=tree)
    train_seconds = time.perf_counter() - t0
    meta = {
        "verified": trained.verified,
        "iterations": trained.iterations,
        "dataset_size": trained.dataset_size,
        "train_seconds": train_seconds,
        "system": system.name,
        **trained.metadata,
        "header": _inputs_header(args, constraints=args.constraints),
    }
    cio.save_network(trained.network, args.out, metadata=meta)
    print(f"estimator verified={trained.verified} iterations={trained.iterations} "
          f"dataset={trained.dataset_size} train={train_seconds:.1f}s -> {args.out}")
    return EXIT_OK


def _load_estimator(args, system):
    if getattr(args, "estimator", None):
        net = cio.load_network(args.estimator)
        meta = net.metadata
        return est_mod.EstimatorNet(net, verified=bool(meta.get("verified", False)),
                                    iterations=int(meta.get("iterations", 0)),
                                    dataset_size=int(meta.get("dataset_size", 0)),
                                    metadata=dict(meta))
    if system.name == "cartpole":
        return fixtures.cartpole_estimator()
    raise CliError("validation error: no estimator given and no shipped fixture "
                   f"for {system.name}")


def cmd_verify(args):
    system = _system(args)
    net = _lyapunov(args, system)
    tree = _tree(args, system, net)
    constraints, _ = _constraints(args, system.state_dim)
    estimator = _load_estimator(args, system)
    r_lo, r_hi = system.reference_bounds
    from .geometry import Polytope
    r_domain = Polytope.box([r_lo], [r_hi])
    res = est_mod.verify_estimator(net, system.emap, estimator, constraints,
                                   system.domain(), r_domain, v_tree=tree)
    doc = {
        "header": _inputs_header(args, constraints=args.constraints,
                                 estimator=getattr(args, "estimator", None)),
        "verified": res.verified,
        "opt_value": res.opt_value,
        "witness_state": None if res.witness_state is None else res.witness_state.tolist(),
        "witness_reference": (None if res.witness_reference is None
                              else res.witness_reference.tolist()),
        "triples_explored": res.triples_explored,
        "lps_solved": res.lps_solved,
        "wall_seconds": res.wall_seconds,
    }
    if args.out:
        with open(args.out, "w") as f:
            json.dump(doc, f, indent=1)
    print(f"verified={res.verified} opt={res.opt_value:.3e} "
          f"triples={res.triples_explored} lps={res.lps_solved}")
    return EXIT_OK


def cmd_simulate_erg(args):
    system = _system(args)
    net = _lyapunov(args, system)
    constraints, _ = _constraints(args, system.state_dim)
    r_lo, r_hi = system.reference_bounds
    cfg = erg.ErgConfig(eta=args.eta, dt=system.tau, horizon=args.horizon,
                        r_bounds=(r_lo, r_hi))
    if args.level_source == "exact":
        tree = _tree(args, system, net)
        source = erg.exact_level_source(tree, constraints, system.emap, net)
    else:
        estimator = _load_estimator(args, system)
        source = erg.estimator_level_source(estimator, net, system.emap)
    x0 = np.array([float(v) for v in args.x0.split(",")])
    if x0.shape != (system.state_dim,):
        raise CliError(f"validation error: x0 needs {system.state_dim} components")

    if args.no_governor:
        # baseline: apply the desired reference immediately, log violations
        source_fixed = source
        traj = erg.simulate_erg(system, system.policy, net, system.emap,
                                source_fixed, constraints, x0, args.r, cfg,
                                v0=args.r, enforce_constraints=False)
    else:
        traj = erg.simulate_erg(system, system.policy, net, system.emap,
                                source, constraints, x0, args.r, cfg,
                                v0=args.v0, enforce_constraints=not args.no_enforce)

    columns = (["t"] + [f"x{i}" for i in range(system.state_dim)]
               + ["u", "v", "Delta", "V", "Gamma"]
               + [f"c_{name}" for name in traj.constraint_names])
    rows = []
    for k in range(len(traj)):
        rows.append([traj.t[k]] + list(traj.x[k]) + [traj.u[k], traj.v[k],
                    traj.delta[k], traj.lyapunov[k], traj.gamma[k]]
                    + list(traj.constraint_values[k]))
    header = _inputs_header(args, constraints=args.constraints)
    write_csv(args.out, columns, rows, header=header)
    worst = float(traj.constraint_values.max()) if len(traj) else float("nan")
    print(f"simulated {len(traj)} steps; final v={traj.v[-1]:.6g} "
          f"worst constraint value={worst:.3e} -> {args.out}")
    return EXIT_OK


def cmd_bench(args):
    system = _system(args)
    net = _lyapunov(args, system)
    t0 = time.perf_counter()
    tree = build_partition_tree(net, system.domain())
    build_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    annotate_lower_bounds(tree)
    annotate_s = time.perf_counter() - t0

    bounds = np.linspace(0.05, 1.0, args.sweep_points)
    if system.name == "pendulum":
        coords = [0, 1]
    else:
        coords = [0, 1, 2]
    cons_list = []
    for bound in bounds:
        for coord in coords:
            lower = [None] * system.state_dim
            upper = [None] * system.state_dim
            lower[coord] = -float(bound)
            upper[coord] = float(bound)
            cons_list.append(capi.box_constraints(lower, upper))
    r = np.zeros(system.reference_dim)

    def time_queries(**opts):
        for cons in cons_list[: min(5, len(cons_list))]:
            capi.max_admissible_level(tree, cons, r, system.emap, **opts)
        times = []
        reps = max(1, args.repeats // len(cons_list))
        for _ in range(max(reps, 1)):
            for cons in cons_list:
                t1 = time.perf_counter()
                capi.max_admissible_level(tree, cons, r, system.emap, **opts)
                times.append(time.perf_counter() - t1)
        return np.mean(times) * 1e3, np.max(times) * 1e3

    wp_mean, wp_max = time_queries(use_plane_pruning=True, use_bound_pruning=True)
    wop_mean, wop_max = time_queries(use_plane_pruning=False,
                                     use_bound_pruning=False, prefilter=False)

    rows = [
        ["tree_build_s", build_s + annotate_s, ""],
        ["n_partitions", tree.n_leaves, ""],
        ["gamma_wp_ms", wp_mean, wp_max],
        ["gamma_wop_ms", wop_mean, wop_max],
    ]
    est = None
    try:
        est = _load_estimator(args, system)
    except (CliError, FileNotFoundError):
        pass
    if est is not None:
        rr = np.linspace(system.reference_bounds[0], system.reference_bounds[1], 100)
        for v in rr[:10]:
            est.level(np.array([v]))
        times = []
        for _ in range(max(args.repeats // len(rr), 1)):
            for v in rr:
                t1 = time.perf_counter()
                est.level(np.array([v]))
                times.append(time.perf_counter() - t1)
        rows.append(["estimator_train_s", est.metadata.get("train_seconds", ""), ""])
        rows.append(["estimator_infer_us", np.mean(times) * 1e6, np.max(times) * 1e6])

    header = _inputs_header(args)
    if args.out:
        write_csv(args.out, ["metric", "mean", "max"], rows, header=header)
    for row in rows:
        print(f"{row[0]}: {row[1]}" + (f" (max {row[2]})" if row[2] != "" else ""))
    return EXIT_OK


def cmd_check_lyapunov(args):
    system = _system(args)
    net = _lyapunov(args, system)
    rep = check_lyapunov(net, system.emap, system, n_samples=args.samples,
                         seed=args.seed)
    doc = {
        "header": _inputs_header(args, weights=getattr(args, "weights", None)),
        "samples": rep.samples,
        "positivity_violations": rep.positivity_violations,
        "decrease_violations": rep.decrease_violations,
        "worst_positivity": rep.worst_positivity,
        "worst_decrease": rep.worst_decrease,
        "origin_error": rep.origin_error,
        "clean": rep.clean,
    }
    if args.out:
        with open(args.out, "w") as f:
            json.dump(doc, f, indent=1)
    print(f"samples={rep.samples} positivity_violations={rep.positivity_violations} "
          f"decrease_violations={rep.decrease_violations} clean={rep.clean}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="capiset",
                description="CAPI sets from PWA neural Lyapunov functions")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, weights=True):
        sp.add_argument("--system", required=True, choices=sorted(SYSTEMS))
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--workers", type=int, default=0,
                        help="parallel query fan-out (0 = all cores)")
        if weights:
            sp.add_argument("--weights",
                            help="Lyapunov weight JSON (default: shipped fixture)")

    sp = sub.add_parser("build-tree", help="enumerate linear regions, save the tree")
    common(sp)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_build_tree)

    sp = sub.add_parser("gamma", help="maximal admissible level for references")
    common(sp)
    sp.add_argument("--tree", help="cached tree JSON (skips rebuild)")
    sp.add_argument("--constraints", required=True)
    sp.add_argument("--r", type=float)
    sp.add_argument("--r-sweep", nargs=3, metavar=("LO", "HI", "N"))
    sp.add_argument("--no-plane-pruning", action="store_true")
    sp.add_argument("--no-bound-pruning", action="store_true")
    sp.add_argument("--no-prefilter", action="store_true")
    sp.add_argument("--convex", action="store_true",
                    help="use the single-LP facet path on the convex_polytope entry")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gamma)

    sp = sub.add_parser("train-estimator", help="CEGIS-train the level estimator")
    common(sp)
    sp.add_argument("--tree")
    sp.add_argument("--constraints", required=True)
    sp.add_argument("--n-pretrain", type=int, default=200)
    sp.add_argument("--max-iters", type=int, default=50)
    sp.add_argument("--learning-rate", type=float, default=5e-3)
    sp.add_argument("--margin", type=float, default=0.02)
    sp.add_argument("--hidden", type=int, nargs="+", default=[8, 4])
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train_estimator)

    sp = sub.add_parser("verify", help="exact verification of an estimator")
    common(sp)
    sp.add_argument("--tree")
    sp.add_argument("--constraints", required=True)
    sp.add_argument("--estimator",
                    help="estimator weight JSON (default: shipped fixture)")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate-erg", help="reference-governor simulation")
    common(sp)
    sp.add_argument("--tree")
    sp.add_argument("--constraints", required=True)
    sp.add_argument("--estimator")
    sp.add_argument("--level-source", choices=["estimator", "exact"],
                    default="estimator")
    sp.add_argument("--x0", required=True, help="comma-separated initial state")
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--v0", type=float)
    sp.add_argument("--eta", type=float, default=2.0)
    sp.add_argument("--horizon", type=int, default=2000)
    sp.add_argument("--no-governor", action="store_true",
                    help="baseline: jump the applied reference to r at t=0")
    sp.add_argument("--no-enforce", action="store_true",
                    help="log constraint violations instead of aborting")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate_erg)

    sp = sub.add_parser("bench", help="Table-style timing benchmark")
    common(sp)
    sp.add_argument("--estimator")
    sp.add_argument("--sweep-points", type=int, default=20)
    sp.add_argument("--repeats", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("check-lyapunov", help="sampled Lyapunov-condition report")
    common(sp)
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_check_lyapunov)

    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CliError as err:
        print(str(err), file=sys.stderr)
        return EXIT_VALIDATION
    except cio.SchemaError as err:
        print(f"schema error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as err:
        print(f"file error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, capi.InfeasibleReference, est_mod.Unverified) as err:
        print(f"validation error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
