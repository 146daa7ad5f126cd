"""Command-line entry point ``mfhawkes``.

Exit codes: 0 success, 1 a verification check failed, 2 bad configuration
or arguments.
"""

import argparse
import os
import sys
import time

import numpy as np

from . import io
from .config import ConfigError, load_config
from .cox import build_cox, compare_cox_vs_hawkes
from .fluctuation import ROUTES, compute_fluctuations, sample_limit_batch
from .harness import emit_regime_panels, run_verification_suite
from .limit import solve_limit
from .model import GridFunction, ModelSpec, TimeGrid, fixed_points
from .seeding import SeedPolicy
from .simulate import SimulationError, simulate_ensemble
from .volterra import build_kappa, build_resolvent_ieq, build_resolvent_neumann

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _common(p):
    p.add_argument("--config", help="YAML experiment configuration")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for replicates")
    p.add_argument("--format", choices=["csv"], default="csv")


def build_parser():
    ap = argparse.ArgumentParser(prog="mfhawkes", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-limit", help="deterministic limit m, lambda, x")
    _common(p)

    p = sub.add_parser("resolvent", help="kernel and resolvent tables")
    _common(p)
    p.add_argument("--method", choices=["integral_equation", "neumann", "both"], default="both")
    p.add_argument("--stride", type=int, default=10, help="write every stride-th grid point")

    p = sub.add_parser("simulate", help="network replicates")
    _common(p)
    p.add_argument("--N", type=int, help="network size (default: first ensemble N)")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--mode", choices=["thinning", "euler"], default="thinning")

    p = sub.add_parser("fluctuations", help="finite-N fluctuations and limit samples")
    _common(p)
    p.add_argument("--N", type=int)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--draws", type=int, help="limit draws (default: replicates)")
    p.add_argument("--route", choices=ROUTES, default="resolvent")
    p.add_argument("--stride", type=int, default=10)

    p = sub.add_parser("cox-approx", help="Cox approximation against the network")
    _common(p)
    p.add_argument("--N", type=int, default=50)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--path-files", type=int, default=5,
                   help="replicates for which per-replicate path files are written")

    p = sub.add_parser("verify", help="run the verification suite")
    _common(p)

    p = sub.add_parser("regimes", help="panel data for the three sigmoid/Erlang regimes")
    _common(p)
    p.add_argument("--names", nargs="+", help="subset of stable, critical, bistable")
    p.add_argument("--replicates", type=int)
    p.add_argument("--N", type=int)
    return ap


def _setup(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    out = args.out or cfg.output.get("directory", "out")
    os.makedirs(out, exist_ok=True)
    grid = TimeGrid(float(cfg.grid["T"]), int(cfg.grid["n_steps"]))
    return cfg, out, grid


def _meta(cfg, args, **extra):
    return {"command": args.command, "master_seed": cfg.master_seed,
            "model": repr(cfg.model), "T": float(cfg.grid["T"]),
            "n_steps": int(cfg.grid["n_steps"]), **extra}


def _scalar(spec):
    if not isinstance(spec, ModelSpec):
        raise ConfigError("this command needs a single-population model")
    return spec


def cmd_solve_limit(args):
    cfg, out, grid = _setup(args)
    spec = _scalar(cfg.build_model())
    L = solve_limit(spec, grid)
    io.write_columns(f"{out}/limit.csv", {"t": grid.t, "m": L.m.values, "lambda": L.lam.values,
                                          "x": L.x.values})
    meta = _meta(cfg, args)
    try:
        for j, fp in enumerate(fixed_points(spec)):
            meta[f"fixed_point.{j}"] = f"x={fp.x!r} slope={fp.slope!r} stable={fp.stable}"
    except ValueError as exc:
        meta["fixed_points"] = f"n/a ({exc})"
    io.write_sidecar(f"{out}/limit_meta.txt", meta)
    print(f"wrote {out}/limit.csv")
    return EXIT_OK


def cmd_resolvent(args):
    cfg, out, grid = _setup(args)
    spec = _scalar(cfg.build_model())
    L = solve_limit(spec, grid)
    kap = build_kappa(L, spec, grid)
    tables = {}
    if args.method in ("integral_equation", "both"):
        tables["integral_equation"] = build_resolvent_ieq(kap)
    if args.method in ("neumann", "both"):
        tables["neumann"] = build_resolvent_neumann(kap)
    idx = np.arange(0, len(grid), max(1, args.stride))
    rows = []
    for i in idx:
        for j in idx[idx <= i]:
            rows.append([grid.t[i], grid.t[j], kap.table[i, j],
                         *[tab.table[i, j] for tab in tables.values()]])
    io.write_csv(f"{out}/resolvent.csv", ["t", "s", "kappa", *[f"K_{m}" for m in tables]], rows)
    meta = _meta(cfg, args, M_T=kap.M_T, K_bound=next(iter(tables.values())).bound,
                 max_abs_kappa=float(np.max(np.abs(kap.table))))
    for m, tab in tables.items():
        meta[f"max_abs_K.{m}"] = float(np.max(np.abs(tab.table)))
        if tab.order is not None:
            meta[f"neumann_order"] = tab.order
            meta[f"neumann_tail_bound"] = tab.tail_bound
    if len(tables) == 2:
        a, b = tables.values()
        meta["cross_method_gap"] = float(np.max(np.abs(a.table - b.table)))
    io.write_sidecar(f"{out}/resolvent_meta.txt", meta)
    print(f"wrote {out}/resolvent.csv")
    return EXIT_OK


def cmd_simulate(args):
    cfg, out, grid = _setup(args)
    spec = cfg.build_model()
    N = args.N or int(cfg.ensemble["N"][0])
    seed = SeedPolicy(cfg.master_seed)
    t0 = time.perf_counter()
    sims = simulate_ensemble(spec, N, grid, seed, args.replicates, mode=args.mode,
                             threads=args.threads)
    meta = _meta(cfg, args, N=N, mode=args.mode, replicates=args.replicates)
    io.write_events(f"{out}/events.csv", [sim.events for sim in sims])
    for r, sim in enumerate(sims):
        cols = {"t": grid.t}
        for k in range(sim.K):
            sfx = "" if sim.K == 1 else f"_{k}"
            cols[f"lambda{sfx}"] = sim.lambda_paths[k]
            cols[f"Lambda{sfx}"] = sim.Lambda_paths[k]
        io.write_columns(f"{out}/lambda_r{r}.csv", cols)
        for key, v in sim.stats.items():
            meta[f"replicate.{r}.{key}"] = v
    io.write_sidecar(f"{out}/simulate_meta.txt", meta)
    io.write_sidecar(f"{out}/simulate_runtime.txt",
                     {"runtime": time.perf_counter() - t0, "threads": args.threads})
    print(f"wrote {len(sims)} replicate(s) to {out}")
    return EXIT_OK


def _aggregate_rows(name, arr, grid, idx):
    q = np.quantile(arr[:, idx], [0.05, 0.5, 0.95], axis=0)
    for j, i in enumerate(idx):
        col = arr[:, i]
        yield (name, grid.t[i], col.mean(), col.var(ddof=1) if col.size > 1 else 0.0,
               q[0, j], q[1, j], q[2, j])


def cmd_fluctuations(args):
    cfg, out, grid = _setup(args)
    spec = _scalar(cfg.build_model())
    N = args.N or int(cfg.ensemble["N_clt"])
    L = solve_limit(spec, grid)
    seed = SeedPolicy(cfg.master_seed)
    sims = simulate_ensemble(spec, N, grid, seed, args.replicates, threads=args.threads)
    fields = ("Y", "X", "Mbar", "A", "r", "intensity_fluct")
    stack = {f: [] for f in fields}
    for r, sim in enumerate(sims):
        fp = compute_fluctuations(sim, L, spec)
        cols = {"t": grid.t, **{f: getattr(fp, f).values for f in fields}}
        io.write_columns(f"{out}/fluct_r{r}.csv", cols)
        for f in fields:
            stack[f].append(cols[f])
    kap = build_kappa(L, spec, grid)
    K = build_resolvent_ieq(kap) if args.route == "resolvent" else None
    draws = sample_limit_batch(L, spec, K, grid, seed, args.draws or args.replicates,
                               route=args.route, kappa=kap)
    lim_fields = ("W_lambda", "G_Y", "G_X", "sigma")
    for j in range(draws.G_Y.shape[0]):
        io.write_columns(f"{out}/limit_sample_r{j}.csv",
                         {"t": grid.t, **{f: getattr(draws, f)[j, 0] for f in lim_fields}})
    idx = np.arange(0, len(grid), max(1, args.stride))
    rows = []
    for f in fields:
        rows.extend(_aggregate_rows(f, np.array(stack[f]), grid, idx))
    for f in lim_fields:
        rows.extend(_aggregate_rows(f, getattr(draws, f)[:, 0], grid, idx))
    io.write_csv(f"{out}/fluctuations_stats.csv",
                 ("field", "t", "mean", "variance", "q05", "q50", "q95"), rows)
    io.write_sidecar(f"{out}/fluctuations_meta.txt",
                     _meta(cfg, args, N=N, replicates=args.replicates, route=args.route,
                           draws=draws.G_Y.shape[0]))
    print(f"wrote fluctuation files to {out}")
    return EXIT_OK


def cmd_cox(args):
    cfg, out, grid = _setup(args)
    spec = _scalar(cfg.build_model())
    L = solve_limit(spec, grid)
    seed = SeedPolicy(cfg.master_seed)
    times = grid.t[grid.index(grid.T / 2)::max(1, len(grid) // 20)]
    comp, lam_n, lam_hat = compare_cox_vs_hawkes(spec, L, args.N, grid, args.replicates, seed,
                                                 times=times, threads=args.threads,
                                                 return_paths=True)
    R = args.replicates
    kap = build_kappa(L, spec, grid)
    draws = sample_limit_batch(L, spec, None, grid, seed, min(args.path_files, R),
                               route="fixed_point", kappa=kap, start=R)
    cox = [build_cox(L, GridFunction(grid, draws.sigma[r, 0]), args.N, grid,
                     seed.for_replicate(R + r)) for r in range(draws.sigma.shape[0])]
    io.write_events(f"{out}/cox_events.csv", [c.events for c in cox])
    io.write_events(f"{out}/poisson_events.csv", [c.baseline for c in cox])
    for r, c in enumerate(cox):
        io.write_columns(f"{out}/lambda_hat_r{r}.csv",
                         {"t": grid.t, "lambda": L.lam.values, "lambda_hat": c.lambda_hat.values})
    io.write_csv(f"{out}/cox_comparison.csv", ("t", "lambda_limit", "var_hawkes", "var_cox",
                                               "ratio"), comp.rows())
    plot = []
    for i in range(len(grid)):
        t = grid.t[i]
        plot.append(("model", t, "lambda_limit", L.lam.values[i]))
        plot.append(("model", t, "var_lambda_N", lam_n[:, i].var(ddof=1)))
        plot.append(("model", t, "var_lambda_hat", lam_hat[:, i].var(ddof=1)))
        plot.append(("model", t, "mean_lambda_N", lam_n[:, i].mean()))
        plot.append(("model", t, "mean_lambda_hat", lam_hat[:, i].mean()))
    io.write_csv(f"{out}/cox_plot.csv", ("regime", "t", "statistic", "value"), plot)
    with open(f"{out}/cox_summary.txt", "w") as fh:
        fh.write(f"N: {args.N}\nreplicates: {R}\n")
        fh.write(f"variance ratio range: {io.fmt(comp.ratio.min())} .. {io.fmt(comp.ratio.max())}\n")
        fh.write(f"KS counts Hawkes vs Cox: statistic={io.fmt(comp.ks_cox[0])} "
                 f"p={io.fmt(comp.ks_cox[1])}\n")
        fh.write(f"KS counts Hawkes vs Poisson: statistic={io.fmt(comp.ks_poisson[0])} "
                 f"p={io.fmt(comp.ks_poisson[1])}\n")
        fh.write(f"clipped fraction: mean={io.fmt(comp.clipped_fraction_mean)} "
                 f"max={io.fmt(comp.clipped_fraction_max)}\n")
        fh.write(f"mean coupling distance Cox vs Poisson: {io.fmt(comp.coupling_mean)}; "
                 f"bound T/sqrt(N) E||sigma||: "
                 f"{io.fmt(grid.T / np.sqrt(args.N) * comp.sigma_sup_mean)}\n")
    io.write_sidecar(f"{out}/cox_meta.txt", _meta(cfg, args, N=args.N, replicates=R))
    print(f"wrote Cox comparison to {out}")
    return EXIT_OK


def cmd_verify(args):
    cfg, out, grid = _setup(args)
    rep = run_verification_suite(cfg, threads=args.threads,
                                 log=lambda s: print(s, file=sys.stderr, flush=True))
    rep.write(out)
    print("\n".join(rep.summary_lines()))
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_regimes(args):
    cfg, out, grid = _setup(args)
    if args.replicates is not None or args.N is not None:
        d = cfg.to_dict()
        if args.replicates is not None:
            d["regimes"]["replicates"] = args.replicates
        if args.N is not None:
            d["regimes"]["N"] = args.N
        cfg = type(cfg).from_dict(d, fill_defaults=False)
    try:
        summary = emit_regime_panels(cfg, out, threads=args.threads, names=args.names)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for name, s in summary.items():
        print(f"{name}: variance ratio {s['ratio_min']:.3f} .. {s['ratio_max']:.3f}"
              + ("" if s["band_expected"] else " (outside-band behaviour expected)"))
    return EXIT_OK


COMMANDS = {
    "solve-limit": cmd_solve_limit,
    "resolvent": cmd_resolvent,
    "simulate": cmd_simulate,
    "fluctuations": cmd_fluctuations,
    "cox-approx": cmd_cox,
    "verify": cmd_verify,
    "regimes": cmd_regimes,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
