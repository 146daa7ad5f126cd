"""Verification suite and regime panels.

Each check produces one or more :class:`CheckRecord` rows.  Monte Carlo
checks are ``statistical``: the suite tolerates ``max_failures`` of them
and otherwise repeats them once under a fresh seed.  ``deterministic``
checks must always pass.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import io
from .config import CHECKS, REGIMES, ExperimentConfig
from .cox import build_cox, compare_cox_vs_hawkes
from .fluctuation import (
    compute_fluctuations,
    coupling_distance,
    lln_distance,
    sample_limit,
    sample_limit_batch,
    sample_limit_multiclass,
)
from .limit import solve_limit, solve_limit_multiclass
from .model import GridFunction, ModelSpec, TimeGrid, builtin_model
from .seeding import SeedPolicy, derive_seed
from .simulate import simulate_ensemble, simulate_hawkes, simulate_hawkes_multiclass
from .stats import loglog_slope, mean_and_se, two_sample_ks
from .volterra import (
    build_kappa,
    build_resolvent,
    build_resolvent_ieq,
    build_resolvent_neumann,
    kernel_table,
)

__all__ = [
    "CheckRecord",
    "TestReport",
    "run_verification_suite",
    "emit_regime_panels",
    "closed_form_errors",
    "ANCHORS",
]

PASS, FAIL, SKIP = "pass", "fail", "skip"

# decay metrics at or below this size are rounding noise, not Monte Carlo signal
ROUNDOFF_FLOOR = 1e-9

ANCHORS = {
    "lln_decay": "law of large numbers for the empirical spike count",
    "poisson_coupling_decay": "pathwise coupling of the network with iid Poisson processes",
    "clt_ks_Y": "functional CLT for the spike-count fluctuation",
    "clt_ks_Y_sup": "functional CLT for the spike-count fluctuation (running supremum)",
    "clt_ks_sigma": "CLT for the intensity fluctuation",
    "remainder_decay": "vanishing linearisation remainder",
    "compensator_bound": "Gronwall bound on the compensator",
    "second_moment_uniform": "uniform second-moment bound on the intensity-argument fluctuation",
    "martingale_mean": "martingale part of the Doob-Meyer split",
    "cox_coupling_bound": "coupling bound for the Cox approximation",
    "cox_coupling_decay": "coupling bound for the Cox approximation (rate)",
    "resolvent_closed_forms": "resolvent as Neumann series of iterated kernels",
    "resolvent_cross_method": "resolvent as Neumann series of iterated kernels",
    "limit_cross_route": "uniqueness for the stochastic Volterra equation",
    "multiclass_reduction": "multi-class system with one class",
}

# sub-seed tags
_TAG_DECAY, _TAG_CLT, _TAG_COX, _TAG_ROUTE, _TAG_MULTI, _TAG_REGIME, _TAG_RERUN = range(1, 8)


@dataclass
class CheckRecord:
    name: str
    check: str
    statistic: float
    threshold: float
    status: str
    kind: str
    detail: str = ""
    attempt: int = 1
    runtime: float = 0.0

    @property
    def anchor(self):
        return ANCHORS[self.check]


@dataclass
class TestReport:
    records: list
    passed: bool
    attempts: int
    statistical_failures: int
    seed: int
    meta: dict = field(default_factory=dict)

    HEADER = ("name", "check", "anchor", "kind", "statistic", "threshold", "status", "attempt",
              "detail")

    def rows(self):
        for r in self.records:
            yield (r.name, r.check, r.anchor, r.kind, r.statistic, r.threshold, r.status,
                   r.attempt, r.detail)

    def summary_lines(self):
        lines = [f"{r.status.upper():4s} {r.name}: statistic={io.fmt(r.statistic)} "
                 f"threshold={io.fmt(r.threshold)} {r.detail}".rstrip() for r in self.records]
        n = {s: sum(r.status == s for r in self.records) for s in (PASS, FAIL, SKIP)}
        lines.append(
            f"suite: {'PASS' if self.passed else 'FAIL'} ({n[PASS]} passed, {n[FAIL]} failed, "
            f"{n[SKIP]} skipped; attempts={self.attempts}, "
            f"statistical failures in final attempt={self.statistical_failures}, "
            f"master_seed={self.seed})"
        )
        return lines

    def write(self, outdir, stem="report"):
        """``report.csv`` and ``report.txt`` are deterministic; timings go to a sidecar."""
        csv_path = io.write_csv(f"{outdir}/{stem}.csv", self.HEADER, self.rows())
        with open(f"{outdir}/{stem}.txt", "w") as fh:
            fh.write("\n".join(self.summary_lines()) + "\n")
        io.write_sidecar(f"{outdir}/{stem}_runtime.txt",
                         {**{f"runtime.{r.name}.attempt{r.attempt}": r.runtime
                             for r in self.records}, **self.meta})
        return csv_path


# ---------------------------------------------------------------------------
# shared data


class _Context:
    """Lazily built ensembles shared by several checks."""

    def __init__(self, cfg: ExperimentConfig, seed, threads):
        self.cfg = cfg
        self.seed = int(seed)
        self.threads = threads
        self.spec = cfg.build_model()
        self.grid = TimeGrid(float(cfg.grid["T"]), int(cfg.grid["n_steps"]))
        self._cache = {}

    def get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def scalar(self):
        return isinstance(self.spec, ModelSpec)

    @property
    def limit(self):
        return self.get("limit", lambda: solve_limit(self.spec, self.grid))

    @property
    def kappa(self):
        return self.get("kappa", lambda: build_kappa(self.limit, self.spec, self.grid))

    @property
    def resolvent(self):
        return self.get("resolvent", lambda: build_resolvent(self.kappa))

    def decay_metrics(self):
        return self.get("decay", self._decay)

    def _decay(self):
        out = {}
        seed = SeedPolicy(derive_seed(self.seed, _TAG_DECAY))
        R = int(self.cfg.ensemble["replicates"])
        for N in self.cfg.ensemble["N"]:
            ens = simulate_ensemble(self.spec, N, self.grid, seed, R, threads=self.threads,
                                    limit=self.limit)
            rows = {k: [] for k in ("lln", "coupling", "r", "Lambda_T", "supX2", "Mbar_T")}
            for sim, pois in ens:
                fp = compute_fluctuations(sim, self.limit, self.spec)
                rows["lln"].append(lln_distance(sim.events, self.limit))
                rows["coupling"].append(coupling_distance(sim.events, pois).mean())
                rows["r"].append(fp.r.sup_norm())
                rows["Lambda_T"].append(sim.compensator[0, -1])
                rows["supX2"].append(fp.X.sup_norm() ** 2)
                rows["Mbar_T"].append(fp.Mbar.values[-1])
            out[int(N)] = {k: np.asarray(v) for k, v in rows.items()}
        return out

    def clt_data(self):
        return self.get("clt", self._clt)

    def _clt(self):
        seed = SeedPolicy(derive_seed(self.seed, _TAG_CLT))
        N = int(self.cfg.ensemble["N_clt"])
        R = int(self.cfg.ensemble["replicates_clt"])
        ens = simulate_ensemble(self.spec, N, self.grid, seed, R, threads=self.threads)
        Y = np.empty((R, len(self.grid)))
        fl = np.empty((R, len(self.grid)))
        for j, sim in enumerate(ens):
            fp = compute_fluctuations(sim, self.limit, self.spec)
            Y[j] = fp.Y.values
            fl[j] = fp.intensity_fluct.values
        draws = sample_limit_batch(self.limit, self.spec, self.resolvent, self.grid, seed,
                                   int(self.cfg.ensemble["limit_draws"]))
        return Y, fl, draws.G_Y[:, 0], draws.sigma[:, 0]


# ---------------------------------------------------------------------------
# checks


def _slope_record(name, Ns, values, band, detail_prefix):
    detail = f"{detail_prefix} means=" + ";".join(io.fmt(v) for v in values)
    detail += f" band=[{io.fmt(band[0])},{io.fmt(band[1])}]"
    if all(abs(v) <= ROUNDOFF_FLOOR for v in values):
        # degenerate models (f constant) couple exactly; nothing left to decay
        return CheckRecord(name, name, float("-inf"), band[1], PASS, "statistical",
                           detail + " zero up to roundoff")
    fit = loglog_slope(Ns, values)
    ok = fit.within(*band)
    return CheckRecord(name, name, fit.slope, band[1], PASS if ok else FAIL, "statistical",
                       detail)


def _check_lln(ctx):
    d = ctx.decay_metrics()
    Ns = sorted(d)
    return [_slope_record("lln_decay", Ns, [d[N]["lln"].mean() for N in Ns],
                          ctx.cfg.tests["slope_band"], "sup|mean count - m|")]


def _check_poisson_coupling(ctx):
    d = ctx.decay_metrics()
    Ns = sorted(d)
    return [_slope_record("poisson_coupling_decay", Ns, [d[N]["coupling"].mean() for N in Ns],
                          ctx.cfg.tests["slope_band"], "sup|Z_i - Zbar_i|")]


def _check_remainder(ctx):
    d = ctx.decay_metrics()
    Ns = sorted(d)
    return [_slope_record("remainder_decay", Ns, [d[N]["r"].mean() for N in Ns],
                          ctx.cfg.tests["slope_band"], "sup|r|")]


def _ks_times(grid):
    return [grid.T / 4, grid.T / 2, grid.T]


def _check_clt_Y(ctx):
    Y, _, GY, _ = ctx.clt_data()
    alpha = float(ctx.cfg.tests["alpha"])
    out = []
    for t in _ks_times(ctx.grid):
        i = ctx.grid.index(t)
        stat, p = two_sample_ks(Y[:, i], GY[:, i])
        out.append(CheckRecord(f"clt_ks_Y[t={io.fmt(ctx.grid.t[i])}]", "clt_ks_Y", p, alpha,
                               PASS if p >= alpha else FAIL, "statistical",
                               f"ks_statistic={io.fmt(stat)}"))
    return out


def _check_clt_Y_sup(ctx):
    Y, _, GY, _ = ctx.clt_data()
    alpha = float(ctx.cfg.tests["alpha"])
    stat, p = two_sample_ks(np.max(np.abs(Y), axis=1), np.max(np.abs(GY), axis=1))
    return [CheckRecord("clt_ks_Y_sup", "clt_ks_Y_sup", p, alpha, PASS if p >= alpha else FAIL,
                        "statistical", f"ks_statistic={io.fmt(stat)}")]


def _check_clt_sigma(ctx):
    _, fl, _, sig = ctx.clt_data()
    alpha = float(ctx.cfg.tests["alpha"])
    stat, p = two_sample_ks(fl[:, -1], sig[:, -1])
    return [CheckRecord("clt_ks_sigma", "clt_ks_sigma", p, alpha, PASS if p >= alpha else FAIL,
                        "statistical", f"ks_statistic={io.fmt(stat)} t={io.fmt(ctx.grid.T)}")]


def compensator_bound_value(spec: ModelSpec, T):
    """``f(0) T exp(||f'|| ||h||_T T)`` for the per-unit compensator at T."""
    return float(spec.f(0.0)) * T * np.exp(spec.sup_f_prime * spec.kernel.sup_h(T) * T)


def _check_compensator(ctx):
    d = ctx.decay_metrics()
    k = float(ctx.cfg.tests["sigma_slack"])
    bound = compensator_bound_value(ctx.spec, ctx.grid.T)
    worst, ok = -np.inf, True
    for N in sorted(d):
        m, se = mean_and_se(d[N]["Lambda_T"])
        worst = max(worst, m)
        ok &= m <= bound + k * se
    return [CheckRecord("compensator_bound", "compensator_bound", worst, bound,
                        PASS if ok else FAIL, "statistical",
                        f"max over N of mean Lambda(T); slack {io.fmt(k)} SE")]


def _check_second_moment(ctx):
    d = ctx.decay_metrics()
    k = float(ctx.cfg.tests["sigma_slack"])
    Ns = sorted(d)
    m0, s0 = mean_and_se(d[Ns[0]]["supX2"])
    z = [0.0]
    for N in Ns[1:]:
        m, s = mean_and_se(d[N]["supX2"])
        z.append((m - m0) / np.hypot(s, s0))
    means = [d[N]["supX2"].mean() for N in Ns]
    return [CheckRecord("second_moment_uniform", "second_moment_uniform", max(z), k,
                        PASS if max(z) <= k else FAIL, "statistical",
                        "max z-score of mean sup|X|^2 above smallest N; means="
                        + ";".join(io.fmt(v) for v in means))]


def _check_martingale(ctx):
    d = ctx.decay_metrics()
    k = float(ctx.cfg.tests["sigma_slack"])
    z = []
    for N in sorted(d):
        m, se = mean_and_se(d[N]["Mbar_T"])
        z.append(abs(m) / se)
    return [CheckRecord("martingale_mean", "martingale_mean", max(z), k,
                        PASS if max(z) <= k else FAIL, "statistical",
                        "max |mean Mbar(T)| / SE over N")]


def _cox_metrics(ctx):
    def build():
        seed = SeedPolicy(derive_seed(ctx.seed, _TAG_COX))
        R = int(ctx.cfg.ensemble["replicates"])
        draws = sample_limit_batch(ctx.limit, ctx.spec, None, ctx.grid, seed, R,
                                   route="fixed_point", kappa=ctx.kappa)
        sig_sup = np.max(np.abs(draws.sigma[:, 0]), axis=1)
        out = {}
        for N in ctx.cfg.ensemble["N"]:
            dist = np.array([
                coupling_distance(c.events, c.baseline).mean()
                for c in (build_cox(ctx.limit, GridFunction(ctx.grid, draws.sigma[r, 0]), N,
                                    ctx.grid, seed.for_replicate(r)) for r in range(R))
            ])
            out[int(N)] = (dist, ctx.grid.T / np.sqrt(N) * sig_sup)
        return out
    return ctx.get("cox", build)


def _check_cox_bound(ctx):
    d = _cox_metrics(ctx)
    k = float(ctx.cfg.tests["coupling_slack"])
    worst, ok = -np.inf, True
    parts = []
    for N in sorted(d):
        dist, bound = d[N]
        diff = dist - bound
        m, se = mean_and_se(diff)
        worst = max(worst, m / se if se > 0 else (np.inf if m > 0 else -np.inf))
        ok &= m <= k * se
        parts.append(f"N={N}:{io.fmt(dist.mean())}<={io.fmt(bound.mean())}")
    return [CheckRecord("cox_coupling_bound", "cox_coupling_bound", worst, k,
                        PASS if ok else FAIL, "statistical",
                        "max (mean distance - bound)/SE; " + " ".join(parts))]


def _check_cox_decay(ctx):
    d = _cox_metrics(ctx)
    Ns = sorted(d)
    return [_slope_record("cox_coupling_decay", Ns, [d[N][0].mean() for N in Ns],
                          ctx.cfg.tests["slope_band"], "sup|Zhat_i - Pi_i|")]


def closed_form_errors(T=1.0, n_steps=2000, c=1.3):
    """Max errors of both resolvent builders on two kernels with known resolvents."""
    grid = TimeGrid(T, n_steps)
    t = grid.t
    out = {}
    cases = {
        "t-s": (lambda tt, ss: tt - ss, lambda d: np.sinh(d)),
        "const": (lambda tt, ss: np.full(np.broadcast(tt, ss).shape, c),
                  lambda d: c * np.exp(c * d)),
    }
    lower = np.tril(np.ones((len(t), len(t)), dtype=bool))
    for name, (kap, res) in cases.items():
        table = kernel_table(kap, grid)
        exact = np.where(lower, res(t[:, None] - t[None, :]), 0.0)
        for method, builder in (("integral_equation", build_resolvent_ieq),
                                ("neumann", build_resolvent_neumann)):
            K = builder(table).table
            out[(name, method)] = float(np.max(np.abs(np.where(lower, K, 0.0) - exact)))
    return out


def _check_closed_forms(ctx):
    tc = ctx.cfg.tests
    tol = float(tc["closed_form_tol"])
    errs = ctx.get("closed", lambda: closed_form_errors(float(tc["closed_form_T"]),
                                                        int(tc["closed_form_steps"]),
                                                        float(tc["closed_form_c"])))
    worst = max(errs.values())
    detail = " ".join(f"{k[0]}/{k[1]}={io.fmt(v)}" for k, v in errs.items())
    return [CheckRecord("resolvent_closed_forms", "resolvent_closed_forms", worst, tol,
                        PASS if worst < tol else FAIL, "deterministic", detail)]


def _check_cross_method(ctx):
    tol = float(ctx.cfg.tests["cross_method_tol"])
    a = build_resolvent_ieq(ctx.kappa).K_values
    b = build_resolvent_neumann(ctx.kappa).K_values
    gap = float(np.max(np.abs(a - b)))
    return [CheckRecord("resolvent_cross_method", "resolvent_cross_method", gap, tol,
                        PASS if gap < tol else FAIL, "deterministic",
                        "max |K_integral_equation - K_neumann| on the model kernel")]


def _check_cross_route(ctx):
    S = int(ctx.cfg.tests["cross_route_seeds"])
    tol = float(ctx.cfg.tests["cross_route_tol"])
    worst = 0.0
    for s in range(S):
        seed = SeedPolicy(derive_seed(ctx.seed, _TAG_ROUTE) + s)
        a = sample_limit(ctx.limit, ctx.spec, ctx.resolvent, ctx.grid, seed, "resolvent")
        b = sample_limit(ctx.limit, ctx.spec, None, ctx.grid, seed, "fixed_point", ctx.kappa)
        worst = max(worst, float(np.max(np.abs(a.G_Y.values - b.G_Y.values))))
    return [CheckRecord("limit_cross_route", "limit_cross_route", worst, tol,
                        PASS if worst < tol else FAIL, "deterministic",
                        f"max sup-norm gap over {S} seeds")]


def multiclass_reduction_mismatches(spec: ModelSpec, grid: TimeGrid, N, seed: SeedPolicy):
    """Names of outputs where the one-class pipeline differs bitwise from the scalar one."""
    mspec = spec.multiclass
    bad = []
    a = simulate_hawkes(spec, N, grid, seed)
    b = simulate_hawkes_multiclass(mspec, N, grid, seed)
    for name in ("times", "units"):
        if not np.array_equal(getattr(a.events, name), getattr(b.events, name)):
            bad.append(f"events.{name}")
    for name in ("lambda_paths", "u_paths", "Lambda_paths", "compensator", "u_moments"):
        if not np.array_equal(getattr(a, name), getattr(b, name)):
            bad.append(name)
    la = solve_limit(spec, grid)
    lb = solve_limit_multiclass(mspec, grid)[0]
    for name in ("m", "lam", "x"):
        if not np.array_equal(getattr(la, name).values, getattr(lb, name).values):
            bad.append(f"limit.{name}")
    fa = compute_fluctuations(a, la, spec)
    fb = compute_fluctuations(b, lb, mspec)
    for name in ("Y", "X", "Mbar", "A", "r", "intensity_fluct"):
        if not np.array_equal(getattr(fa, name).values, getattr(fb, name).values):
            bad.append(f"fluctuation.{name}")
    kap_a = build_kappa(la, spec, grid)
    kap_b = build_kappa([lb], mspec, grid)
    if not np.array_equal(kap_a.kappa, kap_b.kappa):
        bad.append("kappa")
    Ka, Kb = build_resolvent(kap_a), build_resolvent(kap_b)
    if not np.array_equal(Ka.K_values, Kb.K_values):
        bad.append("resolvent")
    for route in ("resolvent", "fixed_point"):
        sa = sample_limit(la, spec, Ka, grid, seed, route, kap_a)
        sb = sample_limit_multiclass([lb], mspec, Kb, grid, seed, route, kap_b)[0]
        for name in ("W_lambda", "G_Y", "G_X", "sigma"):
            if not np.array_equal(getattr(sa, name).values, getattr(sb, name).values):
                bad.append(f"{route}.{name}")
    return bad


def _check_multiclass(ctx):
    seed = SeedPolicy(derive_seed(ctx.seed, _TAG_MULTI))
    N = int(ctx.cfg.ensemble["N"][0])
    bad = multiclass_reduction_mismatches(ctx.spec, ctx.grid, N, seed)
    return [CheckRecord("multiclass_reduction", "multiclass_reduction", float(len(bad)), 0.0,
                        PASS if not bad else FAIL, "deterministic",
                        "mismatches: " + (",".join(bad) if bad else "none"))]


_RUNNERS = {
    "lln_decay": _check_lln,
    "poisson_coupling_decay": _check_poisson_coupling,
    "clt_ks_Y": _check_clt_Y,
    "clt_ks_Y_sup": _check_clt_Y_sup,
    "clt_ks_sigma": _check_clt_sigma,
    "remainder_decay": _check_remainder,
    "compensator_bound": _check_compensator,
    "second_moment_uniform": _check_second_moment,
    "martingale_mean": _check_martingale,
    "cox_coupling_bound": _check_cox_bound,
    "cox_coupling_decay": _check_cox_decay,
    "resolvent_closed_forms": _check_closed_forms,
    "resolvent_cross_method": _check_cross_method,
    "limit_cross_route": _check_cross_route,
    "multiclass_reduction": _check_multiclass,
}
_DETERMINISTIC = {"resolvent_closed_forms", "resolvent_cross_method", "limit_cross_route",
                  "multiclass_reduction"}
assert set(_RUNNERS) == set(CHECKS)


def _run(ctx, names, attempt, log):
    records = []
    for name in CHECKS:
        if name not in names:
            continue
        t0 = time.perf_counter()
        try:
            if not ctx.scalar:
                raise NotImplementedError("the suite runs on single-population models")
            recs = _RUNNERS[name](ctx)
        except Exception as exc:  # a failing check never aborts the suite
            kind = "deterministic" if name in _DETERMINISTIC else "statistical"
            recs = [CheckRecord(name, name, float("nan"), float("nan"), FAIL, kind,
                                f"error: {type(exc).__name__}: {exc}")]
        dt = time.perf_counter() - t0
        for r in recs:
            r.attempt = attempt
            r.runtime = dt / len(recs)
            if log:
                log(f"[attempt {attempt}] {r.status.upper():4s} {r.name} "
                    f"statistic={io.fmt(r.statistic)} threshold={io.fmt(r.threshold)}")
        records.extend(recs)
    return records


def run_verification_suite(cfg: ExperimentConfig, threads=1, log=None) -> TestReport:
    """Run the enabled checks; never raises on a failing check.

    Disabled checks are reported as skipped.  The suite passes when every
    deterministic check passes and at most ``max_failures`` statistical
    checks fail; otherwise the statistical checks are repeated once with a
    derived seed and judged again.
    """
    enabled = set(cfg.tests.get("enabled", []))
    seed = cfg.master_seed
    t0 = time.perf_counter()
    ctx = _Context(cfg, seed, threads)
    records = _run(ctx, enabled, 1, log)
    max_fail = int(cfg.tests.get("max_failures", 1))

    def tally(recs):
        det = [r for r in recs if r.kind == "deterministic" and r.status == FAIL]
        stat = [r for r in recs if r.kind == "statistical" and r.status == FAIL]
        return det, stat

    det, stat = tally(records)
    attempts = 1
    final = records
    if len(stat) > max_fail and cfg.tests.get("rerun", True):
        attempts = 2
        ctx2 = _Context(cfg, derive_seed(seed, _TAG_RERUN), threads)
        ctx2._cache.update({k: v for k, v in ctx._cache.items()
                            if k in ("limit", "kappa", "resolvent", "closed")})
        stat_names = {r.check for r in records if r.kind == "statistical"}
        rerun = _run(ctx2, stat_names, 2, log)
        final = [r for r in records if r.kind == "deterministic"] + rerun
        records = records + rerun
        det, stat = tally(final)
    skipped = [CheckRecord(n, n, float("nan"), float("nan"), SKIP,
                           "deterministic" if n in _DETERMINISTIC else "statistical",
                           "disabled in config") for n in CHECKS if n not in enabled]
    passed = not det and len(stat) <= max_fail
    meta = {"threads": threads, "total_runtime": time.perf_counter() - t0}
    return TestReport(records + skipped, passed, attempts, len(stat), seed, meta)


# ---------------------------------------------------------------------------
# regime panels


def emit_regime_panels(cfg: ExperimentConfig, outdir, threads=1, names=None, log=None):
    """Long-format panel data for the three sigmoid/Erlang regimes.

    Writes ``regimes.csv`` (regime, replicate, t, lambda_N, lambda_limit,
    lambda_hat), ``regimes_variance.csv`` with the variance ratio of the
    Cox and Hawkes intensities over the second half of the horizon, and a
    text summary.  Returns a dict with the per-regime ratios.
    """
    rc = cfg.regimes
    names = list(rc["names"] if names is None else names)
    for n in names:
        if n not in REGIMES:
            raise ValueError(f"unknown regime {n!r}; choose from {sorted(REGIMES)}")
    grid = TimeGrid(float(cfg.grid["T"]), int(cfg.grid["n_steps"]))
    N, R, stride = int(rc["N"]), int(rc["replicates"]), int(rc["stride"])
    lo, hi = (float(v) for v in rc["ratio_band"])
    keep = np.arange(0, len(grid), stride)
    if keep[-1] != len(grid) - 1:
        keep = np.append(keep, len(grid) - 1)
    times = grid.t[grid.index(grid.T / 2):]

    panel_rows, var_rows, summary = [], [], {}
    for name in names:
        gamma, beta = REGIMES[name]
        spec = builtin_model("sigmoid_erlang", (gamma, beta))
        limit = solve_limit(spec, grid)
        seed = SeedPolicy(derive_seed(cfg.master_seed, _TAG_REGIME))
        comp, lam_n, lam_hat = compare_cox_vs_hawkes(spec, limit, N, grid, R, seed, times=times,
                                                     threads=threads, return_paths=True)
        for r in range(R):
            for i in keep:
                panel_rows.append((name, r, grid.t[i], lam_n[r, i], limit.lam.values[i],
                                   lam_hat[r, i]))
        in_band = (comp.ratio >= lo) & (comp.ratio <= hi)
        expected = name != "bistable"
        for j, t in enumerate(comp.times):
            var_rows.append((name, t, comp.var_hawkes[j], comp.var_cox[j], comp.ratio[j],
                             bool(in_band[j]), expected))
        summary[name] = {
            "gamma": gamma, "beta": beta, "ratio_min": float(comp.ratio.min()),
            "ratio_max": float(comp.ratio.max()), "all_in_band": bool(in_band.all()),
            "band_expected": expected, "clipped_fraction_max": comp.clipped_fraction_max,
        }
        if log:
            log(f"{name}: ratio in [{comp.ratio.min():.3f}, {comp.ratio.max():.3f}]")

    io.write_csv(f"{outdir}/regimes.csv",
                 ("regime", "replicate", "t", "lambda_N", "lambda_limit", "lambda_hat"), panel_rows)
    io.write_csv(f"{outdir}/regimes_variance.csv",
                 ("regime", "t", "var_lambda_N", "var_lambda_hat", "ratio", "in_band",
                  "band_expected"), var_rows)
    with open(f"{outdir}/regimes.txt", "w") as fh:
        for name, s in summary.items():
            note = ("band check applies" if s["band_expected"] else
                    "second-order approximation only holds near one stable fixed point; "
                    "a ratio outside the band is expected here")
            fh.write(f"{name} (gamma={io.fmt(s['gamma'])}, beta={io.fmt(s['beta'])}, N={N}, "
                     f"replicates={R}): ratio in [{io.fmt(s['ratio_min'])}, "
                     f"{io.fmt(s['ratio_max'])}], band [{io.fmt(lo)}, {io.fmt(hi)}] "
                     f"{'met' if s['all_in_band'] else 'not met'}; "
                     f"max clipped fraction {io.fmt(s['clipped_fraction_max'])}; {note}\n")
    return summary
