"""Acceptance criteria at their stated sizes and tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the
terminal summary.  Criteria 3 to 9 and 12 share one run of the default
verification suite.
"""

import numpy as np
import pytest

from mfhawkes import SeedPolicy, TimeGrid, builtin_model, solve_limit, two_sample_ks
from mfhawkes.config import REGIMES, load_config
from mfhawkes.fluctuation import compute_fluctuations
from mfhawkes.harness import closed_form_errors, emit_regime_panels, run_verification_suite
from mfhawkes.limit import solve_limit_multiclass
from mfhawkes.model import MultiClassSpec, erlang_kernel, sigmoid_rate, zero_kernel
from mfhawkes.simulate import simulate_ensemble
from mfhawkes.stats import variance_and_se

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def default_cfg():
    return load_config()


@pytest.fixture(scope="module")
def suite(default_cfg, tmp_path_factory):
    rep = run_verification_suite(default_cfg, threads=4)
    out = tmp_path_factory.mktemp("verify_threads4")
    rep.write(out)
    return rep, out


def final(rep, check):
    """Records of ``check`` from the attempt that decided the suite."""
    recs = [r for r in rep.records if r.check == check and r.status != "skip"]
    last = max(r.attempt for r in recs)
    return [r for r in recs if r.attempt == last]


def summary(recs):
    return "; ".join(f"{r.name} {r.status} statistic={r.statistic:.4g} threshold={r.threshold:.4g}"
                     for r in recs)


def test_criterion_01_poisson_clt(announce):
    spec = builtin_model("constant_rate", (1.0,))
    grid = TimeGrid(5.0, 100)
    limit = solve_limit(spec, grid)
    sims = simulate_ensemble(spec, 400, grid, SeedPolicy(101), 2000)
    Y = np.array([compute_fluctuations(s, limit, spec).Y.values[-1] for s in sims])
    ref = np.random.default_rng(101).normal(0.0, np.sqrt(5.0), 5000)
    stat, p = two_sample_ks(Y, ref)
    v, se = variance_and_se(Y)
    ok = p >= 0.01 and abs(v - 5.0) <= 4 * se
    assert announce(1, "Poisson CLT", ok,
                    f"KS p={p:.4f} (alpha 0.01), Var Y(T)={v:.4f} target 5 +- {4 * se:.4f}")


def test_criterion_02_resolvent_closed_forms(announce):
    errs = closed_form_errors(1.0, 2000, 1.3)
    worst = max(errs.values())
    detail = ", ".join(f"{a}/{b}={e:.2e}" for (a, b), e in errs.items())
    assert announce(2, "resolvent closed forms", worst < 1e-6, detail + " (tol 1e-6)")


@pytest.mark.parametrize("k, title, checks", [
    (3, "cross-route limit sampling", ["limit_cross_route"]),
    (4, "LLN decay", ["lln_decay"]),
    (6, "intensity-fluctuation CLT", ["clt_ks_sigma"]),
    (7, "remainder decay", ["remainder_decay"]),
    (8, "compensator bound and second moment", ["compensator_bound", "second_moment_uniform"]),
    (9, "Cox coupling bound and decay", ["cox_coupling_bound", "cox_coupling_decay"]),
])
def test_suite_criteria(suite, announce, k, title, checks):
    rep, _ = suite
    recs = [r for c in checks for r in final(rep, c)]
    ok = bool(recs) and all(r.status == "pass" for r in recs)
    assert announce(k, title, ok, summary(recs))


def test_criterion_05_clt_ks(suite, announce):
    rep, _ = suite
    recs = final(rep, "clt_ks_Y")
    fails = sum(r.status == "fail" for r in recs)
    ok = len(recs) == 3 and fails <= 1
    assert announce(5, "CLT KS on Y", ok,
                    f"{fails} of {len(recs)} times fail (attempts={rep.attempts}); "
                    + summary(recs))


def test_criterion_10_regimes(default_cfg, tmp_path, announce):
    out = emit_regime_panels(default_cfg, tmp_path, threads=4)
    stable = out["stable"]
    ok = set(out) == set(REGIMES) and stable["all_in_band"]
    detail = ", ".join(f"{n} ratio in [{s['ratio_min']:.3f}, {s['ratio_max']:.3f}]"
                       + ("" if s["band_expected"] else " (recorded only)")
                       for n, s in out.items())
    for f in ("regimes.csv", "regimes_variance.csv", "regimes.txt"):
        ok &= (tmp_path / f).exists()
    assert announce(10, "regime regeneration", ok, detail)


def test_criterion_11_multiclass(suite, announce):
    rep, _ = suite
    (red,) = final(rep, "multiclass_reduction")
    k = erlang_kernel(2.0)
    spec = MultiClassSpec([sigmoid_rate(2.0), sigmoid_rate(3.0)],
                          [[k, zero_kernel()], [zero_kernel(), k]], (0.5, 0.5))
    grid = TimeGrid(5.0, 250)
    lims = solve_limit_multiclass(spec, grid)
    R = 2000
    sims = simulate_ensemble(spec, 100, grid, SeedPolicy(111), R)
    Y = np.array([[compute_fluctuations(s, lims[c], spec, cls=c).Y.values[-1] for c in (0, 1)]
                  for s in sims])
    a, b = Y[:, 0] - Y[:, 0].mean(), Y[:, 1] - Y[:, 1].mean()
    prod = a * b
    z = prod.mean() / (prod.std(ddof=1) / np.sqrt(R))
    corr = prod.mean() / (a.std() * b.std())
    ok = red.status == "pass" and abs(z) <= 3
    assert announce(11, "multi-class reduction", ok,
                    f"K=1 {red.detail}; K=2 corr(Y_1(T), Y_2(T))={corr:.4f} z={z:.2f} (|z|<=3)")


def test_criterion_12_determinism(default_cfg, suite, tmp_path, announce):
    rep4, out4 = suite
    rep1 = run_verification_suite(default_cfg, threads=1)
    rep1.write(tmp_path)
    same = all((tmp_path / f).read_bytes() == (out4 / f).read_bytes()
               for f in ("report.csv", "report.txt"))
    assert announce(12, "determinism", same and rep1.passed == rep4.passed,
                    "report.csv and report.txt byte-identical at threads 1 and 4"
                    if same else "reports differ between threads 1 and 4")
