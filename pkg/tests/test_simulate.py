import warnings

import numpy as np
import pytest
from scipy import integrate

from mfhawkes import (
    ModelSpec,
    MultiClassSpec,
    SeedPolicy,
    TimeGrid,
    builtin_model,
    simulate_coupled_poisson,
    simulate_ensemble,
    simulate_hawkes,
    simulate_hawkes_multiclass,
    solve_limit,
    two_sample_ks,
)
from mfhawkes.model import (
    constant_rate,
    erlang_kernel,
    expression_kernel,
    expression_rate,
    sigmoid_rate,
    zero_kernel,
)
from mfhawkes.simulate import (
    EulerTruncationWarning,
    SimulationError,
    intensity_from_events,
    thin_intensity,
)


@pytest.fixture(scope="module")
def run50(sigmoid):
    return simulate_hawkes(sigmoid, 50, TimeGrid(10.0, 1000), SeedPolicy(3))


def test_paths_are_valid(run50):
    ev = run50.events.validate()
    assert ev.times.size > 0
    assert np.unique(ev.times).size == ev.times.size
    for p in ev.per_unit():
        assert np.all(np.diff(p) > 0)


def test_intensity_rederivable_from_events(run50, sigmoid):
    lam = intensity_from_events(sigmoid, run50.events)
    assert np.max(np.abs(lam - run50.lambda_path.values)) < 1e-12


def test_compensator(run50, sigmoid):
    assert np.all(np.diff(run50.Lambda_path.values) >= 0)
    assert np.all(np.diff(run50.compensator[0]) >= 0)
    # piecewise adaptive quadrature of the intensity between jumps
    ev = run50.events
    pts = np.concatenate([[0.0], ev.times, [10.0]])
    f = lambda t: float(intensity_from_events(sigmoid, ev, np.array([t]))[0])
    total = sum(integrate.quad(f, a, b, epsabs=1e-13)[0] for a, b in zip(pts[:-1], pts[1:])
                if b > a)
    assert run50.compensator[0, -1] == pytest.approx(total, abs=1e-9)
    # trapezoid version only to O(dt)
    assert run50.Lambda_path.values[-1] == pytest.approx(total, abs=1e-2)


def test_same_seed_same_paths(sigmoid):
    g = TimeGrid(5.0, 500)
    a = simulate_hawkes(sigmoid, 30, g, SeedPolicy(9, 4))
    b = simulate_hawkes(sigmoid, 30, g, SeedPolicy(9, 4))
    c = simulate_hawkes(sigmoid, 30, g, SeedPolicy(9, 5))
    assert a.events.times.tobytes() == b.events.times.tobytes()
    assert a.events.units.tobytes() == b.events.units.tobytes()
    assert a.events.times.tobytes() != c.events.times.tobytes()


def test_budget_does_not_change_paths(sigmoid):
    g = TimeGrid(5.0, 100)
    ref = simulate_hawkes(sigmoid, 200, g, SeedPolicy(1), budget=16)
    for budget in (1, 3, 64):
        other = simulate_hawkes(sigmoid, 200, g, SeedPolicy(1), budget=budget)
        assert np.array_equal(other.events.times, ref.events.times)
        assert np.array_equal(other.events.units, ref.events.units)
    assert simulate_hawkes(sigmoid, 200, g, SeedPolicy(1), budget=1).stats["restarts"] > 0


def test_expression_model_reproduces_builtin(sigmoid):
    spec = ModelSpec(expression_rate("1 / (1 + exp(-2 * (x - 0.5)))",
                                     derivative="2 * exp(-2 * (x - 0.5)) / (1 + exp(-2 * (x - 0.5)))**2",
                                     sup_f=1.0),
                     expression_kernel("4 * t * exp(-2 * t)", derivative="4 * (1 - 2 * t) * exp(-2 * t)"))
    g = TimeGrid(5.0, 200)
    a = simulate_hawkes(sigmoid, 40, g, SeedPolicy(2))
    b = simulate_hawkes(spec, 40, g, SeedPolicy(2))
    assert np.array_equal(a.events.units, b.events.units)
    assert np.allclose(a.events.times, b.events.times, rtol=0, atol=1e-12)


def test_poisson_event_count():
    spec = builtin_model("constant_rate", (1.0,))
    g = TimeGrid(10.0, 100)
    counts = np.array([simulate_hawkes(spec, 1, g, SeedPolicy(5, r)).events.times.size
                       for r in range(5000)])
    assert abs(counts.mean() - 10.0) <= 3 * np.sqrt(10.0 / 5000)
    assert counts.var(ddof=1) == pytest.approx(10.0, rel=0.1)


def test_stable_regime_fluctuates_around_fixed_point(sigmoid):
    g = TimeGrid(20.0, 2000)
    lo = g.index(15.0)
    avg = np.array([simulate_hawkes(sigmoid, 50, g, SeedPolicy(8, r)).lambda_path.values[lo:].mean()
                    for r in range(40)])
    lim = solve_limit(sigmoid, g).lam.values[lo:].mean()
    assert abs(avg.mean() - lim) <= 5 * avg.std(ddof=1) / np.sqrt(avg.size)
    assert lim == pytest.approx(0.5, abs=1e-3)


def test_zero_kernel_euler_matches_thinning():
    spec = ModelSpec(sigmoid_rate(2.0), zero_kernel())
    g = TimeGrid(5.0, 1000)
    a = [simulate_hawkes(spec, 5, g, SeedPolicy(6, r)).events.times.size for r in range(2000)]
    b = [simulate_hawkes(spec, 5, g, SeedPolicy(6, r), mode="euler").events.times.size
         for r in range(2000)]
    assert two_sample_ks(a, b)[1] > 0.01
    assert np.mean(a) == pytest.approx(5 * 5 * float(spec.f(0.0)), rel=0.05)


@pytest.mark.filterwarnings("ignore::mfhawkes.simulate.EulerTruncationWarning")
def test_euler_bias_is_first_order(sigmoid):
    gaps = []
    for n in (500, 1000):
        g = TimeGrid(10.0, n)
        d = [simulate_hawkes(sigmoid, 50, g, SeedPolicy(1, r), mode="euler").events.times.size
             - simulate_hawkes(sigmoid, 50, g, SeedPolicy(1, r)).events.times.size
             for r in range(400)]
        gaps.append(np.mean(d) / 50)
    assert abs(gaps[1]) < abs(gaps[0])
    assert 1.3 < gaps[0] / gaps[1] < 3.2


def test_euler_truncation_escalates():
    spec = builtin_model("constant_rate", (1.0,))
    with pytest.raises(SimulationError, match="refine"):
        simulate_hawkes(spec, 20, TimeGrid(10.0, 100), SeedPolicy(1), mode="euler")
    with pytest.warns(EulerTruncationWarning):
        simulate_hawkes(spec, 20, TimeGrid(10.0, 1000), SeedPolicy(1), mode="euler")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r = simulate_hawkes(spec, 20, TimeGrid(10.0, 10000), SeedPolicy(1), mode="euler")
    assert r.stats["truncation_rate"] < 1e-3
    r.events.validate()


def test_dominating_level_overflow_reported():
    # sup_f understates the rate, so the certified level is wrong
    spec = ModelSpec(expression_rate("2 + 0 * x", sup_f=1.0), erlang_kernel(2.0))
    with pytest.raises(SimulationError, match="dominating"):
        simulate_hawkes(spec, 10, TimeGrid(5.0, 50), SeedPolicy(1))


def test_invalid_arguments(sigmoid):
    g = TimeGrid(1.0, 10)
    with pytest.raises(ValueError):
        simulate_hawkes(sigmoid, 0, g, SeedPolicy(1))
    with pytest.raises(ValueError):
        simulate_hawkes(sigmoid, 5, g, SeedPolicy(1), mode="exact")
    with pytest.raises(ValueError):
        simulate_hawkes(sigmoid, 5, g, SeedPolicy(1), budget=0)
    with pytest.raises(ValueError):
        thin_intensity(np.ones((1, 5)), (3,), g, SeedPolicy(1))


def test_coupled_poisson_identical_for_constant_rate():
    spec = builtin_model("constant_rate", (1.3,))
    g = TimeGrid(5.0, 500)
    lim = solve_limit(spec, g)
    for r in range(5):
        s = SeedPolicy(4, r)
        a = simulate_hawkes(spec, 20, g, s).events
        b = simulate_coupled_poisson(spec, 20, g, lim, s)
        assert np.array_equal(a.times, b.times) and np.array_equal(a.units, b.units)


def test_zero_intensity_gives_empty_paths():
    spec = ModelSpec(constant_rate(0.0), erlang_kernel(1.0))
    g = TimeGrid(5.0, 100)
    assert simulate_hawkes(spec, 10, g, SeedPolicy(1)).events.times.size == 0
    assert simulate_coupled_poisson(spec, 10, g, solve_limit(spec, g), SeedPolicy(1)).times.size == 0


def test_coupled_poisson_grid_mismatch(sigmoid, limit10):
    with pytest.raises(ValueError):
        simulate_coupled_poisson(sigmoid, 5, TimeGrid(10.0, 10), limit10, SeedPolicy(1))


def test_thinning_inhomogeneous_rate():
    g = TimeGrid(4.0, 400)
    rate = 1.0 + np.sin(g.t) ** 2
    ev = thin_intensity(rate[None, :], (2000,), g, SeedPolicy(3))
    ev.validate()
    expected = integrate.trapezoid(rate, g.t)
    counts = ev.unit_counts()
    assert abs(counts.mean() - expected) < 4 * np.sqrt(expected / 2000)
    assert counts.var(ddof=1) == pytest.approx(expected, rel=0.15)


def test_ensemble_independent_of_threads(sigmoid):
    g = TimeGrid(5.0, 200)
    a = simulate_ensemble(sigmoid, 20, g, SeedPolicy(7), 8, threads=1)
    b = simulate_ensemble(sigmoid, 20, g, SeedPolicy(7), 8, threads=4)
    for x, y in zip(a, b):
        assert x.events.replicate == y.events.replicate
        assert x.events.times.tobytes() == y.events.times.tobytes()
        assert x.lambda_paths.tobytes() == y.lambda_paths.tobytes()


def test_single_class_reduction_is_bit_identical(sigmoid):
    g = TimeGrid(5.0, 500)
    a = simulate_hawkes(sigmoid, 25, g, SeedPolicy(2))
    b = simulate_hawkes_multiclass(sigmoid.multiclass, 25, g, SeedPolicy(2))
    assert a.events.times.tobytes() == b.events.times.tobytes()
    for name in ("lambda_paths", "u_paths", "Lambda_paths", "compensator", "u_moments"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_symmetric_classes_have_equal_mean_rates():
    r, k = sigmoid_rate(2.0), erlang_kernel(2.0, weight=0.5)
    spec = MultiClassSpec([r, r], [[k, k], [k, k]], (0.5, 0.5))
    g = TimeGrid(5.0, 100)
    sims = simulate_ensemble(spec, 40, g, SeedPolicy(11), 300)
    lam = np.stack([s.lambda_paths for s in sims])  # (R, 2, n+1)
    d = lam[:, 0] - lam[:, 1]
    se = d.std(axis=0, ddof=1) / np.sqrt(len(sims))
    assert np.all(np.abs(d.mean(axis=0)) <= 4 * se + 1e-15)
    assert sims[0].class_sizes == (20, 20)


def test_multiclass_uses_class_weighted_sums(rng):
    r1, r2 = sigmoid_rate(2.0), sigmoid_rate(3.0)
    k = erlang_kernel(2.0)
    spec = MultiClassSpec([r1, r2], [[k, k], [zero_kernel(), k]], (0.3, 0.7))
    g = TimeGrid(3.0, 60)
    sim = simulate_hawkes_multiclass(spec, 30, g, SeedPolicy(1))
    ev = sim.events
    sizes = ev.class_sizes()
    cls = ev.unit_class[ev.units]
    for i in rng.integers(1, len(g), 5):
        t = g.t[i]
        past = ev.times < t
        u0 = sum(np.sum(k.h(t - ev.times[past & (cls == l)])) / sizes[l] for l in (0, 1))
        u1 = np.sum(k.h(t - ev.times[past & (cls == 1)])) / sizes[1]
        assert sim.lambda_paths[0, i] == pytest.approx(float(r1.f(u0)), abs=1e-12)
        assert sim.lambda_paths[1, i] == pytest.approx(float(r2.f(u1)), abs=1e-12)
