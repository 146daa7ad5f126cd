import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfhawkes import GridFunction, ModelSpec, MultiClassSpec, TimeGrid, builtin_model, solve_limit
from mfhawkes.limit import solve_limit_multiclass
from mfhawkes.model import erlang_kernel, sigmoid_rate, zero_kernel
from mfhawkes.volterra import (
    ResolventTruncationError,
    _compose,
    apply_phi,
    apply_psi,
    apply_xi,
    build_kappa,
    build_resolvent,
    build_resolvent_ieq,
    build_resolvent_neumann,
    kernel_table,
    neumann_tail_bound,
    resolvent_lipschitz_constant,
    solve_volterra,
    volterra_residual,
)

# kappa(t, s) for sigmoid gamma=2, Erlang beta=2: 64-point Gauss-Legendre in u
# with x_u from the Markov embedding of the limit integrated by DOP853
KAPPA_GL = {
    (1.0, 0.0): 0.20710177666140883,
    (2.5, 0.5): 0.03465235977277166,
    (5.0, 0.0): -0.04928146690232143,
    (5.0, 2.0): 0.007614235716226523,
    (3.0, 2.9): 0.16206192264881675,
    (4.0, 1.0): -0.007979151313333177,
}


def _lower(n1):
    return np.tril(np.ones((n1, n1), dtype=bool))


def test_kappa_vanishes_for_constant_rate():
    spec = builtin_model("constant_rate", (1.0,))
    grid = TimeGrid(5.0, 200)
    k = build_kappa(solve_limit(spec, grid), spec, grid)
    assert np.all(k.kappa == 0.0)
    assert k.M_T == 0.0


def test_kappa_linear_kernel_exact():
    c = 1.3
    spec = builtin_model("linear_toy", (c, 1.0))
    grid = TimeGrid(2.0, 400)
    k = build_kappa(solve_limit(spec, grid), spec, grid).table
    t = grid.t
    exact = np.where(_lower(len(t)), c * (t[:, None] - t[None, :]), 0.0)
    assert np.max(np.abs(k - exact)) < 1e-10


def test_kappa_matches_gauss_legendre(sigmoid):
    # trapezoid error is O(dt^2); dt = 1e-3 gets below 1e-6
    grid = TimeGrid(5.0, 5000)
    k = build_kappa(solve_limit(sigmoid, grid), sigmoid, grid).table
    for (t, s), v in KAPPA_GL.items():
        assert k[grid.index(t), grid.index(s)] == pytest.approx(v, abs=1e-6)


def test_kappa_table_invariants(kappa10, sigmoid, grid10):
    tab = kappa10.table
    assert np.all(np.diagonal(tab) == 0.0)
    assert np.all(np.triu(tab, 1) == 0.0)
    assert np.max(np.abs(tab)) <= kappa10.M_T
    assert kappa10.M_T == pytest.approx(sigmoid.kappa_bound(grid10.T))


def test_kappa_grid_mismatch(sigmoid, limit10):
    with pytest.raises(ValueError):
        build_kappa(limit10, sigmoid, TimeGrid(10.0, 500))


def test_table_size_cap():
    with pytest.raises(ValueError, match="cap"):
        kernel_table(lambda t, s: 0 * t, TimeGrid(1.0, 10001))


def test_zero_kernel_resolvent():
    grid = TimeGrid(1.0, 50)
    tab = kernel_table(lambda t, s: 0.0 * t, grid)
    neu = build_resolvent_neumann(tab)
    assert neu.order == 1 and neu.tail_bound == 0.0
    assert np.all(neu.table == 0.0)
    assert np.all(build_resolvent_ieq(tab).table == 0.0)


@pytest.mark.parametrize("builder", [build_resolvent_ieq, build_resolvent_neumann])
def test_sinh_resolvent(builder):
    grid = TimeGrid(1.0, 500)
    K = builder(kernel_table(lambda t, s: t - s, grid)).table
    assert K[-1, 0] == pytest.approx(np.sinh(1.0), abs=1e-5)
    assert np.sinh(1.0) == pytest.approx(1.1752012, abs=1e-7)
    t = grid.t
    exact = np.where(_lower(len(t)), np.sinh(t[:, None] - t[None, :]), 0.0)
    # O(dt^2) with dt = 2e-3
    assert np.max(np.abs(np.where(_lower(len(t)), K, 0) - exact)) < 2e-6


@pytest.mark.parametrize("builder", [build_resolvent_ieq, build_resolvent_neumann])
def test_constant_kernel_resolvent(builder):
    c = 1.3
    grid = TimeGrid(1.0, 500)
    K = builder(kernel_table(lambda t, s: np.full(np.broadcast(t, s).shape, c), grid)).table
    t = grid.t
    d = t[:, None] - t[None, :]
    exact = np.where(_lower(len(t)), c * np.exp(c * d), 0.0)
    assert np.max(np.abs(np.where(_lower(len(t)), K, 0) - exact)) < 1e-5


def test_resolvent_converges_at_second_order():
    errs = []
    for n in (100, 200, 400):
        grid = TimeGrid(1.0, n)
        K = build_resolvent_ieq(kernel_table(lambda t, s: t - s, grid)).table
        errs.append(abs(K[-1, 0] - np.sinh(1.0)))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_methods_agree_on_model(kappa10):
    a = build_resolvent_ieq(kappa10)
    b = build_resolvent_neumann(kappa10, tol=1e-10)
    assert np.max(np.abs(a.K_values - b.K_values)) < 1e-6
    assert b.tail_bound < 1e-10


def test_resolvent_bound_and_identity(kappa10, resolvent10):
    K = resolvent10.table
    assert np.max(np.abs(K)) <= resolvent10.bound
    assert resolvent10.bound == pytest.approx(kappa10.M_T * np.exp(kappa10.M_T * 10.0))
    res = resolvent10.K_values - kappa10.kappa - _compose(kappa10.kappa, resolvent10.K_values,
                                                          kappa10.grid.dt)
    assert np.max(np.abs(np.tril(res[0, 0], -1))) < 1e-12


def test_neumann_tail_bound_series():
    # compare against the explicit series sum_{m > n} M^m T^(m-1)/(m-1)!
    from math import gamma
    M, T = 0.7, 3.0
    for n in (1, 3, 8):
        series = sum(M ** m * T ** (m - 1) / gamma(m) for m in range(n + 1, 150))
        assert neumann_tail_bound(M, T, n) == pytest.approx(series, rel=1e-10)


def test_neumann_truncation_error():
    grid = TimeGrid(5.0, 50)
    tab = kernel_table(lambda t, s: np.full(np.broadcast(t, s).shape, 3.0), grid)
    with pytest.raises(ResolventTruncationError) as info:
        build_resolvent_neumann(tab, tol=1e-12, max_order=5)
    assert info.value.bound > 1e-12


def test_unknown_method(kappa10):
    with pytest.raises(ValueError):
        build_resolvent(kappa10, method="spectral")


def test_phi_trivial_cases(resolvent10, grid10):
    zero = GridFunction(grid10, np.zeros(len(grid10)))
    assert np.all(apply_phi(resolvent10, zero).values == 0.0)
    tab = kernel_table(lambda t, s: 0.0 * t, grid10)
    F = GridFunction(grid10, np.sin(grid10.t))
    assert np.array_equal(apply_phi(build_resolvent_ieq(tab), F).values, F.values)


def test_phi_cosh():
    grid = TimeGrid(1.0, 1000)
    K = build_resolvent_ieq(kernel_table(lambda t, s: t - s, grid))
    G = apply_phi(K, GridFunction(grid, np.ones(len(grid))))
    assert np.max(np.abs(G.values - np.cosh(grid.t))) < 1e-6


def test_psi_cases(sigmoid, grid10):
    t = grid10.t
    assert np.all(apply_psi(sigmoid, GridFunction(grid10, 0 * t)).values == 0)
    G = apply_psi(sigmoid, GridFunction(grid10, np.ones_like(t)))
    # trapezoid error dt^2/12 |h''(t) - h''(0)| with sup|h''| = 2 beta^3
    assert np.max(np.abs(G.values - sigmoid.h(t))) <= grid10.dt ** 2 / 12 * 2 * 16
    lin = builtin_model("linear_toy", (1.0,))
    G = apply_psi(lin, GridFunction(grid10, t))
    assert np.max(np.abs(G.values - t ** 2 / 2)) < 1e-10


def test_xi_cases(sigmoid, limit10, grid10):
    F = GridFunction(grid10, np.cos(grid10.t))
    assert np.all(apply_xi(limit10, sigmoid, GridFunction(grid10, 0 * grid10.t)).values == 0)
    const = builtin_model("constant_rate", (1.0,))
    assert np.all(apply_xi(solve_limit(const, grid10), const, F).values == 0)
    lin = builtin_model("linear_toy", (0.8,))
    g = TimeGrid(2.0, 100)
    Fg = GridFunction(g, np.cos(g.t))
    assert np.allclose(apply_xi(solve_limit(lin, g), lin, Fg).values, 0.8 * Fg.values)


def test_grid_mismatch_in_operators(resolvent10):
    with pytest.raises(ValueError):
        apply_phi(resolvent10, GridFunction(TimeGrid(10.0, 10), np.zeros(11)))


def test_lipschitz_in_t(sigmoid, resolvent10, grid10):
    C = resolvent_lipschitz_constant(sigmoid, grid10.T)
    K = resolvent10.table
    quad = 10 * grid10.dt ** 2
    for j in (0, 100, 500):
        col = K[j:, j]
        slopes = np.abs(np.diff(col)) - 2 * quad
        assert np.all(slopes <= C * grid10.dt)
        # far-apart pairs as well
        assert abs(col[-1] - col[0]) <= C * (grid10.T - grid10.t[j]) + 2 * quad


@settings(max_examples=20, deadline=None)
@given(knots=st.lists(st.floats(-3, 3), min_size=2, max_size=12))
def test_phi_solves_second_kind_equation(knots, kappa10, resolvent10, grid10):
    x = np.linspace(0, grid10.T, len(knots))
    F = GridFunction(grid10, np.interp(grid10.t, x, knots))
    G = apply_phi(resolvent10, F)
    res = volterra_residual(kappa10, G, F).sup_norm()
    assert res < 10 * grid10.dt ** 2 * (1 + F.sup_norm())
    # the marching solver finds the same solution
    G2 = solve_volterra(kappa10, F)
    assert np.max(np.abs(G.values - G2.values)) < 1e-9 * (1 + F.sup_norm())


def test_block_diagonal_resolvent():
    r, k = sigmoid_rate(2.0), erlang_kernel(2.0)
    spec = MultiClassSpec([r, r], [[k, zero_kernel()], [zero_kernel(), k]], (0.4, 0.6))
    grid = TimeGrid(5.0, 200)
    lims = solve_limit_multiclass(spec, grid)
    kap = build_kappa(lims, spec, grid)
    for builder in (build_resolvent_ieq, build_resolvent_neumann):
        Kv = builder(kap).K_values
        assert np.all(Kv[0, 1] == 0.0) and np.all(Kv[1, 0] == 0.0)
        scalar = build_resolvent_ieq(build_kappa(lims[0], ModelSpec(r, k), grid)).table
        assert np.allclose(Kv[0, 0], scalar, atol=1e-13)


def test_multiclass_kappa_weights():
    r, k = sigmoid_rate(2.0), erlang_kernel(2.0, weight=0.5)
    p = (0.25, 0.75)
    spec = MultiClassSpec([r, r], [[k, k], [k, k]], p)
    grid = TimeGrid(3.0, 100)
    kap = build_kappa(solve_limit_multiclass(spec, grid), spec, grid).kappa
    ratio = np.sqrt(p[0] / p[1])
    mask = np.tril(np.ones_like(kap[0, 0], dtype=bool), -1) & (kap[0, 0] != 0)
    assert np.allclose(kap[0, 1][mask] / kap[0, 0][mask], ratio)
