"""Finite-N fluctuation paths and samples of their Gaussian limits."""

from dataclasses import dataclass

import numpy as np

from .limit import LimitSolution, cumulative_trapezoid
from .model import EventPaths, GridFunction, ModelSpec, MultiClassSpec, TimeGrid
from .seeding import DOMAIN_GAUSS, SeedPolicy
from .simulate import SimResult
from .volterra import (
    KernelTable,
    ResolventTable,
    _toeplitz_conv,
    apply_phi,
    apply_psi,
    build_kappa,
    build_resolvent,
    solve_volterra,
    volterra_residual,
)

__all__ = [
    "FluctuationPaths",
    "LimitFluctuationSample",
    "LimitDraws",
    "compute_fluctuations",
    "sample_limit",
    "sample_limit_batch",
    "sample_limit_multiclass",
    "sample_limit_multiclass_batch",
    "gx_equation_residual",
    "volterra_sample_residual",
    "lln_distance",
    "coupling_distance",
    "martingale_max_jump",
    "ROUTES",
]

ROUTES = ("resolvent", "fixed_point")


@dataclass(frozen=True, eq=False)
class FluctuationPaths:
    """Rescaled deviations of one simulated replicate from the limit.

    ``Y = Mbar + A`` is the split of the counting fluctuation into its
    martingale and compensator parts; ``X`` is the fluctuation of the
    intensity argument and ``r`` what is left of ``A`` after its linear
    part ``int f'(x) X``.
    """

    grid: TimeGrid
    Y: GridFunction
    X: GridFunction
    Mbar: GridFunction
    A: GridFunction
    r: GridFunction
    intensity_fluct: GridFunction
    N: int


@dataclass(frozen=True, eq=False)
class LimitFluctuationSample:
    grid: TimeGrid
    W_lambda: GridFunction
    G_Y: GridFunction
    G_X: GridFunction
    sigma: GridFunction
    route: str


@dataclass(frozen=True, eq=False)
class LimitDraws:
    """Batch of limit paths, arrays of shape (draws, K, n+1)."""

    grid: TimeGrid
    W_lambda: np.ndarray
    G_Y: np.ndarray
    G_X: np.ndarray
    sigma: np.ndarray
    route: str
    replicates: np.ndarray

    def sample(self, j, k=0):
        g = self.grid
        return LimitFluctuationSample(
            g, GridFunction(g, self.W_lambda[j, k]), GridFunction(g, self.G_Y[j, k]),
            GridFunction(g, self.G_X[j, k]), GridFunction(g, self.sigma[j, k]), self.route,
        )


# ---------------------------------------------------------------------------
# finite N


def _class_rate(spec, cls):
    if isinstance(spec, ModelSpec):
        if cls != 0:
            raise ValueError("single-population spec has only class 0")
        return spec.rate
    return spec.rates[cls]


def compute_fluctuations(sim: SimResult, limit: LimitSolution, spec, N=None, cls=0):
    """Fluctuation paths of class ``cls`` of one replicate.

    ``N`` defaults to the class size and must match it when given.  ``Y``
    comes from exact jump counts and ``X = sqrt(N)(u^N - x)`` is the
    h'-convolution of ``Y`` evaluated in closed form on the grid.  The
    compensator and ``int f'(x) X`` are integrated piecewise between jumps,
    so ``r`` carries no quadrature bias that grows with ``N``.
    """
    grid = sim.grid
    if limit.grid != grid:
        raise ValueError("simulation and limit live on different grids")
    n_cls = sim.class_sizes[cls]
    if N is not None and int(N) != n_cls:
        raise ValueError(f"N={N} does not match the class size {n_cls}")
    N = n_cls
    rootN = np.sqrt(N)
    rate = _class_rate(spec, cls)

    counts = sim.events.total_on_grid(cls)
    m, lam, x = limit.m.values, limit.lam.values, limit.x.values
    comp = N * sim.compensator[cls]
    Y = (counts - N * m) / rootN
    Mbar = (counts - comp) / rootN
    A = (comp - N * m) / rootN
    X = rootN * (sim.u_paths[cls] - x)

    # int f'(x) X ds with f'(x) linear on each window: u enters through its
    # exact window moments, the smooth x through the trapezoid rule
    g = np.asarray(rate.f_prime(x), dtype=float)
    I0, I1 = sim.u_moments[0, cls], sim.u_moments[1, cls]
    gu = g[:-1] * I0 + (g[1:] - g[:-1]) * I1
    lin = np.zeros_like(x)
    lin[1:] = np.cumsum(gu)
    lin = rootN * (lin - cumulative_trapezoid(g * x, grid.dt))
    r = A - lin

    fl = rootN * (sim.lambda_paths[cls] - lam)
    G = lambda v: GridFunction(grid, v)
    return FluctuationPaths(grid, G(Y), G(X), G(Mbar), G(A), G(r), G(fl), N)


def lln_distance(events: EventPaths, limit: LimitSolution, cls=None):
    """``sup_t |(1/N) sum_i Z_i(t) - m(t)|`` on [0, T].

    The count is a step function and ``m`` is non-decreasing, so the
    supremum is attained at a jump time (from either side) or at T; ``m``
    between grid points is the integral of the linearly interpolated rate.
    """
    grid = limit.grid
    if events.grid != grid:
        raise ValueError("grid mismatch")
    if cls is None:
        t, n = events.times, events.unit_count
    else:
        t = events.times[events.unit_class[events.units] == cls]
        n = int(np.sum(events.unit_class == cls))
    mt = _m_at(limit, t)
    k = np.arange(1, t.size + 1) / n
    gaps = [np.abs(k - mt), np.abs(k - 1.0 / n - mt)]
    end = abs(t.size / n - limit.m.values[-1])
    return float(max(end, max((g.max() for g in gaps if g.size), default=0.0)))


def _m_at(limit, t):
    # m between nodes: integral of the linearly interpolated lambda
    grid = limit.grid
    lam, m = limit.lam.values, limit.m.values
    i = np.clip(np.floor(t / grid.dt).astype(int), 0, grid.n_steps - 1)
    s = t - grid.t[i]
    slope = (lam[i + 1] - lam[i]) / grid.dt
    return m[i] + lam[i] * s + 0.5 * slope * s * s


def coupling_distance(a: EventPaths, b: EventPaths):
    """Per-unit ``sup_t |Z_i(t) - Zbar_i(t)|`` for two path sets of equal size."""
    if a.unit_count != b.unit_count:
        raise ValueError("path sets have different unit counts")
    out = np.zeros(a.unit_count)
    pa, pb = a.per_unit(), b.per_unit()
    for i in range(a.unit_count):
        ta, tb = pa[i], pb[i]
        if ta.size == 0 and tb.size == 0:
            continue
        t = np.concatenate([ta, tb])
        sgn = np.concatenate([np.ones(ta.size), -np.ones(tb.size)])
        order = np.argsort(t, kind="mergesort")
        t, sgn = t[order], sgn[order]
        # common jump times cancel; group equal times before the running sum
        keep = np.r_[t[1:] != t[:-1], True]
        diff = np.cumsum(sgn)[keep]
        out[i] = np.max(np.abs(diff)) if diff.size else 0.0
    return out


def martingale_max_jump(events: EventPaths, N=None):
    """Largest jump of ``Mbar``: one unit jumping alone, i.e. ``1/sqrt(N)``."""
    if events.times.size == 0:
        return 0.0
    N = events.unit_count if N is None else N
    _, mult = np.unique(events.times, return_counts=True)
    return float(mult.max() / np.sqrt(N))


# ---------------------------------------------------------------------------
# limit processes


def _limits_and_spec(limit, spec):
    limits = [limit] if isinstance(limit, LimitSolution) else list(limit)
    mspec = spec.multiclass if isinstance(spec, ModelSpec) else spec
    if len(limits) != mspec.K:
        raise ValueError("one limit solution per class is required")
    return limits, mspec


def _draw(limits, mspec, K_table, kappa, grid, seed: SeedPolicy, replicates, route,
          stream_ids=None):
    if route not in ROUTES:
        raise ValueError(f"unknown route {route!r}")
    if any(L.grid != grid for L in limits):
        raise ValueError("limit solution lives on a different grid")
    lam = np.stack([L.lam.values for L in limits])
    if np.any(lam < 0):
        raise ValueError("limit intensity must be non-negative")
    K = mspec.K
    streams = np.arange(K) if stream_ids is None else np.asarray(stream_ids, dtype=np.int64)
    if streams.shape != (K,):
        raise ValueError("need one Gaussian stream id per class")
    reps = np.atleast_1d(np.asarray(replicates, dtype=np.int64))

    xi = seed.normals(DOMAIN_GAUSS, streams, grid.n_steps, reps)
    # left-point increments sqrt(lambda(t_k)) (W(t_{k+1}) - W(t_k))
    inc = np.sqrt(lam[:, :-1] * np.diff(grid.t)) * xi
    W = np.zeros(inc.shape[:-1] + (len(grid),))
    np.cumsum(inc, axis=-1, out=W[..., 1:])

    if route == "resolvent":
        if K_table is None:
            if kappa is None:
                kappa = build_kappa(limits, mspec, grid)
            K_table = build_resolvent(kappa)
        if K_table.grid != grid:
            raise ValueError("resolvent table lives on a different grid")
        GY = apply_phi(K_table, W)
    else:
        if kappa is None:
            kappa = build_kappa(limits, mspec, grid)
        if kappa.grid != grid:
            raise ValueError("kernel table lives on a different grid")
        GY = solve_volterra(kappa, W)
    GX = apply_psi(mspec, GY, grid)
    fp = np.stack([mspec.rates[k].f_prime(limits[k].x.values) for k in range(K)])
    sig = fp * GX
    return LimitDraws(grid, W, GY, GX, sig, route, reps)


def sample_limit(limit: LimitSolution, spec: ModelSpec, K_table: ResolventTable, grid: TimeGrid,
                 seed: SeedPolicy, route="resolvent", kappa: KernelTable = None):
    """One draw of ``(W_lambda, G_Y, G_X, sigma)`` for replicate ``seed.replicate``.

    Both routes read the same Gaussian stream, so for a given seed they
    discretise the same Brownian path.  ``kappa`` is built from the limit
    when the fixed-point route is asked for without it.
    """
    limits, mspec = _limits_and_spec(limit, spec)
    return _draw(limits, mspec, K_table, kappa, grid, seed, seed.replicate, route).sample(0)


def sample_limit_batch(limit, spec, K_table, grid, seed: SeedPolicy, draws, route="resolvent",
                       kappa=None, start=0):
    """Draws for replicates ``start .. start+draws-1`` as a :class:`LimitDraws`."""
    limits, mspec = _limits_and_spec(limit, spec)
    reps = np.arange(start, start + int(draws))
    return _draw(limits, mspec, K_table, kappa, grid, seed, reps, route)


def sample_limit_multiclass(limits, spec: MultiClassSpec, K_blocks, grid, seed: SeedPolicy,
                            route="resolvent", kappa=None, stream_ids=None):
    """One draw per class, class ``k`` driven by Gaussian stream ``stream_ids[k]``."""
    limits, mspec = _limits_and_spec(limits, spec)
    d = _draw(limits, mspec, K_blocks, kappa, grid, seed, seed.replicate, route, stream_ids)
    return [d.sample(0, k) for k in range(mspec.K)]


def sample_limit_multiclass_batch(limits, spec, K_blocks, grid, seed, draws, route="resolvent",
                                  kappa=None, stream_ids=None, start=0):
    limits, mspec = _limits_and_spec(limits, spec)
    reps = np.arange(start, start + int(draws))
    return _draw(limits, mspec, K_blocks, kappa, grid, seed, reps, route, stream_ids)


def gx_equation_residual(sample: LimitFluctuationSample, limit: LimitSolution, spec: ModelSpec):
    """Sup-norm residual of ``G = int h(t-s) f'(x_s) G ds + int h(t-s) dW_lambda``.

    The stochastic convolution is evaluated as ``int h'(t-s) W_lambda(s) ds``
    (integration by parts, ``h(0) = W_lambda(0) = 0``), which is the form the
    sampler discretises; the residual is then a pure quadrature error.
    """
    grid = sample.grid
    dt = grid.dt
    hv = spec.h(grid.t)
    gx = sample.G_X.values
    fp = spec.f_prime(limit.x.values)
    drift = _toeplitz_conv(fp * gx, hv, dt)
    noise = _toeplitz_conv(sample.W_lambda.values, spec.h_prime(grid.t), dt)
    return float(np.max(np.abs(gx - drift - noise)))


def volterra_sample_residual(sample: LimitFluctuationSample, kappa: KernelTable):
    """Sup-norm of ``G_Y - int kappa G_Y - W_lambda`` on the grid."""
    res = volterra_residual(kappa, sample.G_Y, sample.W_lambda)
    return res.sup_norm()
