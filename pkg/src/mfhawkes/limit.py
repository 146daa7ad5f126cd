"""Deterministic mean-field limit.

Solves ``lambda(t) = f(x_t)``, ``x_t = int_0^t h(t-s) lambda(s) ds`` and
``m(t) = int_0^t lambda`` by an explicit trapezoid march.  Because
``h(0) = 0`` the newest node carries zero weight, so no nonlinear solve is
needed per step.
"""

from dataclasses import dataclass

import numpy as np

from .model import GridFunction, ModelSpec, MultiClassSpec, TimeGrid

__all__ = ["LimitSolution", "solve_limit", "solve_limit_multiclass", "cumulative_trapezoid",
           "intensity_growth_bound"]


@dataclass(frozen=True, eq=False)
class LimitSolution:
    grid: TimeGrid
    m: GridFunction
    lam: GridFunction
    x: GridFunction

    @property
    def lambda_(self):
        return self.lam


def cumulative_trapezoid(y, dt):
    """Running trapezoid integral along the last axis, starting at 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    out[..., 1:] = np.cumsum(0.5 * dt * (y[..., 1:] + y[..., :-1]), axis=-1)
    return out


def _march(spec, grid):
    K = spec.K
    n, dt = grid.n_steps, grid.dt
    t = grid.t
    H = np.empty((K, K, n + 1))
    for k in range(K):
        for l in range(K):
            H[k, l] = spec.kernels[k][l].h(t)
    lam = np.zeros((K, n + 1))
    x = np.zeros((K, n + 1))
    for k in range(K):
        lam[k, 0] = float(spec.rates[k].f(0.0))
    for i in range(1, n + 1):
        for k in range(K):
            acc = 0.0
            for l in range(K):
                acc += dt * (0.5 * H[k, l, i] * lam[l, 0]
                             + np.dot(H[k, l, i - 1:0:-1], lam[l, 1:i]))
            x[k, i] = acc
        for k in range(K):
            lam[k, i] = float(spec.rates[k].f(x[k, i]))
    m = cumulative_trapezoid(lam, dt)
    return [
        LimitSolution(grid, GridFunction(grid, m[k]), GridFunction(grid, lam[k]),
                      GridFunction(grid, x[k]))
        for k in range(K)
    ]


def solve_limit_multiclass(spec: MultiClassSpec, grid: TimeGrid):
    """One :class:`LimitSolution` per class of the coupled system."""
    if not isinstance(spec, MultiClassSpec):
        raise TypeError("expected a MultiClassSpec")
    return _march(spec, grid)


def solve_limit(spec: ModelSpec, grid: TimeGrid) -> LimitSolution:
    """Limit ``(m, lambda, x)`` of the single-population network on ``grid``."""
    if not isinstance(spec, ModelSpec):
        raise TypeError("expected a ModelSpec")
    return _march(spec.multiclass, grid)[0]


def intensity_growth_bound(spec: ModelSpec, grid: TimeGrid):
    """Gronwall bound ``f(0) exp(||f'|| ||h||_{[0,t]} t)`` at every grid time."""
    t = grid.t
    h_abs = np.abs(spec.h(t))
    running_sup = np.maximum.accumulate(h_abs)
    return float(spec.f(0.0)) * np.exp(spec.sup_f_prime * running_sup * t)
