"""Volterra machinery for the fluctuation limit.

Tables are dense arrays of shape ``(K, K, n+1, n+1)`` indexed
``[k, l, i, j]`` for times ``t_i >= t_j``; entries above the time diagonal
are zero.  The time diagonal stores the limit ``lim_{t -> s+} kappa(t, s)``,
which is 0 for kernels built from a model and is needed as the trapezoid
endpoint value for synthetic kernels that jump at ``t = s``.

All quadratures are composite trapezoid rules on the uniform grid.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, signal, special

from .limit import LimitSolution, cumulative_trapezoid
from .model import MAX_GRID_STEPS, GridFunction, ModelSpec, MultiClassSpec, TimeGrid

__all__ = [
    "KernelTable",
    "ResolventTable",
    "ResolventTruncationError",
    "build_kappa",
    "kernel_table",
    "build_resolvent_neumann",
    "build_resolvent_ieq",
    "build_resolvent",
    "apply_phi",
    "apply_psi",
    "apply_xi",
    "solve_volterra",
    "volterra_residual",
    "neumann_tail_bound",
    "resolvent_lipschitz_constant",
]

MAX_NEUMANN_ORDER = 400


class ResolventTruncationError(RuntimeError):
    def __init__(self, order, bound, tol):
        super().__init__(
            f"Neumann series needs more than {order} terms for tol={tol:g}; "
            f"achievable tail bound at the cap is {bound:.3e}"
        )
        self.order, self.bound, self.tol = order, bound, tol


@dataclass(frozen=True, eq=False)
class KernelTable:
    grid: TimeGrid
    kappa: np.ndarray
    M_T: float

    @property
    def K(self):
        return self.kappa.shape[0]

    @property
    def table(self):
        """Scalar table (K = 1 only)."""
        if self.K != 1:
            raise ValueError("scalar view requires K = 1")
        return self.kappa[0, 0]


@dataclass(frozen=True, eq=False)
class ResolventTable:
    grid: TimeGrid
    K_values: np.ndarray
    method: str
    M_T: float
    order: int | None = None
    tail_bound: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.K_values.shape[0]

    @property
    def table(self):
        if self.K != 1:
            raise ValueError("scalar view requires K = 1")
        return self.K_values[0, 0]

    @property
    def bound(self):
        """``M_T exp(M_T T)``, the a priori bound on |K|."""
        return self.M_T * np.exp(self.M_T * self.grid.T)


def _check_size(grid):
    if grid.n_steps > MAX_GRID_STEPS:
        raise ValueError(
            f"n_steps={grid.n_steps} exceeds the dense-table cap of {MAX_GRID_STEPS}"
        )


def _as_multi(limit, spec):
    if isinstance(spec, ModelSpec):
        spec = spec.multiclass
    if isinstance(limit, LimitSolution):
        limit = [limit]
    return list(limit), spec


def build_kappa(limit, spec, grid: TimeGrid) -> KernelTable:
    """``kappa(t, s) = int_s^t f'(x_u) h'(u - s) du`` on the grid.

    Multi-class tables carry the ``sqrt(p_k / p_l)`` prefactor.
    """
    limits, spec = _as_multi(limit, spec)
    if any(L.grid != grid for L in limits):
        raise ValueError("limit solution lives on a different grid")
    _check_size(grid)
    K, n1, dt, t = spec.K, len(grid), grid.dt, grid.t
    p = np.asarray(spec.p)
    kap = np.zeros((K, K, n1, n1))
    for k in range(K):
        g = spec.rates[k].f_prime(limits[k].x.values)
        for l in range(K):
            hp = spec.kernels[k][l].h_prime(t)
            w = np.sqrt(p[k] / p[l])
            for j in range(n1 - 1):
                col = cumulative_trapezoid(g[j:] * hp[: n1 - j], dt)
                kap[k, l, j:, j] = w * col
    return KernelTable(grid, kap, spec.kappa_bound(grid.T))


def kernel_table(values, grid: TimeGrid, M_T=None) -> KernelTable:
    """Wrap a synthetic kernel.

    ``values`` is a vectorised callable ``kappa(t, s)`` or an array of shape
    (n+1, n+1) or (K, K, n+1, n+1).  The value at ``s = t`` must be the
    limit from ``s < t``.
    """
    _check_size(grid)
    n1 = len(grid)
    if callable(values):
        t = grid.t
        T_, S_ = np.meshgrid(t, t, indexing="ij")
        tab = np.asarray(values(T_, S_), dtype=float) * np.ones((n1, n1))
    else:
        tab = np.asarray(values, dtype=float)
    if tab.ndim == 2:
        tab = tab[None, None]
    if tab.shape[2:] != (n1, n1):
        raise ValueError("table does not match the grid")
    tab = np.tril(tab)
    if M_T is None:
        M_T = float(np.max(np.abs(tab).sum(axis=1).max(axis=(1, 2)))) if tab.size else 0.0
    return KernelTable(grid, tab, float(M_T))


# ---------------------------------------------------------------------------
# resolvent


def _strict(A):
    return np.tril(A, -1)


def _diag(A):
    return np.diagonal(A, axis1=-2, axis2=-1)


def _compose(A, B, dt, B_diag_zero=False):
    """Trapezoid composition ``int_s^t A(t, u) B(u, s) du`` of block tables."""
    K = A.shape[0]
    n1 = A.shape[2]
    out = np.zeros((K, K, n1, n1))
    for k in range(K):
        for l in range(K):
            acc = np.zeros((n1, n1))
            for m in range(K):
                LA, LB = _strict(A[k, m]), _strict(B[m, l])
                acc += LA @ LB
                if not B_diag_zero:
                    acc += 0.5 * LA * _diag(B[m, l])[None, :]
                acc += 0.5 * _diag(A[k, m])[:, None] * LB
            out[k, l] = dt * acc
    return out


def neumann_tail_bound(M_T, T, order):
    """``sum_{m > order} M^m T^(m-1) / (m-1)!``, the certified truncation error."""
    if M_T == 0:
        return 0.0
    mu = M_T * T
    if mu == 0:
        return 0.0 if order >= 1 else M_T
    return float(M_T * np.exp(mu) * special.gammainc(order, mu))


def build_resolvent_neumann(kappa: KernelTable, tol=1e-10, max_order=MAX_NEUMANN_ORDER):
    """Resolvent as a truncated sum of iterated kernels."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    M, T, dt = kappa.M_T, kappa.grid.T, kappa.grid.dt
    order = 1
    while neumann_tail_bound(M, T, order) >= tol:
        order += 1
        if order > max_order:
            raise ResolventTruncationError(max_order, neumann_tail_bound(M, T, max_order), tol)
    term = kappa.kappa.copy()
    total = term.copy()
    for n in range(2, order + 1):
        term = _compose(kappa.kappa, term, dt, B_diag_zero=n > 2)
        total += term
    return ResolventTable(
        kappa.grid, total, "neumann", M, order=order,
        tail_bound=neumann_tail_bound(M, T, order),
    )


def _time_major(A):
    K, _, n1, _ = A.shape
    return A.transpose(2, 0, 3, 1).reshape(n1 * K, n1 * K)


def _class_major(X, K):
    n1 = X.shape[0] // K
    return X.reshape(n1, K, n1, K).transpose(1, 3, 0, 2)


def build_resolvent_ieq(kappa: KernelTable) -> ResolventTable:
    """Resolvent from ``K = kappa + int kappa K`` by forward substitution.

    In time-major ordering the discretised equation is block lower
    triangular; rows are solved in increasing time, which is the same
    march as solving column by column.
    """
    kap = kappa.kappa
    K, n1, dt = kappa.K, len(kappa.grid), kappa.grid.dt
    L = np.tril(kap, -1)
    d = _diag(kap)  # (K, K, n1)
    # right-hand side: kappa(t_i, t_j) (I + dt/2 kappa(t_j+, t_j))
    rhs = np.zeros_like(kap)
    for k in range(K):
        for l in range(K):
            acc = L[k, l].copy()
            for m in range(K):
                acc += 0.5 * dt * L[k, m] * d[m, l][None, :]
            rhs[k, l] = acc
    lhs = -dt * L
    for k in range(K):
        for l in range(K):
            lhs[k, l][np.diag_indices(n1)] = (1.0 if k == l else 0.0) - 0.5 * dt * d[k, l]
    A = _time_major(lhs)
    B = _time_major(rhs)
    offdiag = d.copy()
    for k in range(K):
        offdiag[k, k] = 0.0
    if not np.any(offdiag):
        X = linalg.solve_triangular(A, B, lower=True, check_finite=False)
    else:
        X = linalg.solve(A, B, check_finite=False)
    Kv = np.tril(_class_major(X, K), -1)
    for k in range(K):
        for l in range(K):
            Kv[k, l][np.diag_indices(n1)] = d[k, l]
    return ResolventTable(kappa.grid, np.ascontiguousarray(Kv), "integral_equation", kappa.M_T)


def build_resolvent(kappa: KernelTable, method="integral_equation", tol=1e-10):
    if method == "integral_equation":
        return build_resolvent_ieq(kappa)
    if method == "neumann":
        return build_resolvent_neumann(kappa, tol)
    raise ValueError(f"unknown resolvent method {method!r}")


# ---------------------------------------------------------------------------
# operators


def _values(F, grid, K):
    """Normalise input to an array (..., K, n+1); remember how to unwrap."""
    if isinstance(F, GridFunction):
        if F.grid != grid:
            raise ValueError("grid mismatch")
        return F.values[None, :], "grid"
    if isinstance(F, (list, tuple)) and F and isinstance(F[0], GridFunction):
        if any(g.grid != grid for g in F):
            raise ValueError("grid mismatch")
        return np.stack([g.values for g in F]), "list"
    arr = np.asarray(F, dtype=float)
    if arr.shape[-1] != len(grid):
        raise ValueError("grid mismatch")
    if arr.ndim == 1:
        return arr[None, :], "vector"
    return arr, "array"


def _wrap(out, kind, grid):
    if kind == "grid":
        return GridFunction(grid, out[0])
    if kind == "list":
        return [GridFunction(grid, v) for v in out]
    if kind == "vector":
        return out[0]
    return out


def _trapz_rows(A, F, dt):
    """``int_0^{t_i} A(t_i, s) F(s) ds`` for every i; F may be batched."""
    L = np.tril(A, -1)
    out = F @ L.T
    out -= 0.5 * A[:, 0] * F[..., 0:1]
    out += 0.5 * np.diagonal(A) * F
    out[..., 0] = 0.0
    return dt * out


def _apply_table(table, F, dt):
    K = table.shape[0]
    out = np.empty_like(F)
    for k in range(K):
        acc = 0.0
        for l in range(K):
            acc = acc + _trapz_rows(table[k, l], F[..., l, :], dt)
        out[..., k, :] = acc
    return out


def apply_phi(K_table: ResolventTable, F):
    """``Phi(F)(t) = int_0^t K(t, s) F(s) ds + F(t)``."""
    grid = K_table.grid
    arr, kind = _values(F, grid, K_table.K)
    return _wrap(arr + _apply_table(K_table.K_values, arr, grid.dt), kind, grid)


def volterra_residual(kappa: KernelTable, G, F):
    """``G - int kappa G - F`` on the grid."""
    grid = kappa.grid
    g, kind = _values(G, grid, kappa.K)
    f, _ = _values(F, grid, kappa.K)
    return _wrap(g - _apply_table(kappa.kappa, g, grid.dt) - f, kind, grid)


def solve_volterra(kappa: KernelTable, F):
    """Solve ``G = int_0^t kappa(t, s) G(s) ds + F`` by marching in time."""
    grid = kappa.grid
    f, kind = _values(F, grid, kappa.K)
    kap, dt, K, n1 = kappa.kappa, grid.dt, kappa.K, len(grid)
    G = np.zeros_like(f)
    G[..., :, 0] = f[..., :, 0]
    diag = _diag(kap)
    implicit = np.any(diag)
    for i in range(1, n1):
        rhs = np.empty(f.shape[:-1])
        for k in range(K):
            acc = 0.0
            for l in range(K):
                row = kap[k, l, i, :i]
                acc = acc + (G[..., l, :i] @ row - 0.5 * row[0] * G[..., l, 0])
            rhs[..., k] = f[..., k, i] + dt * acc
        if implicit:
            M = np.eye(K) - 0.5 * dt * diag[:, :, i]
            rhs = np.linalg.solve(M, rhs[..., None])[..., 0] if K > 1 else rhs / M[0, 0]
        G[..., :, i] = rhs
    return _wrap(G, kind, grid)


def _toeplitz_conv(F, kern, dt):
    """``int_0^{t_i} kern(t_i - s) F(s) ds`` by trapezoid (batched on F)."""
    n1 = F.shape[-1]
    full = signal.fftconvolve(F, np.broadcast_to(kern, F.shape[:-1] + (n1,)), axes=-1)[..., :n1]
    out = full - 0.5 * F[..., 0:1] * kern - 0.5 * F * kern[0]
    out[..., 0] = 0.0
    return dt * out


def apply_psi(spec, F, grid=None):
    """``Psi(F)(t) = int_0^t F(s) h'(t - s) ds``.

    For a multi-class spec, ``F`` is (K, n+1) and class ``k`` receives
    ``sum_l sqrt(p_k / p_l) int h'_{kl}(t - s) F_l(s) ds``.
    """
    grid = _grid_of(F, grid)
    if isinstance(spec, ModelSpec):
        arr, kind = _values(F, grid, 1)
        return _wrap(_toeplitz_conv(arr, spec.h_prime(grid.t), grid.dt), kind, grid)
    arr, kind = _values(F, grid, spec.K)
    p = np.asarray(spec.p)
    out = np.empty_like(arr)
    for k in range(spec.K):
        acc = 0.0
        for l in range(spec.K):
            hp = spec.kernels[k][l].h_prime(grid.t)
            acc = acc + np.sqrt(p[k] / p[l]) * _toeplitz_conv(arr[..., l, :], hp, grid.dt)
        out[..., k, :] = acc
    return _wrap(out, kind, grid)


def apply_xi(limit, spec, F):
    """``Xi(F)(t) = f'(x_t) F(t)`` (class-wise for lists of limits)."""
    limits, mspec = _as_multi(limit, spec)
    grid = limits[0].grid
    arr, kind = _values(F, grid, mspec.K)
    fp = np.stack([mspec.rates[k].f_prime(limits[k].x.values) for k in range(mspec.K)])
    return _wrap(arr * fp, kind, grid)


def _grid_of(F, grid=None):
    if grid is not None:
        return grid
    if isinstance(F, GridFunction):
        return F.grid
    if isinstance(F, (list, tuple)) and F and isinstance(F[0], GridFunction):
        return F[0].grid
    raise TypeError("array input needs an explicit grid")


def resolvent_lipschitz_constant(spec: ModelSpec, T):
    """Constant ``C_T`` with ``|K(t1, s) - K(t2, s)| <= C_T |t1 - t2|``.

    ``L = ||f'|| sup|h'|`` bounds the t-Lipschitz constant of kappa and
    ``M = M_T``; then ``C_T = L + M e^{M T} (L T + M)``.
    """
    M = spec.kappa_bound(T)
    L = spec.sup_f_prime * spec.kernel.sup_h_prime(T)
    return L + M * np.exp(M * T) * (L * T + M)
