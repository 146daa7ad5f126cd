"""Simulation of the interacting network and of its Poisson/Cox companions.

Unit ``i`` owns a Poisson random measure on ``[0, T] x [0, inf)``.  Inside
grid window ``w`` its points are generated in increasing height ``z``
(exponential gaps of rate ``dt``, independent uniform times), keyed by
``(seed, replicate, i, w, counter)``.  Any dominating level therefore reads
a prefix of the same point set, which is what couples the Hawkes network,
the iid Poisson processes with the limit intensity and the Cox processes.

A point ``(s, z)`` of unit ``i`` is a jump of ``Z_i`` iff
``z <= lambda(s-)``.  Thinning mode evaluates this exactly against a
certified window bound; Euler mode freezes the intensity at the window
start and keeps at most one jump per unit and window.
"""

import math
import types
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .limit import LimitSolution, cumulative_trapezoid
from .model import (
    HKIND_ERLANG,
    HKIND_GENERIC,
    EventPaths,
    GridFunction,
    ModelSpec,
    MultiClassSpec,
    TimeGrid,
    family_kernel,
    family_rate,
)
from .seeding import DOMAIN_AUX, DOMAIN_MEASURE, SeedPolicy, stream_uniform

__all__ = [
    "SimResult",
    "SimulationError",
    "EulerTruncationWarning",
    "simulate_hawkes",
    "simulate_hawkes_multiclass",
    "simulate_coupled_poisson",
    "simulate_ensemble",
    "thin_intensity",
    "intensity_from_events",
]

DEFAULT_BUDGET = 16
EULER_WARN_RATE = 1e-3
EULER_ERROR_RATE = 1e-2

_ST_OK, _ST_OVERFLOW, _ST_EXPLOSION = 0, 1, 2


class SimulationError(RuntimeError):
    pass


class EulerTruncationWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# compiled core
#
# The rate and kernel are looked up as globals rather than passed in, so the
# builtin-family build can be cached on disk.  User expressions get private
# copies of the two functions below with their own globals.

rate_fn = family_rate
kern_fn = family_kernel


@njit(inline="always", cache=True)
def _expo(seed, rep, unit, window, c):
    return -math.log(stream_uniform(seed, DOMAIN_MEASURE, rep, unit, window, 4 * c))


@njit(inline="always", cache=True)
def _time_u(seed, rep, unit, window, c):
    return stream_uniform(seed, DOMAIN_MEASURE, rep, unit, window, 4 * c + 1)


@njit(nogil=True, cache=True)
def _advance(A, B, hkind, hpar, t_from, t_to):
    d = t_to - t_from
    if d <= 0.0:
        return
    K = A.shape[0]
    for k in range(K):
        for l in range(K):
            if hkind[k, l] == 1:
                e = math.exp(-hpar[k, l, 1] * d)
                B[k, l] = e * (B[k, l] + d * A[k, l])
                A[k, l] = e * A[k, l]


@njit(nogil=True, cache=True)
def _u_class(k, t, t_state, A, B, hkind, hpar, ev_t, ev_cls, J, class_size):
    # Erlang states are held at t_state <= t and propagated without mutation
    K = A.shape[0]
    d = t - t_state
    u = 0.0
    for l in range(K):
        kind = hkind[k, l]
        if kind == 1:
            b = hpar[k, l, 1]
            e = math.exp(-b * d)
            u += hpar[k, l, 2] * b * b * e * (B[k, l] + d * A[k, l]) / class_size[l]
        elif kind == 0:
            acc = 0.0
            for e in range(J):
                if ev_cls[e] == l:
                    acc += kern_fn(k, l, t - ev_t[e], hpar)
            u += acc / class_size[l]
    return u


_GL_X = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_GL_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@njit(nogil=True, cache=True)
def _segment(mom, w, a, width, t0, t1, A, B, hkind, hpar, ev_t, ev_cls, J, class_size,
             fpar):
    """Add int u, int u (s-a)/width and int f(u) over [t0, t1] to window w.

    No jump falls inside (t0, t1), so u is smooth there and three-point
    Gauss-Legendre is accurate to roundoff at grid-scale widths.
    """
    d = t1 - t0
    if d <= 0.0:
        return
    K = A.shape[0]
    for q in range(3):
        tau = t0 + d * _GL_X[q]
        wq = d * _GL_W[q]
        theta = (tau - a) / width
        for k in range(K):
            u = _u_class(k, tau, t0, A, B, hkind, hpar, ev_t, ev_cls, J, class_size)
            mom[0, k, w] += wq * u
            mom[1, k, w] += wq * u * theta
            mom[2, k, w] += wq * rate_fn(k, u, fpar)


@njit(nogil=True, cache=True)
def _grow_f(a, n):
    b = np.empty(max(2 * a.shape[0], n))
    b[: a.shape[0]] = a
    return b


@njit(nogil=True, cache=True)
def _grow_i(a, n):
    b = np.empty(max(2 * a.shape[0], n), dtype=np.int64)
    b[: a.shape[0]] = a
    return b


@njit(nogil=True, cache=True)
def _network(fpar, hpar, hkind, unit_class, class_size, tgrid,
             seed, rep, euler, budget, sup_f, lip_f, hsup, hpsup, max_candidates):
    N = unit_class.shape[0]
    K = class_size.shape[0]
    n_steps = tgrid.shape[0] - 1

    ev_t = np.empty(1024)
    ev_u = np.empty(1024, dtype=np.int64)
    ev_cls = np.empty(1024, dtype=np.int64)
    J = 0
    Jc = np.zeros(K)

    A = np.zeros((K, K))
    B = np.zeros((K, K))
    t_state = 0.0

    lam_path = np.zeros((K, n_steps + 1))
    u_path = np.zeros((K, n_steps + 1))
    # stats: candidates, restarts, truncations, collisions, status, max ratio
    stats = np.zeros(6)
    mom = np.zeros((3, K, n_steps))

    zcur = np.empty(N)
    cnt = np.zeros(N, dtype=np.int64)
    c_t = np.empty(256)
    c_z = np.empty(256)
    c_u = np.empty(256, dtype=np.int64)
    bound = np.zeros(K)
    uk = np.zeros(K)

    for w in range(n_steps):
        a = tgrid[w]
        b = tgrid[w + 1]
        width = b - a
        if w > 0:
            _segment(mom, w - 1, tgrid[w - 1], tgrid[w] - tgrid[w - 1], t_state, a, A, B, hkind,
                     hpar, ev_t, ev_cls, J, class_size, fpar)
        _advance(A, B, hkind, hpar, t_state, a)
        t_state = a
        for k in range(K):
            uk[k] = _u_class(k, a, a, A, B, hkind, hpar, ev_t, ev_cls, J, class_size)
            u_path[k, w] = uk[k]
            lam_path[k, w] = rate_fn(k, uk[k], fpar)

        nc = 0
        if euler:
            for i in range(N):
                k = unit_class[i]
                z = _expo(seed, rep, i, w, 0) / width
                if z <= lam_path[k, w]:
                    if nc >= c_t.shape[0]:
                        c_t = _grow_f(c_t, nc + 1)
                        c_z = _grow_f(c_z, nc + 1)
                        c_u = _grow_i(c_u, nc + 1)
                    c_t[nc] = a + width * _time_u(seed, rep, i, w, 0)
                    c_z[nc] = z
                    c_u[nc] = i
                    nc += 1
                    z2 = z + _expo(seed, rep, i, w, 1) / width
                    if z2 <= lam_path[k, w]:
                        stats[2] += 1
        else:
            for k in range(K):
                drift = 0.0
                jump = 0.0
                for l in range(K):
                    drift += Jc[l] / class_size[l] * hpsup[k, l] * width
                    jump += min(hsup[k, l], hpsup[k, l] * width) * budget / class_size[l]
                bound[k] = min(sup_f[k], lam_path[k, w] + lip_f[k] * (drift + jump))
            for i in range(N):
                k = unit_class[i]
                c = 0
                z = _expo(seed, rep, i, w, 0) / width
                while z <= bound[k]:
                    if nc >= c_t.shape[0]:
                        if nc >= max_candidates:
                            stats[4] = _ST_EXPLOSION
                            return ev_t[:J], ev_u[:J], lam_path, u_path, mom, stats
                        c_t = _grow_f(c_t, nc + 1)
                        c_z = _grow_f(c_z, nc + 1)
                        c_u = _grow_i(c_u, nc + 1)
                    c_t[nc] = a + width * _time_u(seed, rep, i, w, c)
                    c_z[nc] = z
                    c_u[nc] = i
                    nc += 1
                    c += 1
                    z += _expo(seed, rep, i, w, c) / width
                zcur[i] = z
                cnt[i] = c
        stats[0] += nc

        order = np.argsort(c_t[:nc], kind="mergesort")
        accepted = 0
        idx = 0
        last = ev_t[J - 1] if J > 0 else 0.0
        while idx < nc:
            j = order[idx]
            s = c_t[j]
            i = c_u[j]
            k = unit_class[i]
            if s <= last:
                # equal times at 64-bit resolution: redraw until distinct
                stats[3] += 1
                r = 0
                while s <= last:
                    s = a + width * stream_uniform(seed, DOMAIN_AUX, rep, i, w, r)
                    r += 1
                    if r > 64:
                        s = np.nextafter(last, np.inf)
                c_t[j] = s
                rest = order[idx:]
                sub = np.argsort(c_t[rest], kind="mergesort")
                order[idx:] = rest[sub]
                continue
            if euler:
                accept = True
            else:
                _segment(mom, w, a, width, t_state, s, A, B, hkind, hpar, ev_t, ev_cls, J,
                         class_size, fpar)
                _advance(A, B, hkind, hpar, t_state, s)
                t_state = s
                lam = rate_fn(k, _u_class(k, s, s, A, B, hkind, hpar, ev_t, ev_cls, J, class_size), fpar)
                if bound[k] > 0.0:
                    stats[5] = max(stats[5], lam / bound[k])
                if lam > bound[k] * (1.0 + 1e-9) + 1e-300:
                    stats[4] = _ST_OVERFLOW
                    return ev_t[:J], ev_u[:J], lam_path, u_path, mom, stats
                accept = c_z[j] <= lam
            idx += 1
            if not accept:
                continue
            if euler:
                _segment(mom, w, a, width, t_state, s, A, B, hkind, hpar, ev_t, ev_cls, J,
                         class_size, fpar)
                _advance(A, B, hkind, hpar, t_state, s)
                t_state = s
            if J >= ev_t.shape[0]:
                ev_t = _grow_f(ev_t, J + 1)
                ev_u = _grow_i(ev_u, J + 1)
                ev_cls = _grow_i(ev_cls, J + 1)
            ev_t[J] = s
            ev_u[J] = i
            l_ev = unit_class[i]
            ev_cls[J] = l_ev
            J += 1
            Jc[l_ev] += 1
            last = s
            for kk in range(K):
                if hkind[kk, l_ev] == 1:
                    A[kk, l_ev] += 1.0
            if euler:
                continue
            accepted += 1
            if accepted >= budget and idx < nc:
                # budget exhausted: certify a new level from the current state
                stats[1] += 1
                accepted = 0
                rem = b - s
                grew = False
                for kk in range(K):
                    ukk = _u_class(kk, s, s, A, B, hkind, hpar, ev_t, ev_cls, J, class_size)
                    drift = 0.0
                    jump = 0.0
                    for l in range(K):
                        drift += Jc[l] / class_size[l] * hpsup[kk, l] * rem
                        jump += min(hsup[kk, l], hpsup[kk, l] * rem) * budget / class_size[l]
                    nb = min(sup_f[kk], rate_fn(kk, ukk, fpar) + lip_f[kk] * (drift + jump))
                    if nb > bound[kk]:
                        bound[kk] = nb
                        grew = True
                if grew:
                    # keep unprocessed candidates, add the new layer after s
                    keep = order[idx:]
                    nt = np.empty(keep.shape[0])
                    nz = np.empty(keep.shape[0])
                    nu = np.empty(keep.shape[0], dtype=np.int64)
                    for q in range(keep.shape[0]):
                        nt[q] = c_t[keep[q]]
                        nz[q] = c_z[keep[q]]
                        nu[q] = c_u[keep[q]]
                    nc = keep.shape[0]
                    c_t[:nc] = nt
                    c_z[:nc] = nz
                    c_u[:nc] = nu
                    for ii in range(N):
                        kk = unit_class[ii]
                        z = zcur[ii]
                        c = cnt[ii]
                        while z <= bound[kk]:
                            tt = a + width * _time_u(seed, rep, ii, w, c)
                            if tt > s:
                                if nc >= c_t.shape[0]:
                                    if nc >= max_candidates:
                                        stats[4] = _ST_EXPLOSION
                                        return ev_t[:J], ev_u[:J], lam_path, u_path, mom, stats
                                    c_t = _grow_f(c_t, nc + 1)
                                    c_z = _grow_f(c_z, nc + 1)
                                    c_u = _grow_i(c_u, nc + 1)
                                c_t[nc] = tt
                                c_z[nc] = z
                                c_u[nc] = ii
                                nc += 1
                                stats[0] += 1
                            c += 1
                            z += _expo(seed, rep, ii, w, c) / width
                        zcur[ii] = z
                        cnt[ii] = c
                    order = np.argsort(c_t[:nc], kind="mergesort")
                    idx = 0

    _segment(mom, n_steps - 1, tgrid[n_steps - 1], tgrid[n_steps] - tgrid[n_steps - 1], t_state,
             tgrid[n_steps], A, B, hkind, hpar, ev_t, ev_cls, J, class_size, fpar)
    _advance(A, B, hkind, hpar, t_state, tgrid[n_steps])
    for k in range(K):
        uk[k] = _u_class(k, tgrid[n_steps], tgrid[n_steps], A, B, hkind, hpar, ev_t, ev_cls, J, class_size)
        u_path[k, n_steps] = uk[k]
        lam_path[k, n_steps] = rate_fn(k, uk[k], fpar)
    return ev_t[:J], ev_u[:J], lam_path, u_path, mom, stats


@njit(nogil=True, cache=True)
def _thin_grid(rates, unit_class, tgrid, seed, rep):
    """Jumps of independent units thinned against piecewise-linear rates."""
    N = unit_class.shape[0]
    n_steps = tgrid.shape[0] - 1
    ev_t = np.empty(1024)
    ev_u = np.empty(1024, dtype=np.int64)
    J = 0
    c_t = np.empty(64)
    c_u = np.empty(64, dtype=np.int64)
    clipped = 0.0
    for w in range(n_steps):
        a = tgrid[w]
        b = tgrid[w + 1]
        width = b - a
        nc = 0
        for i in range(N):
            cls = unit_class[i]
            r0 = rates[cls, w]
            r1 = rates[cls, w + 1]
            top = max(r0, r1)
            if top <= 0.0:
                continue
            c = 0
            z = _expo(seed, rep, i, w, 0) / width
            while z <= top:
                frac = _time_u(seed, rep, i, w, c)
                lam = max(0.0, r0 + (r1 - r0) * frac)
                if z <= lam:
                    if nc >= c_t.shape[0]:
                        c_t = _grow_f(c_t, nc + 1)
                        c_u = _grow_i(c_u, nc + 1)
                    c_t[nc] = a + width * frac
                    c_u[nc] = i
                    nc += 1
                c += 1
                z += _expo(seed, rep, i, w, c) / width
        order = np.argsort(c_t[:nc], kind="mergesort")
        for q in range(nc):
            if J >= ev_t.shape[0]:
                ev_t = _grow_f(ev_t, J + 1)
                ev_u = _grow_i(ev_u, J + 1)
            ev_t[J] = c_t[order[q]]
            ev_u[J] = c_u[order[q]]
            J += 1
    return ev_t[:J], ev_u[:J]


_SPECIALIZED = {}


def _core_for(rate, kern):
    if rate is family_rate and kern is family_kernel:
        return _network
    key = (rate, kern)
    if key not in _SPECIALIZED:
        def clone(disp, extra):
            g = dict(disp.py_func.__globals__)
            g.update(extra)
            fn = types.FunctionType(disp.py_func.__code__, g, disp.py_func.__name__)
            return njit(nogil=True)(fn)

        u_class = clone(_u_class, {"kern_fn": kern})
        segment = clone(_segment, {"rate_fn": rate, "_u_class": u_class})
        _SPECIALIZED[key] = clone(_network, {"rate_fn": rate, "kern_fn": kern,
                                             "_u_class": u_class, "_segment": segment})
    return _SPECIALIZED[key]


# ---------------------------------------------------------------------------
# python surface


@dataclass(frozen=True, eq=False)
class SimResult:
    """One replicate of the network.

    ``lambda_paths[k]`` samples the class-k intensity (left limits) on the
    grid, ``u_paths[k]`` its argument ``sum_l (1/N_l) sum h_kl(t - tau)``,
    and ``Lambda_paths`` the trapezoid compensator.  ``compensator`` is the
    compensator integrated piecewise between jumps (exact up to roundoff in
    thinning mode, the frozen-window sum in Euler mode) and
    ``u_moments[0/1, k, w]`` hold ``int u`` and ``int u (s - t_w)/dt`` over
    window ``w``.
    """

    events: EventPaths
    lambda_paths: np.ndarray
    u_paths: np.ndarray
    Lambda_paths: np.ndarray
    mode: str
    seed: SeedPolicy
    class_sizes: tuple
    stats: dict = field(default_factory=dict)
    compensator: np.ndarray = None
    u_moments: np.ndarray = None

    @property
    def grid(self):
        return self.events.grid

    @property
    def K(self):
        return self.lambda_paths.shape[0]

    @property
    def lambda_path(self):
        return GridFunction(self.grid, self._single(self.lambda_paths))

    @property
    def Lambda_path(self):
        return GridFunction(self.grid, self._single(self.Lambda_paths))

    @property
    def u_path(self):
        return GridFunction(self.grid, self._single(self.u_paths))

    def _single(self, arr):
        if arr.shape[0] != 1:
            raise ValueError("multi-class result: index the per-class arrays instead")
        return arr[0]


def _class_layout(sizes):
    sizes = np.asarray(sizes, dtype=np.int64)
    return np.repeat(np.arange(sizes.size, dtype=np.int64), sizes), sizes.astype(float)


def _expected_truncation_rate(lam, sizes, grid):
    """Share of Euler jumps whose window would have held two or more points.

    Uses the Poisson probabilities of the frozen window rates rather than the
    realised truncation count, which is too noisy on small networks.
    """
    mu = lam[:, :-1] * np.diff(grid.t)
    p1 = -np.expm1(-mu)
    p2 = p1 - mu * np.exp(-mu)
    w = np.asarray(sizes, dtype=float)[:, None]
    total = float(np.sum(w * p1))
    return float(np.sum(w * p2)) / total if total > 0 else 0.0


def _simulate(mspec, sizes, grid, seed, mode, budget, max_candidates):
    if mode not in ("thinning", "euler"):
        raise ValueError(f"unknown mode {mode!r}")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rate, kern, fpar, hpar, hkind = mspec.compiled
    unit_class, class_size = _class_layout(sizes)
    K = mspec.K
    norms = mspec.kernel_norms(grid.T)
    sup_f = np.array([r.sup_f for r in mspec.rates], dtype=float)
    lip_f = np.array([r.lip_f for r in mspec.rates], dtype=float)
    args = (fpar, hpar, hkind, unit_class, class_size, np.asarray(grid.t), seed.key,
            seed.replicate, mode == "euler", int(budget), sup_f, lip_f,
            np.ascontiguousarray(norms[0]), np.ascontiguousarray(norms[1]),
            int(max_candidates))
    ev_t, ev_u, lam, u, mom, stats = _core_for(rate, kern)(*args)
    status = int(stats[4])
    if status == _ST_OVERFLOW:
        raise SimulationError(
            f"intensity exceeded its certified dominating level at replicate "
            f"{seed.replicate} after {len(ev_t)} jumps; the model constants "
            f"(lip_f={lip_f}, kernel norms={norms[:2].tolist()}) are too small"
        )
    if status == _ST_EXPLOSION:
        raise SimulationError(
            f"dominating level produced more than {max_candidates} candidates in one "
            f"window at replicate {seed.replicate}; intensity bound overflowed"
        )
    events = EventPaths(grid, int(sum(sizes)), ev_t.copy(), ev_u.copy(), unit_class,
                        seed.replicate)
    info = {
        "candidates": int(stats[0]),
        "restarts": int(stats[1]),
        "truncations": int(stats[2]),
        "collisions": int(stats[3]),
        "max_intensity_to_bound": float(stats[5]),
        "jumps": int(len(ev_t)),
    }
    if mode == "euler":
        rate_trunc = _expected_truncation_rate(lam, sizes, grid)
        info["truncation_rate"] = rate_trunc
        info["observed_truncation_rate"] = info["truncations"] / max(info["jumps"], 1)
        if rate_trunc > EULER_ERROR_RATE:
            raise SimulationError(
                f"Euler truncation rate {rate_trunc:.2%} exceeds 1%; refine the grid"
            )
        if rate_trunc > EULER_WARN_RATE:
            warnings.warn(
                f"Euler truncation rate {rate_trunc:.3%} exceeds 0.1%",
                EulerTruncationWarning, stacklevel=3,
            )
    Lam = cumulative_trapezoid(lam, grid.dt)
    if mode == "euler":
        # the scheme's intensity is frozen at each window start
        mom[2] = lam[:, :-1] * np.diff(grid.t)
    comp = np.zeros_like(lam)
    comp[:, 1:] = np.cumsum(mom[2], axis=1)
    return SimResult(events, lam, u, Lam, mode, seed, tuple(int(s) for s in sizes), info,
                     comp, mom[:2])


def simulate_hawkes(spec: ModelSpec, N, grid: TimeGrid, seed: SeedPolicy, mode="thinning",
                    budget=DEFAULT_BUDGET, max_candidates=10_000_000) -> SimResult:
    """One replicate of the N-unit network ``Z^N``."""
    if int(N) < 1:
        raise ValueError("N must be at least 1")
    return _simulate(spec.multiclass, (int(N),), grid, seed, mode, budget, max_candidates)


def simulate_hawkes_multiclass(spec: MultiClassSpec, N, grid: TimeGrid, seed: SeedPolicy,
                               mode="thinning", budget=DEFAULT_BUDGET,
                               max_candidates=10_000_000) -> SimResult:
    """One replicate of the K-class network; class sizes from ``spec.sizes(N)``."""
    return _simulate(spec, spec.sizes(N), grid, seed, mode, budget, max_candidates)


def thin_intensity(rates, sizes, grid: TimeGrid, seed: SeedPolicy) -> EventPaths:
    """Independent units thinned against deterministic class rates.

    ``rates`` has shape (K, n+1) and is interpolated linearly between grid
    points (negative parts clipped to 0).  Reads the same measure as the
    network simulator for equal seeds.
    """
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    unit_class, _ = _class_layout(sizes)
    if rates.shape != (len(sizes), len(grid)):
        raise ValueError("rates must have shape (K, n_steps + 1)")
    ev_t, ev_u = _thin_grid(rates, unit_class, np.asarray(grid.t), seed.key, seed.replicate)
    return EventPaths(grid, int(sum(sizes)), ev_t.copy(), ev_u.copy(), unit_class,
                      seed.replicate)


def simulate_coupled_poisson(spec, N, grid: TimeGrid, limit, seed: SeedPolicy) -> EventPaths:
    """iid Poisson processes with the limit intensity, sharing the network's measure."""
    limits = [limit] if isinstance(limit, LimitSolution) else list(limit)
    if any(L.grid != grid for L in limits):
        raise ValueError("limit solution lives on a different grid")
    sizes = (int(N),) if isinstance(spec, ModelSpec) else spec.sizes(N)
    rates = np.stack([L.lam.values for L in limits])
    if np.any(rates < 0):
        raise ValueError("limit intensity must be non-negative")
    return thin_intensity(rates, sizes, grid, seed)


def simulate_ensemble(spec, N, grid: TimeGrid, seed: SeedPolicy, replicates, mode="thinning",
                      threads=1, budget=DEFAULT_BUDGET, limit=None):
    """Replicates ``0..replicates-1``; with ``limit`` also the coupled Poisson paths.

    Results are ordered by replicate index and do not depend on ``threads``.
    """
    multi = isinstance(spec, MultiClassSpec)

    def job(r):
        s = seed.for_replicate(r)
        if multi:
            sim = simulate_hawkes_multiclass(spec, N, grid, s, mode, budget)
        else:
            sim = simulate_hawkes(spec, N, grid, s, mode, budget)
        if limit is None:
            return sim
        return sim, simulate_coupled_poisson(spec, N, grid, limit, s)

    if threads <= 1:
        return [job(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(replicates)))


def intensity_from_events(spec: ModelSpec, events: EventPaths, times=None):
    """Recompute ``f((1/N) sum_tau h(t - tau))`` over jumps strictly before t."""
    times = events.grid.t if times is None else np.asarray(times, dtype=float)
    out = np.empty(times.shape)
    for q, t in enumerate(times):
        past = events.times[events.times < t]
        out[q] = float(spec.f(np.sum(spec.h(t - past)) / events.unit_count))
    return out
