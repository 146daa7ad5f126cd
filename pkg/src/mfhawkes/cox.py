"""Cox-process approximation driven by the Gaussian intensity correction."""

from dataclasses import dataclass, field

import numpy as np

from .fluctuation import coupling_distance, sample_limit_batch
from .limit import LimitSolution
from .model import EventPaths, GridFunction, ModelSpec, TimeGrid
from .seeding import SeedPolicy
from .simulate import simulate_ensemble, thin_intensity
from .stats import two_sample_ks, variance_and_se
from .volterra import build_kappa

__all__ = [
    "CoxApproximation",
    "CoxComparison",
    "build_cox",
    "compare_cox_vs_hawkes",
    "negative_fraction",
    "MIN_REPLICATES",
]

MIN_REPLICATES = 100


@dataclass(frozen=True, eq=False)
class CoxApproximation:
    """One draw of ``lambda_hat = lambda + sigma / sqrt(N)`` with its processes.

    ``events`` are the Cox paths thinned against ``max(lambda_hat, 0)`` and
    ``baseline`` the Poisson paths thinned against ``lambda`` from the same
    point measures.  ``clipped_fraction`` is the share of [0, T] on which
    ``lambda_hat`` is negative.
    """

    grid: TimeGrid
    lambda_hat: GridFunction
    sigma: GridFunction
    events: EventPaths
    baseline: EventPaths
    N: int
    clipped_fraction: float


def negative_fraction(values, grid: TimeGrid):
    """Share of [0, T] where the piecewise-linear interpolant is negative."""
    v0, v1 = values[:-1], values[1:]
    frac = np.where((v0 < 0) & (v1 < 0), 1.0, 0.0)
    cross = (v0 < 0) != (v1 < 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        part = np.where(v0 < 0, v0 / (v0 - v1), v1 / (v1 - v0))
    frac = np.where(cross, part, frac)
    return float(np.sum(frac * np.diff(grid.t)) / grid.T)


def build_cox(limit: LimitSolution, sigma_draw: GridFunction, N, grid: TimeGrid,
              seed: SeedPolicy) -> CoxApproximation:
    """Cox processes for one intensity draw, coupled to Poisson baselines.

    ``sigma_draw`` must come from a stream independent of the point measures
    (the Gaussian domain of the seed policy is).  Each window is thinned
    against the larger endpoint value of the interpolated intensity, which
    dominates ``sup lambda + ||sigma|| / sqrt(N)`` from below but leaves the
    accepted points unchanged because the measure is read in height order.
    """
    if limit.grid != grid or sigma_draw.grid != grid:
        raise ValueError("limit, sigma and grid must share one grid")
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    lam = limit.lam.values
    hat = lam + sigma_draw.values / np.sqrt(N)
    clipped = negative_fraction(hat, grid)
    events = thin_intensity(np.maximum(hat, 0.0)[None, :], (N,), grid, seed)
    baseline = thin_intensity(lam[None, :], (N,), grid, seed)
    return CoxApproximation(grid, GridFunction(grid, hat), sigma_draw, events, baseline, N,
                            clipped)


@dataclass(frozen=True, eq=False)
class CoxComparison:
    """Hawkes, Cox and Poisson ensembles compared on a list of times.

    Variances are over replicates; ``ks_*`` compare the total count of one
    unit per replicate (unit ``r mod N`` in replicate ``r``), so each
    sample is iid across replicates.
    """

    times: np.ndarray
    var_hawkes: np.ndarray
    var_hawkes_se: np.ndarray
    var_cox: np.ndarray
    var_cox_se: np.ndarray
    ratio: np.ndarray
    lambda_limit: np.ndarray
    ks_cox: tuple
    ks_poisson: tuple
    clipped_fraction_mean: float
    clipped_fraction_max: float
    N: int
    replicates: int
    coupling_mean: float
    sigma_sup_mean: float
    extra: dict = field(default_factory=dict)

    def rows(self):
        for j, t in enumerate(self.times):
            yield {
                "t": float(t),
                "lambda_limit": float(self.lambda_limit[j]),
                "var_hawkes": float(self.var_hawkes[j]),
                "var_cox": float(self.var_cox[j]),
                "ratio": float(self.ratio[j]),
            }


def compare_cox_vs_hawkes(spec: ModelSpec, limit: LimitSolution, N, grid: TimeGrid, replicates,
                          seed: SeedPolicy, times=None, threads=1, kappa=None,
                          mode="thinning", return_paths=False):
    """Hawkes ensemble against the Cox approximation and the Poisson baseline."""
    replicates = int(replicates)
    if replicates < MIN_REPLICATES:
        raise ValueError(f"need at least {MIN_REPLICATES} replicates, got {replicates}")
    if limit.grid != grid:
        raise ValueError("limit solution lives on a different grid")
    if times is None:
        times = np.linspace(grid.T / 2, grid.T, 11)
    times = np.asarray(times, dtype=float)
    idx = np.array([grid.index(t) for t in times])

    sims = simulate_ensemble(spec, N, grid, seed, replicates, mode=mode, threads=threads)
    lam_hawkes = np.stack([s.lambda_paths[0] for s in sims])

    if kappa is None:
        kappa = build_kappa(limit, spec, grid)
    # the Cox ensemble takes the next block of replicate indices so that it is
    # independent of the Hawkes ensemble
    draws = sample_limit_batch(limit, spec, None, grid, seed, replicates, route="fixed_point",
                               kappa=kappa, start=replicates)
    cox = [build_cox(limit, GridFunction(grid, draws.sigma[r, 0]), N, grid,
                     seed.for_replicate(replicates + r)) for r in range(replicates)]
    lam_hat = np.stack([c.lambda_hat.values for c in cox])

    vh, vh_se = variance_and_se(lam_hawkes[:, idx])
    vc, vc_se = variance_and_se(lam_hat[:, idx])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(vh > 0, vc / vh, np.where(vc > 0, np.inf, 1.0))

    pick = lambda ev, r: ev.unit_counts()[r % N]
    ch = np.array([pick(s.events, r) for r, s in enumerate(sims)], dtype=float)
    cc = np.array([pick(c.events, r) for r, c in enumerate(cox)], dtype=float)
    cp = np.array([pick(c.baseline, r) for r, c in enumerate(cox)], dtype=float)
    clipped = np.array([c.clipped_fraction for c in cox])
    coup = float(np.mean([coupling_distance(c.events, c.baseline).mean() for c in cox]))
    out = CoxComparison(
        times=times, var_hawkes=vh, var_hawkes_se=vh_se, var_cox=vc, var_cox_se=vc_se,
        ratio=ratio, lambda_limit=limit.lam.values[idx],
        ks_cox=two_sample_ks(ch, cc), ks_poisson=two_sample_ks(ch, cp),
        clipped_fraction_mean=float(clipped.mean()), clipped_fraction_max=float(clipped.max()),
        N=int(N), replicates=replicates, coupling_mean=coup,
        sigma_sup_mean=float(np.mean(np.max(np.abs(draws.sigma[:, 0]), axis=-1))),
    )
    if return_paths:
        return out, lam_hawkes, lam_hat
    return out
