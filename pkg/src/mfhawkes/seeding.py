"""Counter-based random streams.

Every random number used by the toolkit is a pure function of a key
``(master_seed, domain, replicate, a, b, c)``.  There is no generator state,
so replicates can be computed in any order, on any number of threads, and a
stream can be re-read from any position.  The mixing function is the
SplitMix64 finalizer applied as a keyed hash chain.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import ndtri

__all__ = [
    "DOMAIN_MEASURE",
    "DOMAIN_GAUSS",
    "DOMAIN_AUX",
    "SeedPolicy",
    "stream_uniform",
    "derive_seed",
]

# Disjoint substreams.  Point-process measures and Gaussian drivers never
# share keys, which is what makes sigma draws independent of thinning.
DOMAIN_MEASURE = 1
DOMAIN_GAUSS = 2
DOMAIN_AUX = 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always", cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(inline="always", cache=True)
def stream_uniform(seed, domain, rep, a, b, c):
    """Uniform variate in the open interval (0, 1) for one key."""
    h = _mix64(np.uint64(seed) + _GOLDEN)
    h = _mix64(h ^ (np.uint64(domain) + _GOLDEN))
    h = _mix64(h ^ (np.uint64(rep) + _GOLDEN))
    h = _mix64(h ^ (np.uint64(a) + _GOLDEN))
    h = _mix64(h ^ (np.uint64(b) + _GOLDEN))
    h = _mix64(h ^ (np.uint64(c) + _GOLDEN))
    return (np.float64(h >> _S11) + 0.5) * _INV53


@njit(cache=True)
def _uniform_block(seed, domain, reps, a_idx, n, c):
    out = np.empty((reps.shape[0], a_idx.shape[0], n))
    for r in range(reps.shape[0]):
        for i in range(a_idx.shape[0]):
            for k in range(n):
                out[r, i, k] = stream_uniform(seed, domain, reps[r], a_idx[i], k, c)
    return out


def derive_seed(master_seed, tag):
    """Independent master seed for a sub-experiment labelled by ``tag``."""
    u = stream_uniform(np.uint64(master_seed), DOMAIN_AUX, 0, 0xFFFF, int(tag), 0)
    return int(u * 2.0**53) ^ (int(tag) << 53)


@dataclass(frozen=True)
class SeedPolicy:
    """Master seed plus replicate index.

    ``(master_seed, replicate, unit)`` selects an independent stream; the
    same triple always yields the same numbers.
    """

    master_seed: int
    replicate: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")
        if self.replicate < 0:
            raise ValueError("replicate index must be non-negative")

    def for_replicate(self, r):
        return SeedPolicy(self.master_seed, int(r))

    @property
    def key(self):
        return np.uint64(self.master_seed)

    def uniforms(self, domain, streams, n, replicates=None, counter=0):
        """Array of shape (replicates, len(streams), n) of U(0, 1) draws.

        ``streams`` indexes sub-streams within a replicate (units or
        classes); column ``k`` is the k-th number of each stream.
        """
        reps = np.atleast_1d(
            np.asarray(self.replicate if replicates is None else replicates, dtype=np.int64)
        )
        a_idx = np.atleast_1d(np.asarray(streams, dtype=np.int64))
        return _uniform_block(self.key, domain, reps, a_idx, int(n), int(counter))

    def normals(self, domain, streams, n, replicates=None, counter=0):
        """Standard normal draws via the inverse CDF of :meth:`uniforms`."""
        return ndtri(self.uniforms(domain, streams, n, replicates, counter))
