"""Uncertainty quantification from the MAP solution alone.

The credible region ``{x : h(x) <= eps'}`` uses the conservative threshold

    eps'_alpha = h(x_map) + sqrt(16 N log(3/alpha)) + N

with ``N`` the number of real unknowns.  Structure in a region is deemed
physical when a surrogate with that structure removed leaves the region;
local credible intervals push a uniform offset into a region until the
objective reaches the threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .ball import BallSamples, ball_forward, ball_inverse
from .solver import objective_value

__all__ = [
    "HpdThreshold",
    "Region",
    "TestResult",
    "hpd_threshold",
    "in_credible_set",
    "lowpass",
    "build_surrogate",
    "hypothesis_test",
    "local_credible_intervals",
    "write_lci_csv",
    "format_report",
]


@dataclass(frozen=True)
class HpdThreshold:
    alpha: float
    h_map: float
    N_dim: int
    epsilon_prime: float


def hpd_threshold(h_map, N_dim, alpha):
    """Approximate HPD level ``h_map + sqrt(16 N log(3/alpha)) + N``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if N_dim < 1:
        raise ValueError("N_dim must be >= 1")
    eps = h_map + np.sqrt(16.0 * N_dim * np.log(3.0 / alpha)) + N_dim
    return HpdThreshold(float(alpha), float(h_map), int(N_dim), float(eps))


@dataclass(frozen=True, eq=False)
class Region:
    """Set of voxels given as flat (C-order) indices into the sample grid."""

    indices: np.ndarray
    label: str = ""

    def __post_init__(self):
        idx = np.unique(np.asarray(self.indices, dtype=np.int64).ravel())
        if idx.size == 0:
            raise ValueError("region must be non-empty")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask, label=""):
        return cls(np.flatnonzero(np.asarray(mask).ravel()), label)

    @classmethod
    def block(cls, shape, p, theta, phi, label=""):
        """Axis-aligned block; each of ``p``, ``theta``, ``phi`` is ``(start, stop)``."""
        m = np.zeros(shape, dtype=bool)
        m[p[0]:p[1], theta[0]:theta[1], phi[0]:phi[1]] = True
        return cls.from_mask(m, label)

    def indicator(self, shape):
        n = int(np.prod(shape))
        if self.indices.min() < 0 or self.indices.max() >= n:
            raise ValueError("region indices outside the grid")
        out = np.zeros(n)
        out[self.indices] = 1.0
        return out.reshape(shape)

    @property
    def size(self):
        return int(self.indices.size)


def _values(x):
    return x.values if isinstance(x, BallSamples) else np.asarray(x)


def in_credible_set(x, obj, thr):
    return bool(objective_value(_values(x), obj) <= thr.epsilon_prime)


def lowpass(x, tiling):
    """Scaling-band-only reconstruction ``B^-1 (U^2 B x)``."""
    prof = tiling.profile
    xv = _values(x)
    c = ball_forward(xv, prof).values
    u2 = np.repeat(tiling.scaling_kernel.T ** 2, 2 * np.arange(tiling.L) + 1, axis=1)
    out = ball_inverse(u2 * c, prof).values
    return out.real if not np.iscomplexobj(xv) else out


def build_surrogate(x_map, region, tiling):
    """Copy of ``x_map`` with the region replaced by its low-pass version."""
    xv = _values(x_map)
    low = lowpass(xv, tiling)
    ind = region.indicator(xv.shape).astype(bool)
    return np.where(ind, low, xv)


@dataclass(frozen=True)
class TestResult:
    outcome: str
    h_surrogate: float
    epsilon_prime: float
    margin: float
    alpha: float
    region: str = ""

    @property
    def significant(self):
        return self.outcome == "significant"


def hypothesis_test(x_map, region, obj, alpha, tiling=None, h_map=None, N_dim=None):
    """Test whether the structure of ``x_map`` in ``region`` is physical.

    ``significant`` when the surrogate lies outside the approximate credible
    region, ``indeterminate`` otherwise.  ``margin = h(x_sur) - eps'``.
    """
    xv = _values(x_map)
    tiling = obj.tiling if tiling is None else tiling
    h_map = objective_value(xv, obj) if h_map is None else h_map
    N_dim = xv.size if N_dim is None else N_dim
    thr = hpd_threshold(h_map, N_dim, alpha)
    h_sur = objective_value(build_surrogate(xv, region, tiling), obj)
    outcome = "significant" if h_sur > thr.epsilon_prime else "indeterminate"
    return TestResult(outcome, float(h_sur), thr.epsilon_prime, float(h_sur - thr.epsilon_prime),
                      float(alpha), region.label)


def _saturate(h_of, eps, start, tol, max_double=200, max_bisect=200):
    # largest xi >= 0 with h_of(xi) <= eps
    lo, hi = 0.0, start
    for _ in range(max_double):
        if h_of(hi) > eps:
            break
        lo, hi = hi, 2.0 * hi
    else:
        return np.inf
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        hm = h_of(mid)
        if abs(hm - eps) <= tol * abs(eps):
            return mid
        if hm > eps:
            hi = mid
        else:
            lo = mid
    raise RuntimeError("bisection did not converge")


def local_credible_intervals(x_map, partition, obj, alpha, tol=1e-4, h_map=None, N_dim=None):
    """Per-region ``(lower, upper)`` bounds on the region mean.

    Parameters
    ----------
    x_map : array or BallSamples
    partition : list of Region
        Disjoint regions.
    obj : Objective
    alpha : float
    tol : float
        Relative tolerance on ``|h - eps'|`` at the saturated offsets.

    Returns
    -------
    list of (lower, upper); ``inf`` marks an unbounded side.
    """
    xv = _values(x_map)
    seen = set()
    for r in partition:
        s = set(r.indices.tolist())
        if s & seen:
            raise ValueError("partition regions overlap")
        seen |= s
    h_map = objective_value(xv, obj) if h_map is None else h_map
    thr = hpd_threshold(h_map, xv.size if N_dim is None else N_dim, alpha)
    out = []
    for r in partition:
        ind = r.indicator(xv.shape)
        vals = xv.ravel()[r.indices].real
        mean = float(vals.mean())
        span = float(vals.max() - vals.min())
        if span == 0:
            span = float(np.max(np.abs(xv))) or 1.0
        start = 0.01 * span
        up = _saturate(lambda t: objective_value(xv + t * ind, obj), thr.epsilon_prime, start, tol)
        dn = _saturate(lambda t: objective_value(xv - t * ind, obj), thr.epsilon_prime, start, tol)
        out.append((mean - dn, mean + up))
    return out


def write_lci_csv(partition, intervals, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "lower", "upper", "width"])
        for r, (lo, hi) in zip(partition, intervals):
            w.writerow([r.label, repr(float(lo)), repr(float(hi)), repr(float(hi - lo))])


def format_report(items):
    """``key: value`` lines from a mapping."""
    return "".join(f"{k}: {v}\n" for k, v in items.items())
