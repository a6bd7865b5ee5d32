"""Directional scale-discretized wavelets on the ball.

The harmonic plane ``(ell, p)`` is tiled by smooth compactly supported
kernels.  In each direction a 1D partition of unity is built from the
Schwartz bump ``s(t) = exp(-1/(1 - t**2))``; the 2D wavelets are tensor
products ``kappa_j(ell) * kappa_j'(p)`` and the scaling kernel collects the
remainder, so that

    |Upsilon_lp|^2 + sum_{j, j', n} |Psi^{jj'}_lnp|^2 = 1

at every harmonic index.  Angular kernels are split over ``n`` with an
azimuthal band ``N`` for directional sensitivity.

Coefficients are held in harmonic space with Parseval normalization:
the wavelet coefficient of ``f`` for block ``(j, j')`` is
``f_lmp * conj(Psi^{jj'}_lnp)``, so analysis is an isometry of coefficient
space and synthesis is its adjoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil, comb, log

import numpy as np
from scipy.integrate import quad

from .ball import BallBandProfile, BallCoeffs, ball_plan
from .harmonics import wigner_inverse

__all__ = [
    "Tiling",
    "WaveletCoeffs",
    "smooth_partition",
    "scale_kernel",
    "directional_split",
    "build_tiling",
    "identity_residual",
    "wavelet_analysis",
    "wavelet_synthesis",
    "wavelet_analysis_adjoint",
    "wavelet_synthesis_adjoint",
    "wigner_block",
    "sample_wavelet_map",
]


def _bump(t):
    if abs(t) >= 1.0:
        return 0.0
    return np.exp(-1.0 / (1.0 - t * t))


def _bump_on(t, lam):
    # bump rescaled to the interval (1/lam, 1)
    return _bump(2.0 * lam / (lam - 1.0) * (t - 1.0 / lam) - 1.0)


@lru_cache(maxsize=64)
def _phi2_norm(lam):
    val, _ = quad(lambda t: _bump_on(t, lam) / t, 1.0 / lam, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


def smooth_partition(t, lam):
    """Smooth step ``Phi^2(t)``: 1 for ``t <= 1/lam``, 0 for ``t >= 1``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(t)
    norm = _phi2_norm(float(lam))
    for i, ti in enumerate(t):
        if ti <= 1.0 / lam:
            out[i] = 1.0
        elif ti >= 1.0:
            out[i] = 0.0
        else:
            val, _ = quad(lambda u: _bump_on(u, lam) / u, ti, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
            out[i] = min(1.0, val / norm)
    return out


def scale_kernel(n, lam, j):
    """1D wavelet kernel ``kappa_j(k)`` for ``k = 0..n-1``.

    Its support is the open interval ``(lam**(j-1), lam**(j+1))``.
    """
    k = np.arange(n, dtype=float)
    sq = smooth_partition(k / lam ** (j + 1), lam) - smooth_partition(k / lam**j, lam)
    return np.sqrt(np.clip(sq, 0.0, None))


def _scaling_1d(n, lam, j0):
    return smooth_partition(np.arange(n, dtype=float) / lam**j0, lam)  # squared


def directional_split(L, N):
    """Array ``zeta[ell, n + N - 1]`` with ``sum_n |zeta|^2 = 1`` wherever nonzero.

    Only ``n`` of the parity of ``N - 1`` and ``|n| <= min(N - 1, ell)`` carry
    weight, following binomial coefficients; ``N = 1`` gives ``zeta = 1`` at
    ``n = 0``.
    """
    zeta = np.zeros((L, 2 * N - 1), dtype=complex)
    nu = 1.0 if (N - 1) % 2 == 0 else 1j
    for ell in range(L):
        gamma = min(N - 1, ell - (1 + (-1) ** (N + ell)) // 2)
        if gamma < 0:
            continue
        for n in range(-gamma, gamma + 1, 2):
            zeta[ell, n + N - 1] = nu * np.sqrt(comb(gamma, (gamma - n) // 2) / 2.0**gamma)
    return zeta


def _top_scale(n, lam):
    return max(0, ceil(log(n - 1) / log(lam) - 1e-12)) if n > 2 else 0


@dataclass(frozen=True, eq=False)
class Tiling:
    """Scaling and wavelet kernels on the ``(ell, p)`` harmonic plane.

    ``scaling_kernel[ell, p]`` is real.  ``wavelet_kernels[(j, jr)]`` has
    shape ``(L, 2N-1, P)`` and is indexed ``[ell, n + N - 1, p]``.
    """

    profile: BallBandProfile
    N: int
    lam_ang: float
    lam_rad: float
    J0_ang: int
    J0_rad: int
    J_ang: int
    J_rad: int
    scaling_kernel: np.ndarray = field(repr=False)
    wavelet_kernels: dict = field(repr=False)
    # kernels expanded over m: (block, p, n, ell**2 + ell + m)
    _stack: np.ndarray = field(repr=False, default=None)

    @property
    def L(self):
        return self.profile.L

    @property
    def P(self):
        return self.profile.P

    @property
    def keys(self):
        return list(self.wavelet_kernels)

    def prior_weights(self, include_scaling=True):
        """Multiplier ``k[p, lm]`` with ``||analysis(f)||_1 = sum k |f|``."""
        w = np.abs(self._stack).sum(axis=(0, 2))
        if include_scaling:
            w = w + _expand_m(self.scaling_kernel.T, self.L)
        return w


def _expand_m(arr, L):
    # repeat the trailing ell axis over m: (..., L) -> (..., L*L)
    ells = np.arange(L)
    return np.repeat(arr, 2 * ells + 1, axis=-1)


def build_tiling(profile, N=1, lam_ang=2.0, lam_rad=2.0, J0_ang=0, J0_rad=0):
    """Construct an admissible directional tiling for ``profile``.

    Parameters
    ----------
    profile : BallBandProfile
    N : int
        Azimuthal band of the directional split, ``1 <= N <= L``.
    lam_ang, lam_rad : float
        Dilation factors (> 1) in ``ell`` and ``p``.
    J0_ang, J0_rad : int
        Lowest wavelet scales; content below them goes to the scaling kernel.
    """
    L, P = profile.L, profile.P
    if not (lam_ang > 1 and lam_rad > 1):
        raise ValueError("dilation factors must exceed 1")
    if not 1 <= N <= L:
        raise ValueError(f"directional band N must satisfy 1 <= N <= L (N={N}, L={L})")
    J_ang = _top_scale(L, lam_ang)
    J_rad = _top_scale(P, lam_rad)
    if J0_ang < 0 or J0_rad < 0 or J0_ang > J_ang or J0_rad > J_rad:
        raise ValueError("lowest scales must lie in [0, J]")

    a2 = _scaling_1d(L, lam_ang, J0_ang)
    r2 = _scaling_1d(P, lam_rad, J0_rad)
    # |U|^2 = 1 - (1 - a^2)(1 - r^2)
    scaling = np.sqrt(1.0 - np.outer(1.0 - a2, 1.0 - r2))

    zeta = directional_split(L, N)
    kernels = {}
    for j in range(J0_ang, J_ang + 1):
        ka = scale_kernel(L, lam_ang, j)
        if not ka.any():
            continue
        for jr in range(J0_rad, J_rad + 1):
            kr = scale_kernel(P, lam_rad, jr)
            if not kr.any():
                continue
            kernels[(j, jr)] = (ka[:, None] * zeta)[:, :, None] * kr[None, None, :]
    for k in kernels.values():
        k.setflags(write=False)
    scaling.setflags(write=False)

    if kernels:
        stack = np.stack([np.transpose(k, (2, 1, 0)) for k in kernels.values()])  # (b, p, n, ell)
        stack = _expand_m(stack, L)
    else:
        stack = np.zeros((0, P, 2 * N - 1, L * L), dtype=complex)
    stack.setflags(write=False)
    t = Tiling(profile, N, float(lam_ang), float(lam_rad), J0_ang, J0_rad, J_ang, J_rad,
               scaling, kernels, stack)
    return t


def identity_residual(tiling):
    """Max over ``(ell, p)`` of ``|1 - |U|^2 - sum |Psi|^2|``."""
    total = tiling.scaling_kernel**2
    for k in tiling.wavelet_kernels.values():
        total = total + np.sum(np.abs(k) ** 2, axis=1)
    return float(np.max(np.abs(total - 1.0)))


@dataclass
class WaveletCoeffs:
    """Scaling coefficients ``(P, L*L)`` and stacked wavelet blocks.

    ``blocks[b]`` has shape ``(P, 2N-1, L*L)`` and holds the Wigner-Laguerre
    coefficients of block ``keys[b]`` indexed ``[p, n + N - 1, ell**2+ell+m]``.
    """

    scaling: np.ndarray
    blocks: np.ndarray
    keys: list

    @property
    def wavelets(self):
        return dict(zip(self.keys, self.blocks))

    def energy(self):
        return float(np.sum(np.abs(self.scaling) ** 2) + np.sum(np.abs(self.blocks) ** 2))

    def l1(self, include_scaling=True):
        s = float(np.sum(np.abs(self.blocks)))
        if include_scaling:
            s += float(np.sum(np.abs(self.scaling)))
        return s

    def to_vector(self):
        return np.concatenate([self.scaling.ravel(), self.blocks.ravel()])

    @classmethod
    def from_vector(cls, vec, tiling):
        n0 = tiling.P * tiling.L**2
        vec = np.asarray(vec, dtype=complex)
        if vec.size != n0 + tiling._stack.size:
            raise ValueError(f"vector length {vec.size} != {n0 + tiling._stack.size}")
        return cls(vec[:n0].reshape(tiling.P, -1), vec[n0:].reshape(tiling._stack.shape),
                   tiling.keys)

    def __add__(self, other):
        return WaveletCoeffs(self.scaling + other.scaling, self.blocks + other.blocks, self.keys)

    def __sub__(self, other):
        return WaveletCoeffs(self.scaling - other.scaling, self.blocks - other.blocks, self.keys)


def _coeff_values(f, tiling):
    if isinstance(f, BallCoeffs):
        if (f.profile.L, f.profile.P) != (tiling.L, tiling.P):
            raise ValueError(f"profile (L={f.profile.L}, P={f.profile.P}) does not match tiling "
                             f"(L={tiling.L}, P={tiling.P})")
        return f.values
    arr = np.asarray(f)
    if arr.shape != tiling.profile.coeff_shape:
        raise ValueError(f"coefficient shape {arr.shape} != {tiling.profile.coeff_shape}")
    return arr


def wavelet_analysis(f, tiling):
    """Scaling and directional wavelet coefficients of ``f`` (BallCoeffs)."""
    c = _coeff_values(f, tiling)
    ups = _expand_m(tiling.scaling_kernel.T, tiling.L)
    scaling = c * ups
    blocks = c[None, :, None, :] * np.conj(tiling._stack)
    return WaveletCoeffs(scaling, blocks, tiling.keys)


def wavelet_synthesis(w, tiling, profile=None):
    """Recombine coefficients: ``f = U s + sum Psi w``.  Exact on the range
    of :func:`wavelet_analysis`; for arbitrary ``w`` it is the adjoint of
    analysis."""
    ups = _expand_m(tiling.scaling_kernel.T, tiling.L)
    out = w.scaling * ups + np.einsum("bpnk,bpnk->pk", tiling._stack, w.blocks)
    return BallCoeffs(profile or tiling.profile, out)


def wavelet_analysis_adjoint(w, tiling):
    return wavelet_synthesis(w, tiling)


def wavelet_synthesis_adjoint(f, tiling):
    return wavelet_analysis(f, tiling)


def wigner_block(w, tiling, key):
    """Wavelet block ``key`` converted to the Wigner convention of
    :func:`ballreg.harmonics.wigner_inverse` (unit-norm SO(3) kernels)."""
    b = tiling.keys.index(key)
    ells = np.arange(tiling.L)
    fac = _expand_m(np.sqrt(8 * np.pi**2 / (2 * ells + 1)), tiling.L)
    return w.blocks[b] * fac


def sample_wavelet_map(w, tiling, key):
    """Debug sampling of one wavelet block on (radius, gamma, beta, alpha).

    The radial index is synthesized at the Laguerre nodes, the rotation
    part on the SO(3) grid.  For ``N = 1`` the result does not depend on
    gamma and its alpha-beta slice is a map on the sphere.
    """
    plan = ball_plan(tiling.profile)
    F = wigner_block(w, tiling, key)  # (p, n, lm)
    shells = np.tensordot(plan.radial.basis_matrix, F, axes=(1, 0))
    return wigner_inverse(shells, tiling.L, tiling.N)
