"""Spin spherical harmonic and Wigner transforms with exact quadrature.

Sampling uses Gauss-Legendre nodes in cos(theta) and 2L-1 equiangular
longitudes, which integrates products of band-limited spin harmonics
exactly.  Harmonic coefficients are stored flat at ``i = ell**2 + ell + m``.

Conventions::

    sY_lm(theta, phi) = (-1)^s sqrt((2l+1)/4pi) d^l_{m,-s}(theta) e^{i m phi}
    D^l_mn(a, b, g)   = e^{-i m a} d^l_mn(b) e^{-i n g}

Functions on SO(3) are sampled as arrays ``f[gamma, beta, alpha]`` and
expanded as ``f = sum (2l+1)/(8 pi^2) F^l_mn conj(D^l_mn)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from . import _direct

__all__ = [
    "elm2ind",
    "ind2elm",
    "wigner_d",
    "wigner_d_table",
    "SphereGrid",
    "SO3Grid",
    "sphere_grid",
    "so3_grid",
    "spin_sh_table",
    "sht_forward",
    "sht_inverse",
    "sht_inverse_adjoint",
    "sht_forward_adjoint",
    "flm_reality_residual",
    "wigner_forward",
    "wigner_inverse",
    "wigner_size",
]


def elm2ind(ell, m):
    return ell * ell + ell + m


def ind2elm(ind):
    ell = int(np.floor(np.sqrt(ind)))
    return ell, ind - ell * ell - ell


def _xlog(k, logx):
    return np.zeros_like(logx) if k == 0 else k * logx


def _seed_log_and_sign(ell0, m, n, c, s):
    """d^{ell0}_{mn} with ell0 = max(|m|, |n|), as (log|.|, sign)."""
    sign = 1.0
    if abs(n) > abs(m):
        # d_mn = (-1)^(m-n) d_nm
        sign = (-1.0) ** (m - n)
        m, n = n, m
    with np.errstate(divide="ignore"):
        logc = np.log(np.abs(c))
        logs = np.log(np.abs(s))
    logbin = 0.5 * (gammaln(2 * ell0 + 1) - gammaln(ell0 + n + 1) - gammaln(ell0 - n + 1))
    if m == ell0:
        sign = sign * (-1.0) ** (ell0 - n)
        logv = logbin + _xlog(ell0 + n, logc) + _xlog(ell0 - n, logs)
        sgn = sign * np.sign(c) ** (ell0 + n) * np.sign(s) ** (ell0 - n)
    else:
        logv = logbin + _xlog(ell0 - n, logc) + _xlog(ell0 + n, logs)
        sgn = sign * np.sign(c) ** (ell0 - n) * np.sign(s) ** (ell0 + n)
    return logv, sgn


def _d_columns(L, betas, ns):
    """Small Wigner d for all ell < L, all |m| <= ell and the requested n.

    Three-term recursion in ell at fixed (m, n), started from the closed form
    at ell = max(|m|, |n|).  Returns ``d[ell, m + L - 1, j, k]`` for
    ``n = ns[j]`` and ``beta = betas[k]`` (zero where |m| or |n| > ell).
    """
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    ns = [int(n) for n in ns]
    nb = betas.size
    out = np.zeros((L, 2 * L - 1, len(ns), nb))
    c = np.cos(betas / 2)
    s = np.sin(betas / 2)
    cb = np.cos(betas)
    ms = np.arange(-(L - 1), L)
    for j, n in enumerate(ns):
        if abs(n) >= L:
            continue
        prev = np.zeros((2 * L - 1, nb))
        cur = np.zeros((2 * L - 1, nb))
        for ell in range(abs(n), L):
            # advance every started (m) column from ell-1 to ell
            if ell > abs(n):
                lm1 = ell - 1
                active = np.abs(ms) <= lm1
                if np.any(active):
                    mm = ms[active].astype(float)
                    if lm1 == 0:
                        a = cb[None, :]
                        b = 0.0
                    else:
                        a = cb[None, :] - (mm * n / (lm1 * (lm1 + 1.0)))[:, None]
                        b = (np.sqrt((lm1**2 - mm**2) * (lm1**2 - n**2)) / (lm1 * (2 * lm1 + 1.0)))[:, None]
                    pref = (ell * (2 * lm1 + 1.0) / np.sqrt((ell**2 - mm**2) * (ell**2 - n**2)))[:, None]
                    new = pref * (a * cur[active] - b * prev[active])
                    prev[active] = cur[active]
                    cur[active] = new
            # seed columns that start at this ell
            for m in ms[np.abs(ms) <= ell]:
                if max(abs(m), abs(n)) == ell:
                    logv, sgn = _seed_log_and_sign(ell, int(m), n, c, s)
                    with np.errstate(under="ignore"):
                        cur[m + L - 1] = sgn * np.exp(logv)
                    prev[m + L - 1] = 0.0
            out[ell, :, j, :] = np.where((np.abs(ms) <= ell)[:, None], cur, 0.0)
    return out


def wigner_d(ell, m, n, beta):
    """Small Wigner d^ell_{mn}(beta) for scalar or array beta."""
    if ell < 0 or abs(m) > ell or abs(n) > ell:
        raise ValueError(f"indices out of range: ell={ell}, m={m}, n={n}")
    beta_arr = np.asarray(beta, dtype=float)
    d = _d_columns(ell + 1, beta_arr.ravel(), [n])[ell, m + ell, 0]
    if beta_arr.ndim == 0:
        return float(d[0])
    return d.reshape(beta_arr.shape)


def wigner_d_table(L, betas, ns=None):
    """Table ``d[ell, m + L - 1, n + L - 1, k]`` (or restricted to ``ns``)."""
    if ns is None:
        ns = range(-(L - 1), L)
    return _d_columns(L, betas, list(ns))


@dataclass(frozen=True, eq=False)
class SphereGrid:
    L: int
    n_theta: int
    n_phi: int
    thetas: np.ndarray
    phis: np.ndarray
    theta_weights: np.ndarray

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @property
    def pixel_weights(self):
        """Quadrature weight of each (theta, phi) sample."""
        return np.repeat(self.theta_weights[:, None] * (2 * np.pi / self.n_phi), self.n_phi, axis=1)


@dataclass(frozen=True, eq=False)
class SO3Grid:
    L: int
    N: int
    alphas: np.ndarray
    betas: np.ndarray
    gammas: np.ndarray
    beta_weights: np.ndarray

    @property
    def shape(self):
        return (self.gammas.size, self.betas.size, self.alphas.size)


def _gl_thetas(L):
    x, w = np.polynomial.legendre.leggauss(L)
    # descending cos(theta) -> ascending theta
    order = np.argsort(-x)
    thetas = np.arccos(x[order])
    for arr in (thetas, w):
        arr.setflags(write=False)
    return thetas, w[order]


@lru_cache(maxsize=None)
def sphere_grid(L):
    if L < 1:
        raise ValueError("L must be >= 1")
    thetas, w = _gl_thetas(L)
    n_phi = 2 * L - 1
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    phis.setflags(write=False)
    return SphereGrid(L=L, n_theta=L, n_phi=n_phi, thetas=thetas, phis=phis, theta_weights=w)


@lru_cache(maxsize=None)
def so3_grid(L, N):
    if N < 1 or N > L:
        raise ValueError(f"need 1 <= N <= L, got N={N}, L={L}")
    betas, w = _gl_thetas(L)
    alphas = 2 * np.pi * np.arange(2 * L - 1) / (2 * L - 1)
    gammas = 2 * np.pi * np.arange(2 * N - 1) / (2 * N - 1)
    return SO3Grid(L=L, N=N, alphas=alphas, betas=betas, gammas=gammas, beta_weights=w)


@lru_cache(maxsize=64)
def spin_sh_table(L, spin):
    """``T[m + L - 1, ell, k] = (-1)^s sqrt((2l+1)/4pi) d^l_{m,-s}(theta_k)``.

    Rows with ell < |spin| are zero.
    """
    grid = sphere_grid(L)
    d = _d_columns(L, grid.thetas, [-spin])[:, :, 0, :]  # (ell, m, k)
    ells = np.arange(L)
    norm = (-1.0) ** spin * np.sqrt((2 * ells + 1) / (4 * np.pi))
    table = np.ascontiguousarray(np.transpose(d * norm[:, None, None], (1, 0, 2)))
    table.setflags(write=False)
    return table


class _LegendreKernel:
    """Latitude stage of a separable transform for one azimuthal band.

    Tables are held in FFT order (row ``j`` <-> ``m = j`` or ``j - n_phi``),
    which equals a permutation since ``n_phi = 2L - 1``; this keeps every
    transform to a handful of array calls.
    """

    def __init__(self, table, weights, scale):
        # table: (m + L - 1, ell, k)
        nm, L, nk = table.shape
        self.L = L
        self.n_phi = nm
        ms = np.arange(-(L - 1), L)
        order = np.argsort(ms % nm)
        t = table[order]
        self.fwd = np.ascontiguousarray(t * (weights * scale)[None, None, :])
        self.inv = np.ascontiguousarray(np.transpose(t, (0, 2, 1)))
        self.table = np.ascontiguousarray(t)
        ms_fft = ms[order]
        self.ms = np.ascontiguousarray(ms_fft)
        lin = np.empty(L * L, dtype=int)
        for j, m in enumerate(ms_fft):
            for ell in range(abs(m), L):
                lin[elm2ind(ell, m)] = j * L + ell
        self.lin = lin
        phi = 2 * np.pi * np.arange(nm) / nm
        self.dft = np.exp(-1j * np.outer(phi, ms_fft))

    def analysis(self, samples, method="fft"):
        lead = samples.shape[:-2]
        nk = samples.shape[-2]
        x = samples.reshape(-1, nk, self.n_phi)
        if method == "direct":
            x = np.ascontiguousarray(x, dtype=complex)
            out = _direct.sht_analysis(x, self.fwd, self.ms, self.dft)
            return out.reshape(lead + (self.L * self.L,))
        if method == "fft":
            F = np.fft.fft(x, axis=-1)
        else:
            raise ValueError(f"unknown method {method!r}")
        R = np.matmul(self.fwd, np.transpose(F, (2, 1, 0)))  # (j, ell, b)
        out = R.reshape(self.n_phi * self.L, -1)[self.lin]
        return out.T.reshape(lead + (self.L * self.L,))

    def synthesis(self, flm, method="fft"):
        lead = flm.shape[:-1]
        c = flm.reshape(-1, self.L * self.L)
        nk = self.inv.shape[1]
        if method == "direct":
            c = np.ascontiguousarray(c, dtype=complex)
            out = _direct.sht_synthesis(c, self.table, self.ms, self.dft, nk)
            return out.reshape(lead + (nk, self.n_phi))
        Z = np.zeros((self.n_phi * self.L, c.shape[0]), dtype=complex)
        Z[self.lin] = c.T
        G = np.matmul(self.inv, Z.reshape(self.n_phi, self.L, -1))  # (j, k, b)
        if method == "fft":
            g = np.fft.ifft(G, axis=0) * self.n_phi
        else:
            raise ValueError(f"unknown method {method!r}")
        return np.transpose(g, (2, 1, 0)).reshape(lead + (nk, self.n_phi))


@lru_cache(maxsize=64)
def _sht_kernel(L, spin):
    grid = sphere_grid(L)
    return _LegendreKernel(spin_sh_table(L, spin), grid.theta_weights, 2 * np.pi / grid.n_phi)


def _check_spin(L, spin):
    if abs(spin) >= L:
        raise ValueError(f"|spin| must be < L (spin={spin}, L={L})")


def sht_forward(samples, L, spin=0, method="fft"):
    """Spin-s harmonic analysis by exact quadrature.

    Parameters
    ----------
    samples : array_like, shape (..., L, 2L-1)
        Field sampled on :func:`sphere_grid`; leading axes are batched.
    L : int
        Angular band-limit.
    spin : int
    method : {"fft", "direct"}
        Longitude sums by FFT or by direct summation.

    Returns
    -------
    ndarray, shape (..., L*L), complex
    """
    _check_spin(L, spin)
    samples = np.asarray(samples)
    if samples.shape[-2:] != (L, 2 * L - 1):
        raise ValueError(f"samples trailing shape {samples.shape[-2:]} != grid {(L, 2 * L - 1)}")
    return _sht_kernel(L, spin).analysis(samples, method)


def sht_inverse(flm, L, spin=0, method="fft"):
    """Spin-s harmonic synthesis on :func:`sphere_grid`; inverse of :func:`sht_forward`."""
    _check_spin(L, spin)
    flm = np.asarray(flm)
    if flm.shape[-1] != L * L:
        raise ValueError(f"expected {L * L} coefficients, got {flm.shape[-1]}")
    return _sht_kernel(L, spin).synthesis(flm, method)


def sht_inverse_adjoint(samples, L, spin=0, method="fft"):
    """Adjoint of synthesis under the quadrature-weighted sample product.

    This is quadrature-weighted analysis, i.e. :func:`sht_forward`.
    """
    return sht_forward(samples, L, spin, method)


def sht_forward_adjoint(flm, L, spin=0, method="fft"):
    return sht_inverse(flm, L, spin, method)


def flm_reality_residual(flm, L):
    """Max |f_{l,-m} - (-1)^m conj(f_lm)|; zero for spin-0 real fields."""
    res = 0.0
    for ell in range(L):
        for m in range(1, ell + 1):
            a = flm[..., elm2ind(ell, -m)]
            b = (-1) ** m * np.conj(flm[..., elm2ind(ell, m)])
            res = max(res, float(np.max(np.abs(a - b))))
    return res


def wigner_size(L, N):
    return (2 * N - 1, L * L)


@lru_cache(maxsize=32)
def _so3_kernels(L, N):
    grid = so3_grid(L, N)
    ns = list(range(-(N - 1), N))
    d = _d_columns(L, grid.betas, ns)  # (ell, m, n, k)
    scale = 2 * np.pi / grid.alphas.size
    return [_LegendreKernel(np.transpose(d[:, :, i, :], (1, 0, 2)), grid.beta_weights, scale)
            for i in range(len(ns))]


def wigner_forward(samples, L, N):
    """Wigner analysis of ``samples[..., gamma, beta, alpha]``.

    Returns coefficients of shape ``(..., 2N-1, L*L)`` indexed
    ``[n + N - 1, ell**2 + ell + m]``.
    """
    grid = so3_grid(L, N)
    samples = np.asarray(samples)
    if samples.shape[-3:] != grid.shape:
        raise ValueError(f"samples trailing shape {samples.shape[-3:]} != grid {grid.shape}")
    nG = grid.gammas.size
    ng = np.arange(-(N - 1), N)
    fg = np.fft.fft(samples, axis=-3)[..., ng % nG, :, :] * (2 * np.pi / nG)
    kernels = _so3_kernels(L, N)
    return np.stack([k.analysis(fg[..., i, :, :]) for i, k in enumerate(kernels)], axis=-2)


def wigner_inverse(flmn, L, N):
    """Synthesis ``f = sum (2l+1)/(8pi^2) F^l_mn e^{i m a} d^l_mn(b) e^{i n g}``."""
    grid = so3_grid(L, N)
    flmn = np.asarray(flmn)
    if flmn.shape[-2:] != wigner_size(L, N):
        raise ValueError(f"expected trailing shape {wigner_size(L, N)}, got {flmn.shape[-2:]}")
    ells = np.arange(L)
    scale = np.repeat((2 * ells + 1) / (8 * np.pi**2), 2 * ells + 1)
    kernels = _so3_kernels(L, N)
    G = np.stack([k.synthesis(flmn[..., i, :] * scale) for i, k in enumerate(kernels)], axis=-3)
    nG = grid.gammas.size
    ng = np.arange(-(N - 1), N)
    full = np.zeros(G.shape[:-3] + (nG,) + G.shape[-2:], dtype=complex)
    full[..., ng % nG, :, :] = G
    return np.fft.ifft(full, axis=-3) * nG
