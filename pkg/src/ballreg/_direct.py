"""Compiled explicit-summation kernels (no FFT, no BLAS).

These back the ``method="direct"`` transforms.  Every sum is written out,
so their cost is the plain separable operation count.
"""

import numba
import numpy as np


@numba.njit(cache=True)
def sht_analysis(x, table, ms, dft):
    # x: (b, k, j) complex; table: (nm, L, k) real with weights folded in
    # dft: (j, nm) = exp(-i m phi_j)
    nb, nk, nj = x.shape
    nm, L, _ = table.shape
    out = np.zeros((nb, L * L), dtype=np.complex128)
    F = np.empty(nm, dtype=np.complex128)
    for b in range(nb):
        for k in range(nk):
            for mi in range(nm):
                acc = 0.0 + 0.0j
                for j in range(nj):
                    acc += x[b, k, j] * dft[j, mi]
                F[mi] = acc
            for mi in range(nm):
                m = ms[mi]
                am = m if m >= 0 else -m
                for ell in range(am, L):
                    out[b, ell * ell + ell + m] += table[mi, ell, k] * F[mi]
    return out


@numba.njit(cache=True)
def sht_synthesis(c, table, ms, dft, nk):
    # c: (b, L*L); returns (b, k, j) with exp(+i m phi_j) = conj(dft)
    nb = c.shape[0]
    nm, L, _ = table.shape
    nj = dft.shape[0]
    out = np.zeros((nb, nk, nj), dtype=np.complex128)
    G = np.empty(nm, dtype=np.complex128)
    for b in range(nb):
        for k in range(nk):
            for mi in range(nm):
                m = ms[mi]
                am = m if m >= 0 else -m
                acc = 0.0 + 0.0j
                for ell in range(am, L):
                    acc += table[mi, ell, k] * c[b, ell * ell + ell + m]
                G[mi] = acc
            for j in range(nj):
                acc = 0.0 + 0.0j
                for mi in range(nm):
                    acc += G[mi] * np.conj(dft[j, mi])
                out[b, k, j] = acc
    return out


@numba.njit(cache=True)
def matmul_t(a, x):
    # out[q, i] = sum_p a[p, q] * x[p, i]
    n, q = a.shape
    ni = x.shape[1]
    out = np.zeros((q, ni), dtype=np.complex128)
    for p in range(n):
        for r in range(q):
            w = a[p, r]
            for i in range(ni):
                out[r, i] += w * x[p, i]
    return out
