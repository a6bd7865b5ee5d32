from math import factorial

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import eval_legendre, sph_harm_y

from ballreg.harmonics import (elm2ind, flm_reality_residual, ind2elm, so3_grid, sphere_grid,
                               sht_forward, sht_forward_adjoint, sht_inverse, sht_inverse_adjoint,
                               wigner_d, wigner_d_table, wigner_forward, wigner_inverse, wigner_size)

from conftest import random_coeffs


def d_explicit(j, mp, m, beta):
    """Textbook factorial sum for d^j_{m'm}(beta)."""
    pref = float(factorial(j + mp) * factorial(j - mp) * factorial(j + m) * factorial(j - m)) ** 0.5
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    out = 0.0
    for k in range(max(0, m - mp), min(j + m, j - mp) + 1):
        den = factorial(j + m - k) * factorial(k) * factorial(mp - m + k) * factorial(j - mp - k)
        out += (-1) ** (mp - m + k) * c ** (2 * j + m - mp - 2 * k) * s ** (mp - m + 2 * k) / den
    return pref * out


def sy_explicit(s, ell, m, theta, phi):
    return (-1) ** s * np.sqrt((2 * ell + 1) / (4 * np.pi)) * d_explicit(ell, m, -s, theta) * np.exp(1j * m * phi)


def random_flm(rng, L, spin=0):
    c = random_coeffs(rng, L * L)
    for ell in range(abs(spin)):
        c[ell * ell:(ell + 1) ** 2] = 0
    return c


def test_index_round_trip():
    for i in range(100):
        ell, m = ind2elm(i)
        assert elm2ind(ell, m) == i and abs(m) <= ell


def test_wigner_d_trivial():
    assert wigner_d(0, 0, 0, 1.234) == pytest.approx(1.0)
    b = np.linspace(0, np.pi, 7)
    np.testing.assert_allclose(wigner_d(1, 0, 0, b), np.cos(b), atol=1e-14)


@pytest.mark.parametrize("ell", range(11))
def test_wigner_d00_is_legendre(ell):
    b = np.linspace(0, np.pi, 13)
    np.testing.assert_allclose(wigner_d(ell, 0, 0, b), eval_legendre(ell, np.cos(b)), atol=1e-13)


@given(st.integers(0, 12), st.data(), st.floats(0, np.pi))
def test_wigner_d_matches_factorial_sum(ell, data, beta):
    m = data.draw(st.integers(-ell, ell))
    n = data.draw(st.integers(-ell, ell))
    assert wigner_d(ell, m, n, beta) == pytest.approx(d_explicit(ell, m, n, beta), abs=1e-12)


def test_wigner_d_out_of_range():
    with pytest.raises(ValueError):
        wigner_d(2, 3, 0, 0.1)


def test_wigner_d_stable_at_high_degree():
    b = np.linspace(0.01, np.pi - 0.01, 5)
    col = wigner_d_table(301, b, ns=[2])[300, :, 0, :]
    # each column of a rotation matrix has unit norm
    np.testing.assert_allclose(np.sum(col**2, axis=0), 1.0, atol=1e-10)


def test_grid_shape():
    g = sphere_grid(6)
    assert g.n_phi >= 2 * 6 - 1 and g.shape == (6, 11)
    assert np.all(g.theta_weights > 0)
    assert np.sum(g.pixel_weights) == pytest.approx(4 * np.pi, rel=1e-14)


@pytest.mark.parametrize("spin", [0, 1, -1, 2, -2])
def test_harmonics_match_explicit_formula(spin):
    L = 6
    g = sphere_grid(L)
    th, ph = np.meshgrid(g.thetas, g.phis, indexing="ij")
    for ell in range(abs(spin), L):
        for m in range(-ell, ell + 1):
            c = np.zeros(L * L, complex)
            c[elm2ind(ell, m)] = 1
            np.testing.assert_allclose(sht_inverse(c, L, spin), sy_explicit(spin, ell, m, th, ph), atol=1e-12)


def test_spin0_matches_scipy():
    L = 8
    g = sphere_grid(L)
    th, ph = np.meshgrid(g.thetas, g.phis, indexing="ij")
    for ell in range(L):
        for m in range(-ell, ell + 1):
            c = np.zeros(L * L, complex)
            c[elm2ind(ell, m)] = 1
            np.testing.assert_allclose(sht_inverse(c, L), sph_harm_y(ell, m, th, ph), atol=1e-12)


@pytest.mark.parametrize("L", [4, 16, 64])
@pytest.mark.parametrize("spin", [0, 2, -1])
def test_orthonormality_under_quadrature(L, spin):
    eye = np.eye(L * L, dtype=complex)
    for ell in range(abs(spin)):
        eye[ell * ell:(ell + 1) ** 2] = 0
    Y = sht_inverse(eye, L, spin)  # (L*L, L, 2L-1)
    # weighted analysis of each basis field gives the quadrature Gram matrix
    G = sht_forward(Y, L, spin).T
    ref = eye.real.copy()
    assert np.max(np.abs(G - ref)) < 1e-12


def test_constant_field():
    L = 8
    c = sht_forward(np.ones((L, 2 * L - 1)), L)
    ref = np.zeros(L * L)
    ref[0] = 2 * np.sqrt(np.pi)
    np.testing.assert_allclose(c, ref, atol=1e-12)
    np.testing.assert_allclose(sht_inverse(ref, L), 1.0, atol=1e-12)
    assert not np.any(sht_inverse(np.zeros(L * L), L))


def test_y10_samples():
    L = 5
    g = sphere_grid(L)
    th, ph = np.meshgrid(g.thetas, g.phis, indexing="ij")
    c = sht_forward(sph_harm_y(1, 0, th, ph), L)
    ref = np.zeros(L * L)
    ref[elm2ind(1, 0)] = 1
    np.testing.assert_allclose(c, ref, atol=1e-13)


@pytest.mark.parametrize("L", [4, 8, 16, 32])
@pytest.mark.parametrize("spin", [0, 1, -1, 2, -2])
@pytest.mark.parametrize("method", ["fft", "direct"])
def test_sht_round_trip(L, spin, method, rng):
    c = random_flm(rng, L, spin)
    back = sht_forward(sht_inverse(c, L, spin, method), L, spin, method)
    assert np.max(np.abs(back - c)) < 1e-11
    for ell in range(abs(spin)):
        assert not np.any(back[ell * ell:(ell + 1) ** 2] * 0 != 0)


def test_spin_lowering_exact_zero(rng):
    L = 8
    f = rng.standard_normal((L, 2 * L - 1)) + 1j * rng.standard_normal((L, 2 * L - 1))
    c = sht_forward(f, L, 2)
    assert np.all(c[:4] == 0)


@pytest.mark.parametrize("L", [5, 12])
def test_direct_matches_fft(L, rng):
    c = random_flm(rng, L, 1)
    f1 = sht_inverse(c, L, 1, "fft")
    f2 = sht_inverse(c, L, 1, "direct")
    assert np.max(np.abs(f1 - f2)) < 1e-12
    assert np.max(np.abs(sht_forward(f1, L, 1, "fft") - sht_forward(f1, L, 1, "direct"))) < 1e-12


def test_reality(rng):
    L = 10
    f = rng.standard_normal((L, 2 * L - 1))
    c = sht_forward(sht_inverse(sht_forward(f, L), L).real, L)  # band-limited real field
    assert flm_reality_residual(c, L) < 1e-12
    assert np.max(np.abs(sht_inverse(c, L).imag)) < 1e-12


@given(st.integers(2, 12), st.integers(-1, 1), st.integers(0, 2**31))
def test_sht_adjoint(L, spin, seed):
    rng = np.random.default_rng(seed)
    c = random_flm(rng, L, spin)
    g = rng.standard_normal((L, 2 * L - 1)) + 1j * rng.standard_normal((L, 2 * L - 1))
    w = sphere_grid(L).pixel_weights
    lhs = np.sum(w * np.conj(sht_inverse(c, L, spin)) * g)
    rhs = np.vdot(c, sht_inverse_adjoint(g, L, spin))
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(lhs))
    lhs = np.vdot(sht_forward(g, L, spin), c)
    rhs = np.sum(w * np.conj(g) * sht_forward_adjoint(c, L, spin))
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(lhs))


def test_grid_mismatch():
    with pytest.raises(ValueError):
        sht_forward(np.zeros((4, 6)), 4)
    with pytest.raises(ValueError):
        sht_inverse(np.zeros(10), 4)
    with pytest.raises(ValueError):
        sht_forward(np.zeros((4, 7)), 4, spin=4)


# ---------------------------------------------------------------- SO(3)

def wigner_brute_synthesis(F, L, N):
    """Pointwise f = sum (2l+1)/(8pi^2) F conj(D) with D = e^{-ima} d e^{-ing}."""
    g = so3_grid(L, N)
    out = np.zeros((g.gammas.size, g.betas.size, g.alphas.size), complex)
    G, B, A = np.meshgrid(g.gammas, g.betas, g.alphas, indexing="ij")
    for ell in range(L):
        for m in range(-ell, ell + 1):
            for n in range(-min(ell, N - 1), min(ell, N - 1) + 1):
                coef = F[n + N - 1, elm2ind(ell, m)]
                if coef == 0:
                    continue
                dd = np.vectorize(lambda b: d_explicit(ell, m, n, b))(B)
                out += (2 * ell + 1) / (8 * np.pi**2) * coef * np.exp(1j * m * A) * dd * np.exp(1j * n * G)
    return out


def random_flmn(rng, L, N):
    F = random_coeffs(rng, wigner_size(L, N))
    for i, n in enumerate(range(-(N - 1), N)):
        for ell in range(abs(n)):
            F[i, ell * ell:(ell + 1) ** 2] = 0
    return F


@pytest.mark.parametrize("L, N", [(4, 1), (4, 3), (5, 2)])
def test_wigner_inverse_matches_brute_force(L, N, rng):
    F = random_flmn(rng, L, N)
    np.testing.assert_allclose(wigner_inverse(F, L, N), wigner_brute_synthesis(F, L, N), atol=1e-12)


def test_wigner_delta_is_constant():
    L, N = 6, 3
    F = np.zeros(wigner_size(L, N), complex)
    F[N - 1, 0] = 1
    f = wigner_inverse(F, L, N)
    np.testing.assert_allclose(f, 1 / (8 * np.pi**2), atol=1e-15)


@pytest.mark.parametrize("L", [4, 8, 16, 32])
@pytest.mark.parametrize("N", [1, 3])
def test_wigner_round_trip(L, N, rng):
    F = random_flmn(rng, L, N)
    back = wigner_forward(wigner_inverse(F, L, N), L, N)
    assert np.max(np.abs(back - F)) < 1e-11 * max(1.0, np.max(np.abs(F)))


def test_wigner_n1_reduces_to_sht(rng):
    L = 7
    g = so3_grid(L, 1)
    f2 = rng.standard_normal((L, 2 * L - 1))
    f2 = sht_inverse(sht_forward(f2, L), L)
    F = wigner_forward(f2[None], L, 1)[0]
    ells = np.repeat(np.arange(L), 2 * np.arange(L) + 1)
    # conj(D^l_m0) = sqrt(4pi/(2l+1)) Y_lm, and the gamma integral gives 2pi
    expected = sht_forward(f2, L) * 2 * np.pi * np.sqrt(4 * np.pi / (2 * ells + 1))
    np.testing.assert_allclose(F, expected, atol=1e-11)
    assert g.shape == (1, L, 2 * L - 1)


def test_wigner_grid_mismatch():
    with pytest.raises(ValueError):
        wigner_forward(np.zeros((3, 4, 6)), 4, 2)
    with pytest.raises(ValueError):
        wigner_inverse(np.zeros((2, 16)), 4, 2)
    with pytest.raises(ValueError):
        so3_grid(4, 5)
