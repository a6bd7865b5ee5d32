"""Fourier-Laguerre transform on the ball R+ x S^2.

A field is sampled on the tensor grid (radial Gauss-Laguerre nodes) x
(Gauss-Legendre colatitudes) x (equiangular longitudes) and stored as an
array of shape ``(P, L, 2L-1)``.  Coefficients ``f_lmp`` are stored as an
array of shape ``(P, L*L)``; its C-order ravel gives the flat index
``p*L**2 + ell**2 + ell + m``.

Two inner products are available on sample space.  ``"quadrature"`` weights
each voxel by its quadrature weight and discretizes the continuous L2 product
on the ball exactly for band-limited fields; under it the synthesis
``ball_inverse`` is an isometry and its adjoint is ``ball_forward``.
``"euclidean"`` is the plain dot product of sample vectors, under which
the adjoint of synthesis is the *unweighted* analysis and differs from
``ball_forward``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _direct
from .harmonics import sht_forward, sht_inverse, sphere_grid
from .radial import build_radial_plan

__all__ = [
    "BallBandProfile",
    "BallCoeffs",
    "BallSamples",
    "BallPlan",
    "ball_plan",
    "ball_forward",
    "ball_inverse",
    "ball_forward_adjoint",
    "ball_inverse_adjoint",
    "coeff_index",
    "basis_function_samples",
    "is_conjugate_symmetric",
]

METRICS = ("quadrature", "euclidean")


@dataclass(frozen=True)
class BallBandProfile:
    L: int
    P: int
    spin: int = 0
    tau: float = 1.0

    def __post_init__(self):
        if self.L < 1 or self.P < 1:
            raise ValueError(f"bandlimits must be >= 1 (L={self.L}, P={self.P})")
        if abs(self.spin) >= self.L:
            raise ValueError(f"|spin| must be < L (spin={self.spin}, L={self.L})")
        if not self.tau > 0:
            raise ValueError("tau must be positive")

    @property
    def coeff_shape(self):
        return (self.P, self.L * self.L)

    @property
    def sample_shape(self):
        return (self.P, self.L, 2 * self.L - 1)

    @property
    def n_samples(self):
        return int(np.prod(self.sample_shape))


@dataclass(frozen=True, eq=False)
class BallPlan:
    profile: BallBandProfile
    radial: object
    sphere: object
    voxel_weights: np.ndarray = field(repr=False)


@lru_cache(maxsize=32)
def ball_plan(profile):
    radial = build_radial_plan(profile.P, profile.tau)
    sphere = sphere_grid(profile.L)
    vw = radial.weights[:, None, None] * sphere.pixel_weights[None, :, :]
    vw.setflags(write=False)
    return BallPlan(profile=profile, radial=radial, sphere=sphere, voxel_weights=vw)


@dataclass
class BallCoeffs:
    """Fourier-Laguerre coefficients, ``values[p, ell**2 + ell + m]``."""

    profile: BallBandProfile
    values: np.ndarray
    reality: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.profile.coeff_shape:
            if self.values.size == self.profile.P * self.profile.L**2:
                self.values = self.values.reshape(self.profile.coeff_shape)
            else:
                raise ValueError(f"coefficient shape {self.values.shape} != {self.profile.coeff_shape}")

    @property
    def flat(self):
        return self.values.ravel()

    def copy(self):
        return BallCoeffs(self.profile, self.values.copy(), self.reality)


@dataclass
class BallSamples:
    """Field values on the ball grid, ``values[radial node, theta, phi]``."""

    profile: BallBandProfile
    values: np.ndarray
    reality: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.profile.sample_shape:
            if self.values.size == self.profile.n_samples:
                self.values = self.values.reshape(self.profile.sample_shape)
            else:
                raise ValueError(f"sample shape {self.values.shape} != {self.profile.sample_shape}")
        if self.reality:
            if np.iscomplexobj(self.values):
                self.values = self.values.real.copy()

    @property
    def voxel_weights(self):
        return ball_plan(self.profile).voxel_weights

    @property
    def radii(self):
        return ball_plan(self.profile).radial.nodes

    def copy(self):
        return BallSamples(self.profile, self.values.copy(), self.reality)


def coeff_index(L, ell, m, p):
    return p * L * L + ell * ell + ell + m


def _as_samples(f, profile):
    if isinstance(f, BallSamples):
        return f.values, f.profile
    if profile is None:
        raise ValueError("profile required for raw sample arrays")
    arr = np.asarray(f)
    if arr.shape != profile.sample_shape:
        raise ValueError(f"sample shape {arr.shape} != {profile.sample_shape}")
    return arr, profile


def _as_coeffs(c, profile):
    if isinstance(c, BallCoeffs):
        return c.values, c.profile
    if profile is None:
        raise ValueError("profile required for raw coefficient arrays")
    arr = np.asarray(c)
    if arr.shape != profile.coeff_shape:
        raise ValueError(f"coefficient shape {arr.shape} != {profile.coeff_shape}")
    return arr, profile


def _check_metric(metric):
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")


def _analysis(values, profile, method="fft", order="angular-first"):
    plan = ball_plan(profile)
    wb = plan.radial.weights[:, None] * plan.radial.basis_matrix  # (node, p)
    if order == "angular-first":
        flm = sht_forward(values, profile.L, profile.spin, method)  # (node, lm)
        return _radial_sum(wb, flm, method)
    # radial first on raw samples, then the angular stage per radial index
    radial = _radial_sum(wb, values.reshape(profile.P, -1), method)
    return sht_forward(radial.reshape(values.shape), profile.L, profile.spin, method)


def _radial_sum(a, x, method):
    # out[q] = sum_p a[p, q] x[p]
    if method == "direct":
        return _direct.matmul_t(a, np.ascontiguousarray(x, dtype=complex))
    return a.T @ x


def _synthesis(coeffs, profile, method="fft"):
    plan = ball_plan(profile)
    shells = _radial_sum(np.ascontiguousarray(plan.radial.basis_matrix.T), coeffs, method)
    return sht_inverse(shells, profile.L, profile.spin, method)


def ball_forward(f, profile=None, method="fft", order="angular-first"):
    """Exact analysis of band-limited samples into Fourier-Laguerre coefficients.

    Parameters
    ----------
    f : BallSamples or ndarray of shape ``profile.sample_shape``
    profile : BallBandProfile, optional
        Needed only for raw arrays.
    method : {"fft", "direct"}
        Longitude sums by FFT or by direct summation.
    order : {"angular-first", "radial-first"}
        Both orders are exact; they agree to rounding.
    """
    values, profile = _as_samples(f, profile)
    reality = bool(getattr(f, "reality", False)) or not np.iscomplexobj(values)
    return BallCoeffs(profile, _analysis(values, profile, method, order), reality=reality)


def ball_inverse(c, profile=None, method="fft", reality=None):
    """Synthesis ``f(r_i, w) = sum_{p,l,m} f_lmp K_p(r_i) sY_lm(w)`` on the grid.

    With ``reality=True`` (default for reality-tagged coefficients) the
    imaginary rounding residue is dropped and real samples are returned.
    """
    values, profile = _as_coeffs(c, profile)
    if reality is None:
        reality = bool(getattr(c, "reality", False))
    out = _synthesis(values, profile, method)
    return BallSamples(profile, out.real if reality else out, reality=reality)


def ball_inverse_adjoint(f, profile=None, metric="quadrature", method="fft"):
    """Adjoint of :func:`ball_inverse`, mapping samples to coefficients.

    Under the quadrature metric this is the weighted analysis, identical to
    :func:`ball_forward`.  Under the euclidean metric it is the unweighted
    analysis ``sum_i f_i conj(Z_lmp(x_i))``.
    """
    _check_metric(metric)
    values, profile = _as_samples(f, profile)
    if metric == "euclidean":
        values = values / ball_plan(profile).voxel_weights
    return BallCoeffs(profile, _analysis(values, profile, method))


def ball_forward_adjoint(c, profile=None, metric="quadrature", method="fft"):
    """Adjoint of :func:`ball_forward`, mapping coefficients to samples."""
    _check_metric(metric)
    values, profile = _as_coeffs(c, profile)
    out = _synthesis(values, profile, method)
    if metric == "euclidean":
        out = out * ball_plan(profile).voxel_weights
    return BallSamples(profile, out)


def basis_function_samples(profile, ell, m, p):
    """Samples of the basis function Z_lmp = K_p Y_lm on the grid."""
    c = np.zeros(profile.coeff_shape, dtype=complex)
    c[p, ell * ell + ell + m] = 1.0
    return ball_inverse(BallCoeffs(profile, c)).values


def is_conjugate_symmetric(values, L, atol=1e-12):
    """True when every radial row obeys ``f_{l,-m} = (-1)^m conj(f_lm)``."""
    values = np.asarray(values).reshape(-1, L * L)
    for ell in range(L):
        for m in range(1, ell + 1):
            a = values[:, ell * ell + ell - m]
            b = (-1) ** m * np.conj(values[:, ell * ell + ell + m])
            if np.max(np.abs(a - b)) > atol:
                return False
    return True
