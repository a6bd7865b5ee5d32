"""Linear operators with paired adjoints, and the deconvolution/inpainting
measurement model ``Phi = M B^-1 K B``.

Every operator acts on plain arrays and carries descriptors of its input and
output spaces.  A space fixes the array shape and the weights of its inner
product ``<a, b> = sum w conj(a) b``; adjoints are taken with respect to
these weighted products.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ball import BallBandProfile, ball_forward, ball_inverse, ball_plan
from .wavelets import WaveletCoeffs, wavelet_analysis, wavelet_synthesis

__all__ = [
    "Space",
    "LinOp",
    "HarmonicKernel",
    "Mask",
    "sample_space",
    "coeff_space",
    "wavelet_space",
    "dot_test",
    "validate_adjoint",
    "identity_op",
    "diagonal_op",
    "ball_forward_op",
    "ball_inverse_op",
    "kernel_op",
    "mask_op",
    "wavelet_analysis_op",
    "wavelet_synthesis_op",
    "make_kernel",
    "make_mask",
    "make_sensing",
    "sensing_forward",
    "sensing_adjoint",
    "naive_inverse",
    "power_method",
    "dense_matrix",
    "rng_from_seed",
]


# independent Philox streams per purpose
TRUTH_STREAM, MASK_STREAM, NOISE_STREAM = 0, 1, 2


def rng_from_seed(seed, stream=0):
    """Counter-based Philox generator keyed by ``(seed, stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True, eq=False)
class Space:
    kind: str
    shape: tuple
    profile: BallBandProfile = None
    weights: np.ndarray = field(default=None, repr=False)

    def inner(self, a, b):
        """Complex inner product, conjugate-linear in ``a``."""
        if self.weights is None:
            return complex(np.vdot(a, b))
        return complex(np.sum(self.weights * np.conj(a) * b))

    def norm(self, a):
        return float(np.sqrt(max(self.inner(a, a).real, 0.0)))

    def random(self, rng, complex_=True):
        x = rng.standard_normal(self.shape)
        if complex_:
            x = x + 1j * rng.standard_normal(self.shape)
        return x

    def zeros(self):
        return np.zeros(self.shape, dtype=complex)


def sample_space(profile, weights="quadrature"):
    """Sample space of ``profile``.

    ``weights`` is ``"quadrature"`` (voxel weights), ``"euclidean"`` (plain
    dot product) or an explicit array of shape ``profile.sample_shape``.
    """
    if isinstance(weights, str):
        if weights == "quadrature":
            weights = ball_plan(profile).voxel_weights
        elif weights == "euclidean":
            weights = None
        else:
            raise ValueError(f"unknown sample metric {weights!r}")
    elif weights is not None:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != profile.sample_shape:
            raise ValueError("sample weights must match the sample grid")
    return Space("samples", profile.sample_shape, profile, weights)


def coeff_space(profile):
    return Space("coeffs", profile.coeff_shape, profile)


def wavelet_space(tiling):
    n = tiling.P * tiling.L**2 + tiling._stack.size
    return Space("wavelets", (n,), tiling.profile)


@dataclass(frozen=True, eq=False)
class LinOp:
    """Linear map with its adjoint under the space inner products."""

    in_space: Space
    out_space: Space
    apply: object = field(repr=False)
    adjoint_apply: object = field(repr=False)
    label: str = ""

    def __call__(self, x):
        return self.apply(x)

    @property
    def H(self):
        return LinOp(self.out_space, self.in_space, self.adjoint_apply, self.apply,
                     f"({self.label})^H")

    def __matmul__(self, other):
        if other.out_space.shape != self.in_space.shape:
            raise ValueError(f"cannot compose {self.label} after {other.label}")
        return LinOp(other.in_space, self.out_space,
                     lambda x: self.apply(other.apply(x)),
                     lambda y: other.adjoint_apply(self.adjoint_apply(y)),
                     f"{self.label} {other.label}")


def dot_test(op, rng, complex_=True):
    """Relative mismatch ``|<Ax, y> - <x, A^H y>| / (|Ax| |y|)`` on one random pair."""
    x = op.in_space.random(rng, complex_)
    y = op.out_space.random(rng, complex_)
    ax = op.apply(x)
    lhs = op.out_space.inner(ax, y)
    rhs = op.in_space.inner(x, op.adjoint_apply(y))
    scale = op.out_space.norm(ax) * op.out_space.norm(y)
    scale = max(scale, op.in_space.norm(x) * op.in_space.norm(op.adjoint_apply(y)), 1e-300)
    return abs(lhs - rhs) / scale


def validate_adjoint(op, n_pairs=20, rtol=1e-10, seed=0, complex_=True):
    """Run ``n_pairs`` dot tests; raise ``AssertionError`` on failure.

    Returns the largest relative mismatch.
    """
    rng = rng_from_seed(seed)
    worst = max(dot_test(op, rng, complex_) for _ in range(n_pairs))
    if worst > rtol:
        raise AssertionError(f"adjoint mismatch {worst:.3e} > {rtol:.1e} for {op.label}")
    return worst


def identity_op(space):
    return LinOp(space, space, lambda x: x, lambda y: y, "I")


def diagonal_op(space, d):
    """Pointwise multiplier; its adjoint multiplies by ``conj(d)``."""
    d = np.asarray(d)
    return LinOp(space, space, lambda x: d * x, lambda y: np.conj(d) * y, "diag")


# ---------------------------------------------------------------- transforms

def _weights_or_one(space):
    return 1.0 if space.weights is None else space.weights


def ball_forward_op(profile, metric="quadrature"):
    """``B``: samples -> coefficients (quadrature-weighted analysis)."""
    sp = sample_space(profile, metric)
    vw = ball_plan(profile).voxel_weights
    w = _weights_or_one(sp)

    def fwd(x):
        return ball_forward(x, profile).values

    def adj(c):
        # <Bx, c> = <x, B^-1 c>_vw = <x, vw/w B^-1 c>_w
        return ball_inverse(c, profile).values * (vw / w)

    return LinOp(sp, coeff_space(profile), fwd, adj, "B")


def ball_inverse_op(profile, metric="quadrature"):
    """``B^-1``: coefficients -> samples.  Its adjoint under sample weights
    ``w`` is ``B(w/vw * y)``, which equals ``B`` only when ``w = vw``."""
    sp = sample_space(profile, metric)
    vw = ball_plan(profile).voxel_weights
    w = _weights_or_one(sp)

    def fwd(c):
        return ball_inverse(c, profile).values

    def adj(y):
        return ball_forward(y * (w / vw), profile).values

    return LinOp(coeff_space(profile), sp, fwd, adj, "B^-1")


# ---------------------------------------------------------------- kernel

@dataclass(frozen=True, eq=False)
class HarmonicKernel:
    """Real positive multipliers ``K[ell, p]`` acting on ``f_lmp``."""

    multipliers: np.ndarray
    sigma_ell: float
    sigma_p: float
    skew: float

    @property
    def expanded(self):
        """Multipliers laid out like coefficients, shape ``(P, L*L)``."""
        L = self.multipliers.shape[0]
        return np.repeat(self.multipliers.T, 2 * np.arange(L) + 1, axis=1)

    @property
    def condition(self):
        return float(self.multipliers.max() / self.multipliers.min())


def make_kernel(profile, sigma_ell=None, sigma_p=None, skew=0.5, floor=1e-4):
    """Skewed Gaussian harmonic kernel.

    ``K = exp(-l(l+1)/(2 s_l^2)) exp(-p^2/(2 s_p^2)) exp(-skew l p/(s_l s_p))``,
    clipped from below at ``floor * max``.  Defaults are ``L/4`` and ``P/4``.
    """
    L, P = profile.L, profile.P
    sigma_ell = L / 4 if sigma_ell is None else sigma_ell
    sigma_p = P / 4 if sigma_p is None else sigma_p
    if not (sigma_ell > 0 and sigma_p > 0):
        raise ValueError("kernel widths must be positive")
    ell = np.arange(L, dtype=float)[:, None]
    p = np.arange(P, dtype=float)[None, :]
    k = (np.exp(-ell * (ell + 1) / (2 * sigma_ell**2)) * np.exp(-(p**2) / (2 * sigma_p**2))
         * np.exp(-skew * ell * p / (sigma_ell * sigma_p)))
    k = np.maximum(k, floor * k.max())
    k.setflags(write=False)
    return HarmonicKernel(k, float(sigma_ell), float(sigma_p), float(skew))


def kernel_op(profile, kernel):
    d = kernel.expanded
    return LinOp(coeff_space(profile), coeff_space(profile), lambda c: d * c, lambda c: d * c, "K")


# ---------------------------------------------------------------- mask

@dataclass(frozen=True, eq=False)
class Mask:
    """Zero-filling sample mask; ``keep`` marks observed voxels."""

    keep: np.ndarray
    fraction: float
    seed: int

    def __call__(self, x):
        return np.where(self.keep, x, 0)

    @property
    def n_kept(self):
        return int(self.keep.sum())


def make_mask(profile, fraction=0.5, seed=1):
    """Keep exactly ``round(fraction * n)`` voxels chosen uniformly at random."""
    if not 0 < fraction <= 1:
        raise ValueError("mask fraction must lie in (0, 1]")
    n = profile.n_samples
    n_keep = int(round(fraction * n))
    keep = np.zeros(n, dtype=bool)
    keep[rng_from_seed(seed, MASK_STREAM).permutation(n)[:n_keep]] = True
    keep = keep.reshape(profile.sample_shape)
    keep.setflags(write=False)
    return Mask(keep, float(fraction), int(seed))


def mask_op(profile, mask, metric="quadrature"):
    sp = sample_space(profile, metric)
    return LinOp(sp, sp, mask, mask, "M")


# ---------------------------------------------------------------- wavelets

def wavelet_analysis_op(tiling):
    """``Psi^H``: coefficients -> stacked wavelet vector."""
    prof = tiling.profile

    def fwd(c):
        return wavelet_analysis(c, tiling).to_vector()

    def adj(v):
        return wavelet_synthesis(WaveletCoeffs.from_vector(v, tiling), tiling).values

    return LinOp(coeff_space(prof), wavelet_space(tiling), fwd, adj, "Psi^H")


def wavelet_synthesis_op(tiling):
    return wavelet_analysis_op(tiling).H


# ---------------------------------------------------------------- sensing

def make_sensing(profile, kernel, mask, data_weights="quadrature", x_metric="quadrature"):
    """Compose ``Phi = M B^-1 K B`` from true adjoint pairs.

    ``x_metric`` fixes the inner product on the unknown, ``data_weights``
    the one on measurements.
    """
    B = ball_forward_op(profile, x_metric)
    Binv = ball_inverse_op(profile, data_weights)
    K = kernel_op(profile, kernel)
    M = mask_op(profile, mask, data_weights)
    op = M @ (Binv @ (K @ B))
    return LinOp(op.in_space, op.out_space, op.apply, op.adjoint_apply, "Phi")


def sensing_forward(x, profile, kernel, mask):
    """``Phi x`` for sample array ``x`` (zero-filled outside the mask)."""
    return mask(ball_inverse(kernel.expanded * ball_forward(x, profile).values, profile).values)


def sensing_adjoint(y, profile, kernel, mask, data_weights="quadrature"):
    """``Phi^H y = B^H K B^-H M y`` under quadrature weights on the unknown."""
    return make_sensing(profile, kernel, mask, data_weights).adjoint_apply(y)


def naive_inverse(y, profile, kernel, mask):
    """Unregularized inversion ``B^-1 K^-1 B M y``."""
    k = kernel.expanded
    if np.any(k <= 0):
        raise ValueError("kernel has a non-positive multiplier")
    return ball_inverse(ball_forward(mask(y), profile).values / k, profile).values


# ---------------------------------------------------------------- norms

def power_method(op, tol=1e-10, max_iter=10000, seed=0):
    """Largest singular value of ``op`` by power iteration on ``op^H op``."""
    rng = rng_from_seed(seed)
    x = op.in_space.random(rng)
    x = x / op.in_space.norm(x)
    est = 0.0
    for _ in range(max_iter):
        z = op.adjoint_apply(op.apply(x))
        nz = op.in_space.norm(z)
        if nz == 0:
            return 0.0
        new = np.sqrt(nz)
        x = z / nz
        if abs(new - est) <= tol * new:
            return float(new)
        est = new
    raise RuntimeError(f"power method did not converge in {max_iter} iterations")


def dense_matrix(op):
    """Materialize ``op`` in orthonormal coordinates of its two spaces.

    The largest singular value of the returned matrix is the operator norm.
    """
    n = int(np.prod(op.in_space.shape))
    win = np.ones(n) if op.in_space.weights is None else op.in_space.weights.ravel()
    wout = None if op.out_space.weights is None else op.out_space.weights.ravel()
    cols = []
    for i in range(n):
        e = np.zeros(n, dtype=complex)
        e[i] = 1.0 / np.sqrt(win[i])
        col = np.asarray(op.apply(e.reshape(op.in_space.shape))).ravel()
        if wout is not None:
            col = col * np.sqrt(wout)
        cols.append(col)
    return np.stack(cols, axis=1)
