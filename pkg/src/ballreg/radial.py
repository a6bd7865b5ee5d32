"""Laguerre radial basis on the half-line and its exact quadrature transforms.

The radial functions are

    K_p(r) = sqrt(p!/(p+2)!) * exp(-r/(2 tau)) / sqrt(tau^3) * L_p^(2)(r/tau)

which are orthonormal on R+ under the measure r^2 dr.  Sampling happens on
the nodes of the P-point generalized Gauss-Laguerre rule (weight u^2 e^-u),
which makes analysis of any band-limited function exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln

__all__ = [
    "RadialPlan",
    "RadialCoeffs",
    "laguerre_poly",
    "radial_basis",
    "radial_basis_matrix",
    "gauss_laguerre",
    "build_radial_plan",
    "radial_forward",
    "radial_inverse",
    "radial_inverse_adjoint",
    "radial_forward_adjoint",
]

ALPHA = 2
# rescale the recurrence when values exceed this magnitude
_BIG = 1e150


def laguerre_poly(p, alpha, u):
    """Generalized Laguerre polynomial L_p^(alpha)(u) by three-term recurrence.

    ``u`` may be a scalar or an array; the result has the same shape.
    """
    u = np.asarray(u, dtype=float)
    prev = np.zeros_like(u)
    cur = np.ones_like(u)
    for k in range(1, p + 1):
        prev, cur = cur, ((2 * k - 1 + alpha - u) * cur - (k - 1 + alpha) * prev) / k
    if cur.ndim == 0:
        return float(cur)
    return cur


def _laguerre_table(P, u):
    """Return ``E[p, i] = exp(-u_i/2) * L_p^(2)(u_i)`` for p < P.

    The exponential is folded into the recurrence in log space so that nodes
    beyond u ~ 1400 neither overflow the polynomial nor underflow the decay.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty((P, u.size))
    # log_scale[i] tracks the factor pulled out of the running pair
    log_scale = -0.5 * u
    prev = np.zeros_like(u)
    cur = np.ones_like(u)
    for k in range(P):
        if k > 0:
            prev, cur = cur, ((2 * k - 1 + ALPHA - u) * cur - (k - 1 + ALPHA) * prev) / k
        big = np.abs(cur) > _BIG
        if np.any(big):
            prev[big] /= _BIG
            cur[big] /= _BIG
            log_scale[big] += np.log(_BIG)
        with np.errstate(under="ignore"):
            out[k] = cur * np.exp(log_scale)
    return out


def _norms(P):
    p = np.arange(P, dtype=float)
    return 1.0 / np.sqrt((p + 1.0) * (p + 2.0))


def radial_basis(p, r, tau=1.0):
    """Evaluate K_p(r) for scalar or array ``r``."""
    r = np.asarray(r, dtype=float)
    vals = _laguerre_table(p + 1, r.ravel() / tau)[p]
    vals = vals * _norms(p + 1)[p] / tau**1.5
    if r.ndim == 0:
        return float(vals[0])
    return vals.reshape(r.shape)


def radial_basis_matrix(P, r, tau=1.0):
    """Matrix ``M[i, p] = K_p(r_i)`` for all p < P."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    table = _laguerre_table(P, r / tau) * _norms(P)[:, None] / tau**1.5
    return table.T.copy()


def gauss_laguerre(P, alpha=ALPHA, polish=True):
    """Nodes and weights of the P-point generalized Gauss-Laguerre rule.

    Nodes come from the eigenvalues of the symmetric Jacobi matrix
    (Golub-Welsch).  Weights are returned in log form because they underflow
    for large P; ``log_w[i] = log(weight_i)`` for the weight function
    u^alpha e^-u.

    Returns
    -------
    nodes : ndarray, shape (P,)
    log_weights : ndarray, shape (P,)
    """
    if P < 1:
        raise ValueError("P must be >= 1")
    k = np.arange(P, dtype=float)
    diag = 2 * k + alpha + 1
    off = np.sqrt(k[1:] * (k[1:] + alpha))
    try:
        nodes = eigh_tridiagonal(diag, off, eigvals_only=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"Gauss-Laguerre node computation failed for P={P}") from exc
    nodes = np.sort(nodes)

    if polish:
        # a few Newton steps on L_P^(alpha) using L_P' = (P L_P - (P+alpha) L_{P-1}) / u
        for _ in range(3):
            lp = laguerre_poly(P, alpha, nodes)
            lm = laguerre_poly(P - 1, alpha, nodes)
            dlp = (P * lp - (P + alpha) * lm) / nodes
            nodes = nodes - lp / dlp

    if np.any(~np.isfinite(nodes)) or np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
        raise RuntimeError(f"Gauss-Laguerre node computation did not converge for P={P}")

    # Christoffel form: 1/w_i = sum_k q_k(u_i)^2 with q_k the orthonormal
    # polynomials; carried out on exp(-u/2)-scaled values to stay finite.
    scaled = _laguerre_table(P, nodes)
    log_norm2 = gammaln(k + alpha + 1) - gammaln(k + 1)  # ||L_k||^2
    christoffel = np.sum(scaled**2 * np.exp(-log_norm2)[:, None], axis=0)
    log_weights = -nodes - np.log(christoffel)
    return nodes, log_weights


@dataclass(frozen=True, eq=False)
class RadialPlan:
    """Radial sampling plan: quadrature radii, weights and sampled basis.

    ``weights`` absorb tau^3 and the exponential of the Laguerre rule, so that
    ``sum_i weights[i] * g(r_i)`` approximates ``int g(r) r^2 dr`` and the
    columns of ``basis_matrix`` are orthonormal under them.
    """

    P: int
    tau: float
    nodes: np.ndarray
    weights: np.ndarray
    basis_matrix: np.ndarray
    unit_nodes: np.ndarray = field(repr=False)

    @property
    def gram(self):
        B = self.basis_matrix
        return B.T @ (self.weights[:, None] * B)


@dataclass
class RadialCoeffs:
    values: np.ndarray
    plan: RadialPlan

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape[0] != self.plan.P:
            raise ValueError(
                f"expected {self.plan.P} radial coefficients, got {self.values.shape[0]}"
            )


def build_radial_plan(P, tau=1.0):
    if P < 1:
        raise ValueError("radial bandlimit P must be >= 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    u, _ = gauss_laguerre(P)
    basis = radial_basis_matrix(P, u * tau, tau)
    # exact-quadrature weights: 1 / sum_p K_p(r_i)^2 (Christoffel function)
    weights = 1.0 / np.sum(basis**2, axis=1)
    for arr in (u, basis, weights):
        arr.setflags(write=False)
    nodes = u * tau
    nodes.setflags(write=False)
    return RadialPlan(P=P, tau=float(tau), nodes=nodes, weights=weights,
                      basis_matrix=basis, unit_nodes=u)


def _check_samples(samples, plan):
    samples = np.asarray(samples)
    if samples.shape[0] != plan.P:
        raise ValueError(f"expected {plan.P} radial samples along axis 0, got {samples.shape[0]}")
    return samples


def radial_forward(samples, plan):
    """Project samples at the plan radii onto K_p: ``f_p = sum_i w_i f(r_i) K_p(r_i)``.

    Extra trailing axes are transformed independently.
    """
    samples = _check_samples(samples, plan)
    wb = plan.weights[:, None] * plan.basis_matrix
    vals = np.tensordot(wb.T, samples, axes=(1, 0))
    return RadialCoeffs(vals, plan)


def radial_inverse(coeffs, plan=None):
    """Synthesize ``f(r_i) = sum_p f_p K_p(r_i)`` at the plan radii."""
    if isinstance(coeffs, RadialCoeffs):
        plan = coeffs.plan
        coeffs = coeffs.values
    elif plan is None:
        raise ValueError("plan required when passing raw coefficient arrays")
    coeffs = np.asarray(coeffs)
    if coeffs.shape[0] != plan.P:
        raise ValueError(f"expected {plan.P} radial coefficients, got {coeffs.shape[0]}")
    return np.tensordot(plan.basis_matrix, coeffs, axes=(1, 0))


def radial_inverse_adjoint(samples, plan):
    """Adjoint of :func:`radial_inverse` under the quadrature-weighted sample
    inner product.  It coincides with :func:`radial_forward`."""
    return radial_forward(samples, plan).values


def radial_forward_adjoint(coeffs, plan):
    """Adjoint of :func:`radial_forward` under the weighted sample product."""
    return radial_inverse(coeffs, plan)
