"""
identities.py - Numeric fixtures for the operator identities behind the engine

Two checks back the derivation of the generating function:

- ordering_identity_check compares the normally ordered exponential
  N{exp(-xi b^dagger b)} with the anti-normally ordered A{exp(-lam b^dagger b)},
  lam = xi / (1 - xi), as truncated single-mode matrices.
- gaussian_integral_check compares grid quadrature of complex Gaussian
  integrals with their closed forms, for a scalar and for a 2 x 2 matrix.
"""

import logging
import math
from fractions import Fraction

import numpy as np
from scipy import linalg as sla

from photoptix.errors import DimensionError, DomainError
from photoptix.models import GaussianIntegralReport, OrderingReport
from photoptix.settings import settings

logger = logging.getLogger(__name__)

MAX_SERIES_TERMS = 100000


def _anti_normal_diagonal(n_max, lam, min_terms, tail_tol):
    # <n|A{exp(-lam b^dagger b)}|n> = sum_k (-lam)^k C(n + k, k), exact rational partial sums.
    diagonal, used = [], 0
    for n in range(n_max + 1):
        total, term, k = Fraction(0), Fraction(1), 0
        while True:
            total += term
            k += 1
            term = term * (-lam) * (n + k) / k
            if k >= min_terms and abs(term) < tail_tol:
                break
            if k >= MAX_SERIES_TERMS:
                raise DomainError(f"anti-normal series did not converge for n = {n}")
        diagonal.append(float(total))
        used = max(used, k)
    return np.array(diagonal), used


def ordering_identity_check(n_max, xi, series_terms=None, tail_tolerance=None):
    """
    Verify N{exp(-xi b^dagger b)} = A{exp(-lam b^dagger b)} / (1 - xi) on Fock levels 0..n_max.

    The anti-normal series only converges for lam < 1, so xi must be below 1/2.

    Args:
        n_max (int): Largest Fock level
        xi (float): Ordering parameter, 0 < xi < 1/2
        series_terms (int): Minimum number of anti-normal series terms
        tail_tolerance (float): Stop once the next term is below this

    Returns:
        OrderingReport: Deviations of every identity checked
    """
    if not 0.0 < xi < 1.0:
        raise DomainError(f"xi must lie in (0, 1), got {xi}")
    if xi >= 0.5:
        raise DomainError(f"anti-normal series diverges for xi >= 1/2 (lam >= 1), got xi = {xi}")
    series_terms = settings.ordering_series_terms if series_terms is None else series_terms
    tail_tolerance = settings.ordering_tail_tolerance if tail_tolerance is None else tail_tolerance

    dim = n_max + 1
    lower = np.diag(np.sqrt(np.arange(1, dim, dtype=np.float64)), k=1)
    raise_op = lower.T
    normal = np.zeros((dim, dim))
    for k in range(dim):
        ordered = np.linalg.matrix_power(raise_op, k) @ np.linalg.matrix_power(lower, k)
        normal += (-xi) ** k / math.factorial(k) * ordered

    exact_lam = Fraction(xi) / (1 - Fraction(xi))
    lam = float(exact_lam)
    anti_diag, used = _anti_normal_diagonal(n_max, exact_lam, series_terms, tail_tolerance)

    levels = np.arange(dim)
    off = normal - np.diag(np.diag(normal))
    report = OrderingReport(
        n_max=n_max,
        xi=xi,
        lam=lam,
        normal_diagonal_deviation=float(np.max(np.abs(np.diag(normal) - (1.0 - xi) ** levels))),
        normal_offdiagonal_max=float(np.max(np.abs(off))),
        anti_normal_deviation=float(np.max(np.abs(anti_diag - (1.0 + lam) ** (-levels - 1.0)))),
        relation_deviation=float(np.max(np.abs(normal - np.diag(anti_diag) / (1.0 - xi)))),
        max_deviation=0.0,
        series_terms_used=used,
    )
    report.max_deviation = max(
        report.normal_diagonal_deviation,
        report.normal_offdiagonal_max,
        report.anti_normal_deviation,
        report.relation_deviation,
    )
    logger.info(f"ordering identity at xi = {xi}: max deviation {report.max_deviation:.3e}")
    return report


def _scalar_quadrature(a, lam, mu, step, radius):
    center = (lam + mu) / (2.0 * a)
    offsets = np.arange(-radius, radius + step / 2, step)
    x, y = np.meshgrid(center.real + offsets, center.imag + offsets, indexing="ij")
    z = x + 1j * y
    integrand = np.exp(-a * np.abs(z) ** 2 + np.conj(lam) * z + np.conj(z) * mu)
    return complex(np.sum(integrand) * step ** 2 / math.pi), integrand.size


def _matrix_quadrature(a, lam, mu, step, radius):
    center = np.linalg.solve(a, (lam + mu) / 2.0)
    offsets = np.arange(-radius, radius + step / 2, step)
    y1, x2, y2 = np.meshgrid(offsets, offsets, offsets, indexing="ij")
    z2 = center[1] + x2 + 1j * y2
    total = 0.0 + 0.0j
    for x1 in offsets:
        z1 = center[0] + x1 + 1j * y1
        quadratic = (
            np.conj(z1) * a[0, 0] * z1
            + np.conj(z1) * a[0, 1] * z2
            + np.conj(z2) * a[1, 0] * z1
            + np.conj(z2) * a[1, 1] * z2
        )
        linear = np.conj(lam[0]) * z1 + np.conj(lam[1]) * z2 + np.conj(z1) * mu[0] + np.conj(z2) * mu[1]
        total += np.sum(np.exp(-quadratic + linear))
    return complex(total * step ** 4 / math.pi ** 2), offsets.size ** 4


def gaussian_integral_check(a, lam, mu, step=None, radius_sigmas=None):
    """
    Compare grid quadrature of a complex Gaussian integral with its closed form.

    Scalar a:  (1/pi) int exp(-a|z|^2 + conj(lam) z + conj(z) mu) d^2z = exp(conj(lam) mu / a) / a
    Matrix A:  (1/pi^2) int exp(-z^dagger A z + lam^dagger z + z^dagger mu) d^4z = exp(lam^dagger A^-1 mu) / det A

    The grid is centered on the stationary point and extends `radius_sigmas`
    standard deviations of the narrowest direction.

    Args:
        a (float | array_like): Positive scalar or 2 x 2 Hermitian positive-definite matrix
        lam (complex | array_like): Linear coefficient(s) of z
        mu (complex | array_like): Linear coefficient(s) of conj(z)
        step (float): Grid step (defaults depend on dimension)
        radius_sigmas (float): Grid half-width in standard deviations

    Returns:
        GaussianIntegralReport: Numeric value, closed form and relative deviation
    """
    radius_sigmas = settings.quadrature_radius_sigmas if radius_sigmas is None else radius_sigmas
    a_arr = np.asarray(a, dtype=np.complex128)

    if a_arr.ndim == 0:
        a_val = float(np.real(a_arr))
        if not a_val > 0.0 or abs(a_arr.imag) > 0:
            raise DomainError(f"Gaussian width a must be a positive real number, got {a}")
        step = settings.quadrature_step if step is None else step
        lam, mu = complex(lam), complex(mu)
        numeric, points = _scalar_quadrature(a_val, lam, mu, step, radius_sigmas / math.sqrt(a_val))
        closed = np.exp(np.conj(lam) * mu / a_val) / a_val
        dimension = 1
    else:
        if a_arr.shape != (2, 2):
            raise DimensionError(f"matrix Gaussian needs a 2 x 2 matrix, got shape {a_arr.shape}")
        if np.max(np.abs(a_arr - a_arr.conj().T)) > settings.hermitian_tolerance:
            raise DomainError("matrix Gaussian needs a Hermitian matrix")
        eigenvalues = sla.eigvalsh(a_arr)
        if eigenvalues.min() <= 0.0:
            raise DomainError(f"matrix Gaussian needs a positive-definite matrix, eigenvalues {eigenvalues}")
        step = settings.quadrature_step_matrix if step is None else step
        lam = np.asarray(lam, dtype=np.complex128).reshape(2)
        mu = np.asarray(mu, dtype=np.complex128).reshape(2)
        radius = radius_sigmas / math.sqrt(eigenvalues.min())
        numeric, points = _matrix_quadrature(a_arr, lam, mu, step, radius)
        closed = np.exp(lam.conj() @ np.linalg.solve(a_arr, mu)) / np.real(np.linalg.det(a_arr))
        dimension = 2

    deviation = abs(numeric - closed) / abs(closed)
    logger.info(f"Gaussian integral (dimension {dimension}): relative deviation {deviation:.3e}")
    return GaussianIntegralReport(
        dimension=dimension,
        numeric_real=numeric.real,
        numeric_imag=numeric.imag,
        closed_form_real=float(np.real(closed)),
        closed_form_imag=float(np.imag(closed)),
        relative_deviation=float(deviation),
        grid_points=int(points),
        step=float(step),
    )
