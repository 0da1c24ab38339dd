"""
sources.py - Single-mode source states in a truncated Fock basis

Each source is a density matrix rho[n, m] over Fock levels 0..n_cut. The engine
consumes sources through their Husimi-series coefficients
g[n, m] = rho[n, m] / sqrt(n! m!).

Built-in constructors (vacuum, fock, coherent, thermal) certify their own
truncation: the neglected trace must stay below `truncation_tolerance`,
otherwise a CutoffError reports the cutoff that would be needed.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.special import factorial
from scipy.stats import poisson

from photoptix.errors import CutoffError, DimensionError, DomainError, ValidationError
from photoptix.settings import settings

logger = logging.getLogger(__name__)

# Double-precision factorial table; 171! overflows.
FACTORIALS = factorial(np.arange(settings.max_factorial + 1), exact=False)


def _check_cutoff(n_cut):
    if n_cut < 0:
        raise CutoffError(f"Fock cutoff must be non-negative, got {n_cut}")
    if n_cut > settings.max_factorial:
        raise CutoffError(
            f"Fock cutoff {n_cut} exceeds the factorial table limit {settings.max_factorial}"
        )


def _validate_density(rho, what="density matrix"):
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise DimensionError(f"{what} must be a non-empty square matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValidationError(f"{what} contains NaN or Inf entries")
    _check_cutoff(rho.shape[0] - 1)

    asym = float(np.max(np.abs(rho - rho.conj().T)))
    if asym > settings.hermitian_tolerance:
        raise ValidationError(f"{what} is not Hermitian: max |rho - rho^dagger| = {asym:.3e}")

    diag = np.real(np.diag(rho))
    if diag.min() < -settings.hermitian_tolerance or diag.max() > 1.0 + settings.hermitian_tolerance:
        raise ValidationError(f"{what} has populations outside [0, 1]")

    smallest = float(sla.eigvalsh((rho + rho.conj().T) / 2).min())
    if smallest < -settings.psd_tolerance:
        raise ValidationError(
            f"{what} is not positive semi-definite: smallest eigenvalue {smallest:.6g}"
        )
    return (rho + rho.conj().T) / 2


@dataclass(frozen=True)
class SingleModeSource:
    """
    Truncated density matrix of one source.

    Attributes:
        rho (numpy.ndarray): Density matrix over Fock levels 0..n_cut
        label (str): Human-readable description
        truncation_deficit (float): Trace neglected by the cutoff (1 - trace)
    """

    rho: np.ndarray
    label: str = "custom"
    truncation_deficit: float = 0.0

    def __post_init__(self):
        rho = _validate_density(self.rho, f"source '{self.label}'")
        trace = float(np.real(np.trace(rho)))
        allowed = max(settings.truncation_tolerance, self.truncation_deficit) + settings.hermitian_tolerance
        if trace > 1.0 + settings.truncation_tolerance or 1.0 - trace > allowed:
            raise ValidationError(f"source '{self.label}' has trace {trace!r}, expected 1")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def n_cut(self):
        return self.rho.shape[0] - 1

    @property
    def support(self):
        """Largest Fock level with non-zero population."""
        occupied = np.nonzero(np.real(np.diag(self.rho)) > 0)[0]
        return int(occupied[-1]) if occupied.size else 0

    @property
    def fock_number(self):
        """n when the source is exactly |n><n|, otherwise None."""
        n = self.support
        target = np.zeros_like(self.rho)
        target[n, n] = 1.0
        if np.max(np.abs(self.rho - target)) <= settings.hermitian_tolerance:
            return n
        return None

    @property
    def is_vacuum(self):
        return self.fock_number == 0

    def truncated(self):
        """Copy of the source with rho restricted to levels 0..support."""
        keep = self.support + 1
        if keep == self.rho.shape[0]:
            return self
        return SingleModeSource(self.rho[:keep, :keep].copy(), self.label, self.truncation_deficit)


@dataclass(frozen=True)
class HusimiSeries:
    """Husimi-series coefficients g[n, m] = rho[n, m] / sqrt(n! m!)."""

    g: np.ndarray

    @property
    def n_cut(self):
        return self.g.shape[0] - 1


def _sqrt_factorial_outer(size):
    root = np.sqrt(FACTORIALS[:size])
    return np.outer(root, root)


def vacuum():
    """The vacuum state |0><0|."""
    return fock(0, 0)


def fock(n, n_cut=None):
    """
    Fock state |n><n|.

    Args:
        n (int): Photon number
        n_cut (int): Fock cutoff, defaults to n

    Returns:
        SingleModeSource: The pure Fock state
    """
    n_cut = n if n_cut is None else n_cut
    if n < 0:
        raise DomainError(f"photon number must be non-negative, got {n}")
    if n > n_cut:
        raise CutoffError(f"fock({n}) does not fit cutoff n_cut = {n_cut}", required_cutoff=n)
    _check_cutoff(n_cut)
    rho = np.zeros((n_cut + 1, n_cut + 1), dtype=np.complex128)
    rho[n, n] = 1.0
    return SingleModeSource(rho, label=f"fock({n})")


def _required(tail, start, tol):
    for cutoff in range(start, settings.max_factorial + 1):
        if tail(cutoff) <= tol:
            return cutoff
    return None


def required_cutoff(kind, value, truncation_tolerance=None):
    """
    Smallest cutoff whose neglected trace is within `truncation_tolerance`.

    Args:
        kind (str): "coherent" (value = alpha) or "thermal" (value = nbar)
        value (complex | float): State parameter
        truncation_tolerance (float): Allowed trace deficit (defaults to settings)

    Returns:
        int: Required cutoff
    """
    tol = settings.truncation_tolerance if truncation_tolerance is None else truncation_tolerance
    tail = _tail_function(kind, value)
    cutoff = _required(tail, 0, tol)
    if cutoff is None:
        raise CutoffError(
            f"{kind} state with parameter {value} needs a cutoff beyond {settings.max_factorial}"
        )
    return cutoff


def _tail_function(kind, value):
    if kind == "coherent":
        mean = abs(complex(value)) ** 2
        return lambda cutoff: float(poisson.sf(cutoff, mean))
    if kind == "thermal":
        if value < 0:
            raise DomainError(f"thermal mean occupation must be non-negative, got {value}")
        ratio = value / (1.0 + value)
        return lambda cutoff: ratio ** (cutoff + 1)
    raise DomainError(f"no cutoff estimate for source kind '{kind}'")


def _certify(kind, value, n_cut, tol):
    _check_cutoff(n_cut)
    tail = _tail_function(kind, value)(n_cut)
    if tail > tol:
        needed = _required(_tail_function(kind, value), n_cut, tol)
        hint = f"n_cut >= {needed}" if needed is not None else f"a cutoff beyond {settings.max_factorial}"
        raise CutoffError(
            f"{kind} state with parameter {value} needs {hint} for trace deficit <= {tol:g}; "
            f"n_cut = {n_cut} leaves {tail:.3e}",
            required_cutoff=needed,
        )
    return tail


def coherent(alpha, n_cut, truncation_tolerance=None):
    """
    Coherent state |alpha> truncated at n_cut.

    Args:
        alpha (complex): Displacement
        n_cut (int): Fock cutoff
        truncation_tolerance (float): Allowed trace deficit (defaults to settings)

    Returns:
        SingleModeSource: rho[n, m] = exp(-|alpha|^2) alpha^n conj(alpha)^m / sqrt(n! m!)
    """
    tol = settings.truncation_tolerance if truncation_tolerance is None else truncation_tolerance
    alpha = complex(alpha)
    deficit = _certify("coherent", alpha, n_cut, tol)

    n = np.arange(n_cut + 1)
    amps = np.exp(-abs(alpha) ** 2 / 2) * np.power(alpha, n) / np.sqrt(FACTORIALS[n])
    rho = np.outer(amps, amps.conj())
    return SingleModeSource(rho, label=f"coherent({alpha:g})", truncation_deficit=deficit)


def thermal(nbar, n_cut, truncation_tolerance=None):
    """
    Thermal state with mean occupation nbar, truncated at n_cut.

    Args:
        nbar (float): Mean photon number
        n_cut (int): Fock cutoff
        truncation_tolerance (float): Allowed trace deficit (defaults to settings)

    Returns:
        SingleModeSource: Diagonal state rho[n, n] = nbar^n / (1 + nbar)^(n + 1)
    """
    tol = settings.truncation_tolerance if truncation_tolerance is None else truncation_tolerance
    nbar = float(nbar)
    deficit = _certify("thermal", nbar, n_cut, tol)

    ratio = nbar / (1.0 + nbar)
    populations = np.power(ratio, np.arange(n_cut + 1)) / (1.0 + nbar)
    return SingleModeSource(
        np.diag(populations).astype(np.complex128), label=f"thermal({nbar:g})", truncation_deficit=deficit
    )


def custom(rho, truncation_tolerance=None, label="custom"):
    """
    Validate a user-supplied density matrix.

    The trace is renormalized to 1 only when it is within `truncation_tolerance`
    of 1.

    Args:
        rho (array_like): Square density matrix over Fock levels 0..n_cut
        truncation_tolerance (float): Allowed trace deviation (defaults to settings)
        label (str): Source label

    Returns:
        SingleModeSource: The validated source
    """
    tol = settings.truncation_tolerance if truncation_tolerance is None else truncation_tolerance
    rho = _validate_density(rho, f"source '{label}'")
    trace = float(np.real(np.trace(rho)))
    if abs(trace - 1.0) > tol:
        raise ValidationError(f"source '{label}' has trace {trace!r}, which differs from 1 by more than {tol:g}")
    return SingleModeSource(rho / trace, label=label)


def husimi_series(src):
    """Husimi-series coefficients of a source."""
    return HusimiSeries(src.rho / _sqrt_factorial_outer(src.n_cut + 1))


def reconstruct_density(series):
    """Density matrix from its Husimi-series coefficients."""
    return series.g * _sqrt_factorial_outer(series.n_cut + 1)


def husimi_q(src, alpha):
    """
    Husimi Q-function Q(alpha) = exp(-|alpha|^2)/pi * sum g[n, m] conj(alpha)^n alpha^m.

    Args:
        src (SingleModeSource): Source state
        alpha (array_like): Phase-space points (complex)

    Returns:
        numpy.ndarray: Q evaluated at every point, same shape as alpha
    """
    alpha = np.asarray(alpha, dtype=np.complex128)
    g = husimi_series(src).g
    powers = np.arange(g.shape[0]).reshape((-1,) + (1,) * alpha.ndim)
    bra = np.power(np.conj(alpha)[None, ...], powers)
    ket = np.power(alpha[None, ...], powers)
    series = np.einsum("n...,nm,m...->...", bra, g, ket)
    return np.real(series) * np.exp(-np.abs(alpha) ** 2) / math.pi
