"""
linalg.py - Complex matrices, structural validators and permanent kernels

This module contains the dense linear-algebra layer used by every other part of
PhotOptix: coercion of user input into complex matrices and occupation vectors,
the Hadamard product, row/column repetition of a matrix, unitarity and
Hermitian-PSD checks, and two exact permanent kernels (naive permutation sum and
Ryser's formula with Gray-code subset iteration).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import permutations

import numpy as np
from scipy import linalg as sla
from scipy.stats import unitary_group

from photoptix.errors import DimensionError, PatternMismatchError, SizeGuardError, ValidationError
from photoptix.settings import settings

logger = logging.getLogger(__name__)


def as_complex_matrix(a, name="matrix"):
    """
    Coerce input into a finite two-dimensional complex128 array.

    Args:
        a (array_like): Matrix entries in row-major nesting
        name (str): Name used in error messages

    Returns:
        numpy.ndarray: Complex matrix (a copy when conversion was needed)
    """
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains NaN or Inf entries")
    return arr


def as_occupation(occ, name="occupation"):
    """
    Coerce input into a one-dimensional vector of non-negative integer counts.

    Args:
        occ (array_like): Counts per index
        name (str): Name used in error messages

    Returns:
        numpy.ndarray: int64 vector of counts
    """
    arr = np.asarray(occ)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise ValidationError(f"{name} must contain integers, got {arr.tolist()}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValidationError(f"{name} must be non-negative, got {arr.tolist()}")
    return arr


def occupation_vectors(total, parts):
    """
    Enumerate all occupation vectors of `parts` entries summing to `total`.

    Vectors are produced in lexicographically descending order, so (2, 0)
    comes before (1, 1) and (0, 2).

    Args:
        total (int): Sum of the entries
        parts (int): Number of entries

    Yields:
        tuple: Occupation vector
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in occupation_vectors(total - first, parts - 1):
            yield (first,) + rest


def port_list(occ):
    """Expand an occupation vector into the nondecreasing list of indices it repeats."""
    occ = as_occupation(occ)
    return np.repeat(np.arange(occ.size), occ)


def hadamard(a, b):
    """
    Element-wise (Hadamard) product of two matrices of the same shape.

    Args:
        a (array_like): First matrix
        b (array_like): Second matrix

    Returns:
        numpy.ndarray: Matrix with entries a[i, j] * b[i, j]
    """
    a = as_complex_matrix(a, "a")
    b = as_complex_matrix(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"Hadamard product needs equal shapes, got {a.shape} and {b.shape}")
    return a * b


def submatrix_with_repetition(h, row_occ, col_occ):
    """
    Build H[m, n]: row k of `h` repeated row_occ[k] times, column l repeated col_occ[l] times.

    Args:
        h (array_like): Source matrix
        row_occ (array_like): Row multiplicities, one per row of `h`
        col_occ (array_like): Column multiplicities, one per column of `h`

    Returns:
        numpy.ndarray: p x p matrix with p = sum(row_occ) = sum(col_occ)
    """
    h = as_complex_matrix(h, "h")
    rows = as_occupation(row_occ, "row occupation")
    cols = as_occupation(col_occ, "column occupation")
    if rows.size != h.shape[0] or cols.size != h.shape[1]:
        raise DimensionError(
            f"occupations of length {rows.size} and {cols.size} do not match matrix shape {h.shape}"
        )
    if rows.sum() != cols.sum():
        raise PatternMismatchError(
            f"row and column occupations must have equal totals, got {rows.sum()} and {cols.sum()}"
        )
    return h[np.ix_(port_list(rows), port_list(cols))]


def _require_square(a, what):
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{what} needs a square matrix, got shape {a.shape}")


def permanent_naive(a):
    """
    Permanent by direct summation over all permutations (n * n! cost).

    Args:
        a (array_like): Square matrix, at most `naive_permanent_max` rows

    Returns:
        complex: Permanent of the matrix
    """
    a = as_complex_matrix(a)
    _require_square(a, "permanent_naive")
    n = a.shape[0]
    if n > settings.naive_permanent_max:
        raise SizeGuardError(
            f"naive permanent limited to n <= {settings.naive_permanent_max}, got n = {n}"
        )
    if n == 0:
        return 1.0 + 0.0j
    perms = np.array(list(permutations(range(n))))
    return complex(np.prod(a[np.arange(n), perms], axis=1).sum())


def _ryser_chunk(a, start, stop):
    # Gray-code steps k in [start, stop); step k flips the lowest set bit of k.
    n = a.shape[0]
    k = np.arange(start, stop, dtype=np.int64)
    gray = k ^ (k >> 1)
    bit = np.rint(np.log2(k & -k)).astype(np.int64)
    added = ((gray >> bit) & 1).astype(bool)
    deltas = a.T[bit] * np.where(added, 1.0, -1.0)[:, None]

    prev = (start - 1) ^ ((start - 1) >> 1)
    mask = np.array([(prev >> j) & 1 for j in range(n)], dtype=bool)
    start_sums = a[:, mask].sum(axis=1)

    row_sums = start_sums + np.cumsum(deltas, axis=0)
    parity = np.where(k & 1, -1.0, 1.0)
    return complex(np.sum(parity * np.prod(row_sums, axis=1)))


def permanent_ryser(a, workers=1, chunk_bits=None):
    """
    Permanent by Ryser's inclusion-exclusion formula with Gray-code subset order.

    Consecutive subsets differ by one column, so the row sums are updated
    incrementally. The subset range is split into chunks that each recompute
    their starting row sums, which makes them independent; with `workers > 1`
    they run on a thread pool. Chunk partial sums are added in chunk order.

    Args:
        a (array_like): Square matrix, at most `ryser_permanent_max` rows
        workers (int): Number of threads for the chunked subset range
        chunk_bits (int): log2 of the chunk length (defaults to settings)

    Returns:
        complex: Permanent of the matrix
    """
    a = as_complex_matrix(a)
    _require_square(a, "permanent_ryser")
    n = a.shape[0]
    if n > settings.ryser_permanent_max:
        raise SizeGuardError(
            f"Ryser permanent limited to n <= {settings.ryser_permanent_max}, got n = {n}"
        )
    if n == 0:
        return 1.0 + 0.0j

    chunk = 1 << (chunk_bits or settings.ryser_chunk_bits)
    last = 1 << n
    bounds = [(start, min(start + chunk, last)) for start in range(1, last, chunk)]

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _ryser_chunk(a, *b), bounds))
    else:
        parts = [_ryser_chunk(a, start, stop) for start, stop in bounds]

    total = 0.0 + 0.0j
    for part in parts:
        total += part
    return (-1) ** n * total


def permanent(a):
    """Permanent with the kernel chosen by size (naive up to 3x3, Ryser above)."""
    a = as_complex_matrix(a)
    _require_square(a, "permanent")
    if a.shape[0] <= 3:
        return permanent_naive(a)
    return permanent_ryser(a)


def unitarity_residual(u):
    """
    Largest entry modulus of U^dagger U - I.

    Args:
        u (array_like): Matrix to test

    Returns:
        float: Residual, or infinity when `u` is not square
    """
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return float("inf")
    if u.size == 0:
        return 0.0
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def check_unitary(u, tol=None):
    """
    Check that a square matrix is unitary within `tol`.

    Args:
        u (array_like): Matrix to test
        tol (float): Max allowed entry of |U^dagger U - I| (defaults to settings)

    Returns:
        bool: True if unitary within tolerance
    """
    tol = settings.unitarity_tolerance if tol is None else tol
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        logger.warning(f"check_unitary: matrix of shape {u.shape} is not square")
        return False
    return unitarity_residual(u) <= tol


def isometry_residual(u):
    """Largest entry modulus of U U^dagger - I for a matrix with orthonormal rows."""
    u = np.asarray(u, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] > u.shape[1]:
        return float("inf")
    if u.shape[0] == 0:
        return 0.0
    return float(np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0]))))


def check_isometry(u, tol=None):
    """Check that the rows of an N x M matrix (N <= M) are orthonormal within `tol`."""
    tol = settings.unitarity_tolerance if tol is None else tol
    return isometry_residual(u) <= tol


def check_hermitian_psd(a, tol=None):
    """
    Check that a matrix is Hermitian and positive semi-definite.

    Args:
        a (array_like): Square matrix
        tol (float): Tolerance on max|A - A^dagger| and on negative eigenvalues

    Returns:
        bool: True if Hermitian PSD within tolerance
    """
    tol = settings.psd_tolerance if tol is None else tol
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        logger.warning(f"check_hermitian_psd: matrix of shape {a.shape} is not square")
        return False
    if a.size == 0:
        return True
    if np.max(np.abs(a - a.conj().T)) > tol:
        return False
    eigenvalues = sla.eigvalsh((a + a.conj().T) / 2)
    return bool(eigenvalues.min() >= -tol)


def random_unitary(m, rng=None):
    """
    Draw a Haar-random unitary matrix.

    Args:
        m (int): Matrix size
        rng (numpy.random.Generator): Random generator (seeded by the caller)

    Returns:
        numpy.ndarray: m x m unitary matrix
    """
    rng = np.random.default_rng() if rng is None else rng
    if m == 1:
        return np.array([[np.exp(2j * np.pi * rng.random())]])
    return np.asarray(unitary_group.rvs(m, random_state=rng), dtype=np.complex128)
