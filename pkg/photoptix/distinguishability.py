"""
distinguishability.py - Internal-mode vectors and the Gram (distinguishability) matrix

A source's internal mode (spectral, temporal, polarization) is described by a
normalized vector phi_k of length d. Only pairwise overlaps matter for counting
statistics, so everything downstream consumes the Gram matrix
V[k, l] = phi_k^dagger phi_l.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from photoptix.errors import DimensionError, ValidationError
from photoptix.linalg import as_complex_matrix
from photoptix.settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModeVector:
    """Normalized internal-mode amplitudes phi_{k,s}, s = 0..d-1."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size < 1:
            raise DimensionError(f"mode vector must be a non-empty 1-D array, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("mode vector contains NaN or Inf entries")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > settings.normalization_tolerance:
            raise ValidationError(f"mode vector is not normalized: squared norm {norm!r}")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, amplitudes):
        """Build a ModeVector from amplitudes of any non-zero norm."""
        amps = np.asarray(amplitudes, dtype=np.complex128)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValidationError("cannot normalize a zero mode vector")
        return cls(amps / norm)

    @property
    def dimension(self):
        return self.amplitudes.size


@dataclass(frozen=True)
class GramMatrix:
    """
    Validated distinguishability matrix.

    Invariants: Hermitian within `hermitian_tolerance`, unit diagonal within
    `unit_diagonal_tolerance`, |V[k, l]| <= 1 and positive semi-definite within
    `psd_tolerance`.
    """

    v: np.ndarray

    def __post_init__(self):
        v = as_complex_matrix(self.v, "Gram matrix") if np.size(self.v) else np.zeros((0, 0), complex)
        if v.shape[0] != v.shape[1]:
            raise DimensionError(f"Gram matrix must be square, got shape {v.shape}")
        if v.size:
            _validate_gram(v)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def size(self):
        return self.v.shape[0]


def _validate_gram(v):
    asym = float(np.max(np.abs(v - v.conj().T)))
    if asym > settings.hermitian_tolerance:
        raise ValidationError(f"Gram matrix is not Hermitian: max |V - V^dagger| = {asym:.3e}")

    diag = float(np.max(np.abs(np.diag(v) - 1.0)))
    if diag > settings.unit_diagonal_tolerance:
        raise ValidationError(f"Gram matrix diagonal is not 1: max deviation {diag:.3e}")

    k, l = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    if abs(v[k, l]) > 1.0 + settings.unit_diagonal_tolerance:
        raise ValidationError(
            f"Cauchy-Schwarz violated: |V[{k},{l}]| = {abs(v[k, l]):.6g} > 1"
        )

    smallest = float(sla.eigvalsh((v + v.conj().T) / 2).min())
    if smallest < -settings.psd_tolerance:
        raise ValidationError(
            f"Gram matrix is not positive semi-definite: smallest eigenvalue {smallest:.6g}"
        )


def gram_matrix(modes):
    """
    Gram matrix of a list of internal-mode vectors.

    Args:
        modes (list): ModeVector instances or normalized array-likes, all of length d

    Returns:
        GramMatrix: V[k, l] = phi_k^dagger phi_l
    """
    vectors = [m if isinstance(m, ModeVector) else ModeVector(m) for m in modes]
    if not vectors:
        return GramMatrix(np.zeros((0, 0), dtype=np.complex128))
    dims = {vec.dimension for vec in vectors}
    if len(dims) > 1:
        raise DimensionError(f"mode vectors have mixed dimensions {sorted(dims)}")

    phi = np.vstack([vec.amplitudes for vec in vectors])
    v = phi.conj() @ phi.T
    return GramMatrix((v + v.conj().T) / 2)


def model_uniform_overlap(m, v):
    """
    Gram matrix with unit diagonal and every off-diagonal overlap equal to `v`.

    For complex `v` the lower triangle holds conj(v) so the result is Hermitian.

    Args:
        m (int): Number of sources
        v (complex): Common overlap

    Returns:
        GramMatrix: Validated matrix (fails when 1 + (m-1)v < 0 for real v)
    """
    gram = np.full((m, m), complex(v), dtype=np.complex128)
    gram[np.tril_indices(m, -1)] = np.conj(complex(v))
    np.fill_diagonal(gram, 1.0)
    return GramMatrix(gram)


def embed_block_with_vacuum(v_nonvac, vac_count):
    """Block-diagonal Gram matrix diag(V, I) with vacuum modes orthogonal to every source."""
    block = v_nonvac.v if isinstance(v_nonvac, GramMatrix) else np.asarray(v_nonvac, complex)
    if vac_count == 0:
        return v_nonvac if isinstance(v_nonvac, GramMatrix) else GramMatrix(block)
    if block.size == 0:
        return GramMatrix(np.eye(vac_count, dtype=np.complex128))
    return GramMatrix(sla.block_diag(block, np.eye(vac_count)))


def gram_for_ports(port_modes):
    """
    Gram matrix for a port-ordered list where vacuum ports carry no mode vector.

    Ports with a vector are combined with gram_matrix, the rest are embedded as
    orthogonal vacuum modes, and the result is permuted back into port order.

    Args:
        port_modes (list): ModeVector, array-like or None per port

    Returns:
        GramMatrix: Port-ordered Gram matrix
    """
    present = [i for i, vec in enumerate(port_modes) if vec is not None]
    missing = [i for i, vec in enumerate(port_modes) if vec is None]
    block = gram_matrix([port_modes[i] for i in present])
    embedded = embed_block_with_vacuum(block, len(missing))

    order = present + missing
    full = np.empty_like(embedded.v)
    full[np.ix_(order, order)] = embedded.v
    return GramMatrix(full)


def mode_vectors_from_gram(gram, d):
    """
    Factorize V into mode vectors of dimension `d`.

    Uses the eigendecomposition V = Q diag(w) Q^dagger and takes
    phi_k = conj(row k of Q sqrt(w)), which reproduces V[k, l] = phi_k^dagger phi_l.

    Args:
        gram (GramMatrix): Matrix to factorize
        d (int): Internal dimension of the returned vectors

    Returns:
        list: One ModeVector per source
    """
    v = gram.v
    m = v.shape[0]
    if m == 0:
        return []
    w, q = sla.eigh((v + v.conj().T) / 2)
    order = np.argsort(w)[::-1]
    w, q = np.clip(w[order], 0.0, None), q[:, order]

    if m > d and w[d:].max() > settings.psd_tolerance:
        rank = int(np.sum(w > settings.psd_tolerance))
        raise DimensionError(f"Gram matrix has rank {rank}, which exceeds internal dimension d = {d}")

    keep = min(m, d)
    b = np.zeros((m, d), dtype=np.complex128)
    b[:, :keep] = q[:, :keep] * np.sqrt(w[:keep])
    return [ModeVector.normalized(row) for row in b.conj()]


def is_uniform_overlap(gram, tol=1e-12):
    """True when every entry above the diagonal of V is the same number (V is Hermitian)."""
    v = gram.v
    if v.shape[0] <= 1:
        return True
    upper = v[np.triu_indices(v.shape[0], k=1)]
    return bool(np.max(np.abs(upper - upper[0])) <= tol)


def distinguishability_weight(gram, ports, sigma):
    """
    Permutation weight J(sigma) = prod_i V[k_i, k_sigma(i)].

    Leading axes of sigma stack several permutations; the product runs over the last one.

    Args:
        gram (GramMatrix): Distinguishability matrix
        ports (array_like): Port list k_1..k_N
        sigma (array_like): Permutation of range(N), or an array of them with shape (..., N)

    Returns:
        complex or numpy.ndarray: The weight, one per stacked permutation
    """
    ports = np.asarray(ports, dtype=np.int64)
    sigma = np.asarray(sigma, dtype=np.int64)
    if sigma.shape[-1:] != ports.shape:
        raise DimensionError(f"port list and permutation lengths differ: {ports.size} vs {sigma.shape[-1]}")
    weights = np.prod(gram.v[ports, ports[sigma]], axis=-1)
    return complex(weights) if weights.ndim == 0 else weights
