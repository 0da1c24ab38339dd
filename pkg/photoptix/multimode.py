"""
multimode.py - Monte-Carlo vacuum probability for multimode Gaussian-Husimi sources

Sources whose Husimi function is a product of complex Gaussians (vacuum,
coherent and thermal internal modes) can be sampled exactly. Drawing alpha from
the joint Husimi density and averaging

    w(alpha) = exp(-alpha^dagger (Hc^-1 - I) alpha) / prod_k (1 - eta_k)^d,
    Hc = U (I - Lambda) U^dagger (x) I_d

estimates the zero-count probability. Samples are drawn in fixed-size blocks,
each from its own Philox stream spawned from the scenario seed, so the result
does not depend on how many workers draw them.
"""

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Tuple

import numpy as np

from photoptix.distinguishability import ModeVector
from photoptix.engine import DetectorBank
from photoptix.errors import DimensionError, DomainError, NumericalError, SingularityError, ValidationError
from photoptix.linalg import as_complex_matrix, check_unitary, unitarity_residual
from photoptix.settings import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InternalModeState:
    """Gaussian Husimi factor of one internal mode."""

    kind: Literal["vacuum", "coherent", "thermal"]
    alpha: complex = 0.0
    nbar: float = 0.0

    def __post_init__(self):
        if self.kind not in ("vacuum", "coherent", "thermal"):
            raise DomainError(f"internal mode kind must be vacuum, coherent or thermal, got '{self.kind}'")
        if self.nbar < 0:
            raise DomainError(f"thermal mean occupation must be non-negative, got {self.nbar}")

    @property
    def mean(self):
        return complex(self.alpha) if self.kind == "coherent" else 0.0 + 0.0j

    @property
    def variance(self):
        # E|alpha - mean|^2 of the Husimi density
        return 1.0 + self.nbar if self.kind == "thermal" else 1.0


@dataclass(frozen=True)
class SamplableHusimiSource:
    """A source over d internal modes with a product-Gaussian Husimi function."""

    modes: Tuple[InternalModeState, ...]

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise DimensionError("a multimode source needs at least one internal mode")
        object.__setattr__(self, "modes", modes)

    @property
    def d(self):
        return len(self.modes)

    @property
    def means(self):
        return np.array([mode.mean for mode in self.modes], dtype=np.complex128)

    @property
    def variances(self):
        return np.array([mode.variance for mode in self.modes], dtype=np.float64)

    @classmethod
    def vacuum(cls, d):
        return cls(tuple(InternalModeState("vacuum") for _ in range(d)))

    @classmethod
    def coherent_in_mode(cls, alpha, mode_vector):
        """
        Coherent state of amplitude alpha in the internal mode phi.

        The displacement alpha * phi_s in internal mode s gives the same
        Husimi function as a coherent state of the mode c^dagger = sum_s phi_s a^dagger_s.
        """
        phi = mode_vector.amplitudes if isinstance(mode_vector, ModeVector) else ModeVector(mode_vector).amplitudes
        return cls(tuple(InternalModeState("coherent", alpha=complex(alpha) * amp) for amp in phi))


@dataclass(frozen=True, eq=False)
class MultimodeScenario:
    """
    Validated Monte-Carlo input.

    Attributes:
        network (numpy.ndarray): M x M unitary
        sources (tuple): One SamplableHusimiSource per input port, all of dimension d
        detectors (DetectorBank): Efficiencies, each at most 1 - min_eta_gap
        d (int): Internal dimension
        sample_count (int): Number of Husimi samples
        rng_seed (int): 64-bit seed for the sample streams
    """

    network: np.ndarray
    sources: Tuple[SamplableHusimiSource, ...]
    detectors: DetectorBank
    d: int
    sample_count: int
    rng_seed: int

    def __post_init__(self):
        network = as_complex_matrix(self.network, "network")
        ports = network.shape[0]
        sources = tuple(self.sources)
        if not check_unitary(network):
            raise ValidationError(f"unitarity violated, residual {float(unitarity_residual(network))}")
        if len(sources) != ports or self.detectors.size != ports:
            raise DimensionError(
                f"{len(sources)} sources and {self.detectors.size} detectors given for {ports} ports"
            )
        if any(src.d != self.d for src in sources):
            raise DimensionError(f"every source needs d = {self.d} internal modes")
        if self.sample_count < 2:
            raise ValidationError(f"sample_count must be at least 2, got {self.sample_count}")
        if self.rng_seed is None or not 0 <= int(self.rng_seed) < 2 ** 64:
            raise ValidationError(f"rng_seed must be a 64-bit unsigned integer, got {self.rng_seed}")
        _check_efficiencies(self.detectors)
        object.__setattr__(self, "network", network)
        object.__setattr__(self, "sources", sources)

    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.network).tobytes())
        for src in self.sources:
            h.update(src.means.tobytes())
            h.update(src.variances.tobytes())
        h.update(np.ascontiguousarray(self.detectors.eta).tobytes())
        h.update(f"{self.d}:{self.sample_count}:{self.rng_seed}".encode())
        return h.hexdigest()


def _check_efficiencies(detectors):
    limit = 1.0 - settings.min_eta_gap
    if np.any(detectors.eta > limit):
        raise SingularityError(
            f"multimode estimate needs every efficiency <= {limit}, got {detectors.eta.tolist()}"
        )


def build_calligraphic_H(network, detectors, d):
    """
    Hc = U (I - Lambda) U^dagger (x) I_d.

    Args:
        network (array_like): M x M unitary
        detectors (DetectorBank): Efficiencies below 1
        d (int): Internal dimension

    Returns:
        numpy.ndarray: (M d) x (M d) Hermitian positive-definite matrix
    """
    network = as_complex_matrix(network, "network")
    if network.shape[1] != detectors.size:
        raise DimensionError(f"network shape {network.shape} does not match {detectors.size} detectors")
    _check_efficiencies(detectors)

    eta = detectors.eta
    port_block = np.eye(network.shape[0]) - (network * eta[None, :]) @ network.conj().T
    hc = np.kron(port_block, np.eye(d))

    expected = float(np.prod((1.0 - eta) ** d))
    determinant = float(np.real(np.linalg.det(hc)))
    if abs(determinant - expected) > 1e-9:
        raise NumericalError(f"det(Hc) = {determinant!r} differs from prod(1 - eta)^d = {expected!r}")
    return hc


def _block_sizes(total, block):
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def estimate_vacuum_probability(ms, workers=1):
    """
    Monte-Carlo estimate of the probability of no detection.

    Args:
        ms (MultimodeScenario): Validated input
        workers (int): Threads drawing sample blocks

    Returns:
        tuple: (estimate, standard error)
    """
    hc = build_calligraphic_H(ms.network, ms.detectors, ms.d)
    try:
        kernel = np.linalg.inv(hc) - np.eye(hc.shape[0])
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"Hc is singular: {exc}") from exc
    kernel = (kernel + kernel.conj().T) / 2
    prefactor = 1.0 / float(np.prod((1.0 - ms.detectors.eta) ** ms.d))

    means = np.concatenate([src.means for src in ms.sources])
    scales = np.sqrt(np.concatenate([src.variances for src in ms.sources]) / 2.0)
    dim = means.size

    sizes = _block_sizes(ms.sample_count, settings.mc_block_size)
    streams = np.random.SeedSequence(int(ms.rng_seed)).spawn(len(sizes))

    def draw(job):
        size, seed = job
        rng = np.random.Generator(np.random.Philox(seed))
        normals = rng.standard_normal((size, 2 * dim))
        alpha = means + scales * (normals[:, :dim] + 1j * normals[:, dim:])
        quadratic = np.real(np.einsum("ni,ij,nj->n", alpha.conj(), kernel, alpha))
        return prefactor * np.exp(-quadratic)

    jobs = list(zip(sizes, streams))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(draw, jobs))
    else:
        blocks = [draw(job) for job in jobs]

    weights = np.concatenate(blocks)
    estimate = float(np.sum(weights) / weights.size)
    std_error = float(np.std(weights, ddof=1) / math.sqrt(weights.size))
    logger.info(f"multimode P0 = {estimate:.6g} +- {std_error:.2g} from {weights.size} samples")
    return estimate, std_error
