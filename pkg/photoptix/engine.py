"""
engine.py - Photon-counting probabilities for lossy linear multiports

The counting engine evaluates the zero-count generating function

    P0(eta) = sum_p sum_{|n| = |m| = p} per(H[m, n]) prod_k g_k[n_k, m_k]

with H = I - (U Lambda U^dagger) o V and g_k the Husimi-series coefficients of
source k, then extracts count probabilities from it.

P_m = prod_l (eta_l^m_l / m_l!) (-d/d eta_l)^m_l P0 is the Taylor coefficient of
t^m in P0(eta o (1 - t)). P0 is a polynomial of degree <= p_max in every
eta_l, so the coefficients are recovered exactly by interpolating along each
counted port on p_max + 1 nodes. The default nodes are roots of unity in t,
which keeps the interpolation system perfectly conditioned; Chebyshev nodes on
[0, 1] are available through settings.

Scenarios whose sources are all Fock states can use a permutation-sum fast
path when every input photon is detected.
"""

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import permutations
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg as sla

from photoptix.distinguishability import GramMatrix, distinguishability_weight, is_uniform_overlap
from photoptix.errors import (
    DimensionError,
    DomainError,
    NumericalError,
    SizeGuardError,
    ValidationError,
    WrongPathError,
)
from photoptix.linalg import (
    as_complex_matrix,
    as_occupation,
    check_isometry,
    check_unitary,
    hadamard,
    isometry_residual,
    occupation_vectors,
    permanent,
    port_list,
    submatrix_with_repetition,
    unitarity_residual,
)
from photoptix.settings import settings
from photoptix.sources import FACTORIALS, husimi_series

logger = logging.getLogger(__name__)

OutcomePattern = Tuple[int, ...]

PATH_FOCK = "fock"
PATH_GENERAL = "general"


@dataclass(frozen=True)
class DetectorBank:
    """Per-port detection efficiencies, each in [0, 1]."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=np.float64)
        if eta.ndim != 1:
            raise DimensionError(f"detector efficiencies must be a 1-D list, got shape {eta.shape}")
        if not np.all(np.isfinite(eta)) or np.any(eta < 0.0) or np.any(eta > 1.0):
            raise ValidationError(f"detector efficiencies must lie in [0, 1], got {eta.tolist()}")
        eta = eta.copy()
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def uniform(cls, ports, eta):
        return cls(np.full(ports, float(eta)))

    @property
    def size(self):
        return self.eta.size


@dataclass(frozen=True, eq=False)
class Scenario:
    """
    Validated simulation input.

    The network has one row per input port and one column per output port.
    It is square and unitary for a full scenario; vacuum_reduce produces
    scenarios with fewer rows whose rows stay orthonormal.
    """

    network: np.ndarray
    sources: Tuple[Any, ...]
    gram: GramMatrix
    detectors: DetectorBank
    p_max: Optional[int] = None

    def __post_init__(self):
        network = np.asarray(self.network, dtype=np.complex128)
        if network.ndim != 2:
            raise DimensionError(f"network must be a matrix, got shape {network.shape}")
        network = as_complex_matrix(network, "network") if network.size else network
        rows, cols = network.shape
        sources = tuple(self.sources)

        if rows > cols:
            raise DimensionError(f"network has more inputs ({rows}) than outputs ({cols})")
        if len(sources) != rows:
            raise DimensionError(f"{len(sources)} sources given for {rows} input ports")
        if self.gram.size != rows:
            raise DimensionError(f"Gram matrix is {self.gram.size}x{self.gram.size}, expected {rows}x{rows}")
        if self.detectors.size != cols:
            raise DimensionError(f"{self.detectors.size} detectors given for {cols} output ports")

        if rows == cols:
            residual = unitarity_residual(network)
            valid = check_unitary(network)
        else:
            residual = isometry_residual(network)
            valid = check_isometry(network)
        if not valid:
            raise ValidationError(f"unitarity violated, residual {float(residual)}")

        support_total = sum(src.support for src in sources)
        p_max = support_total if self.p_max is None else int(self.p_max)
        if all(src.fock_number is not None for src in sources):
            if p_max < support_total:
                raise ValidationError(
                    f"cutoff p_max = {p_max} is below the {support_total} input photons"
                )
        elif p_max < 1:
            raise ValidationError(f"cutoff p_max must be at least 1, got {p_max}")

        network = network.copy()
        network.setflags(write=False)
        object.__setattr__(self, "network", network)
        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "p_max", p_max)

    @property
    def input_ports(self):
        return self.network.shape[0]

    @property
    def output_ports(self):
        return self.network.shape[1]

    @property
    def is_fock(self):
        return all(src.fock_number is not None for src in self.sources)

    @property
    def input_occupation(self):
        if not self.is_fock:
            raise WrongPathError("scenario has non-Fock sources")
        return tuple(src.fock_number for src in self.sources)

    @property
    def total_photons(self):
        return sum(self.input_occupation)

    @property
    def support_total(self):
        return sum(src.support for src in self.sources)

    @property
    def truncation_budget(self):
        return float(sum(src.truncation_deficit for src in self.sources))

    @property
    def is_truncated(self):
        return self.p_max < self.support_total

    def digest(self):
        """SHA-256 over every numeric input of the scenario."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.network).tobytes())
        for src in self.sources:
            h.update(np.ascontiguousarray(src.rho).tobytes())
        h.update(np.ascontiguousarray(self.gram.v).tobytes())
        h.update(np.ascontiguousarray(self.detectors.eta).tobytes())
        h.update(str(self.p_max).encode())
        return h.hexdigest()

    @cached_property
    def occupation_terms(self):
        """
        Non-vanishing (n, m, weight) terms of the generating series.

        n and m are occupation vectors over the input ports with |n| = |m| <= p_max
        and weight = prod_k g_k[n_k, m_k].
        """
        per_source = []
        for src in self.sources:
            g = husimi_series(src.truncated()).g
            idx_n, idx_m = np.nonzero(g)
            per_source.append([(int(n), int(m), complex(g[n, m])) for n, m in zip(idx_n, idx_m)])

        partial = [((), (), 1.0 + 0.0j, 0, 0)]
        for terms in per_source:
            grown = []
            for ns, ms, weight, sum_n, sum_m in partial:
                for n, m, g in terms:
                    if sum_n + n > self.p_max or sum_m + m > self.p_max:
                        continue
                    grown.append((ns + (n,), ms + (m,), weight * g, sum_n + n, sum_m + m))
            partial = grown
        terms = [(ns, ms, weight) for ns, ms, weight, sum_n, sum_m in partial if sum_n == sum_m]
        logger.debug(f"generating series has {len(terms)} terms at p_max = {self.p_max}")
        return terms


def outcome_pattern(m, s):
    """Validate an outcome pattern against a scenario and return it as a tuple."""
    counts = as_occupation(m, "outcome pattern")
    if counts.size != s.output_ports:
        raise DimensionError(f"pattern has {counts.size} entries for {s.output_ports} output ports")
    if counts.sum() > s.p_max:
        raise DomainError(f"pattern total {counts.sum()} exceeds cutoff p_max = {s.p_max}")
    return tuple(int(c) for c in counts)


def enumerate_patterns(ports, max_total):
    """All patterns with total <= max_total, by total then lexicographically descending."""
    return [p for total in range(max_total + 1) for p in occupation_vectors(total, ports)]


@dataclass
class ProbabilityTable:
    """
    Outcome probabilities with per-entry computation paths.

    Attributes:
        entries (dict): OutcomePattern -> probability
        paths (dict): OutcomePattern -> computation path ("fock", "general", "oracle")
        metadata (dict): Scenario digest, cutoff, truncation budget, warnings
    """

    entries: Dict[OutcomePattern, float]
    paths: Dict[OutcomePattern, str] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        floor = settings.probability_floor
        for pattern, value in self.entries.items():
            if not -floor <= value <= 1.0 + floor:
                raise NumericalError(f"probability {value!r} for pattern {pattern} is outside [0, 1]")
        total = self.total()
        if total > 1.0 + settings.probability_sum_tolerance:
            raise NumericalError(f"probabilities sum to {total!r}, more than 1")

    def __getitem__(self, pattern):
        return self.entries[tuple(pattern)]

    def __len__(self):
        return len(self.entries)

    def total(self):
        return float(sum(self.entries.values()))

    def max_deviation(self, other):
        """Largest absolute difference to another table; missing patterns count as 0."""
        keys = set(self.entries) | set(other.entries)
        if not keys:
            return 0.0
        return max(abs(self.entries.get(k, 0.0) - other.entries.get(k, 0.0)) for k in keys)

    def to_dataframe(self):
        """
        Tabular view with columns pattern (space-separated counts), probability and path.

        Returns:
            pandas.DataFrame: One row per pattern in table order
        """
        return pd.DataFrame(
            {
                "pattern": [" ".join(str(c) for c in p) for p in self.entries],
                "probability": list(self.entries.values()),
                "path": [self.paths.get(p, "") for p in self.entries],
            }
        )


def _h_matrix(network, eta, gram_v):
    # eta may be complex at interpolation nodes
    loss = (network * eta[None, :]) @ network.conj().T
    return np.eye(network.shape[0]) - hadamard(loss, gram_v) if network.shape[0] else np.zeros((0, 0))


def build_H(network, detectors, gram):
    """
    H = I - (U Lambda U^dagger) o V.

    Args:
        network (array_like): N x M network with orthonormal rows
        detectors (DetectorBank): Output efficiencies
        gram (GramMatrix): N x N distinguishability matrix

    Returns:
        numpy.ndarray: Hermitian N x N matrix with eigenvalues in [0, 1]
    """
    network = np.asarray(network, dtype=np.complex128)
    if network.ndim != 2 or network.shape[1] != detectors.size or network.shape[0] != gram.size:
        raise DimensionError(
            f"network shape {network.shape} does not match {gram.size} sources and {detectors.size} detectors"
        )
    h = _h_matrix(network, detectors.eta.astype(np.complex128), gram.v)
    if h.size == 0:
        return h
    asym = float(np.max(np.abs(h - h.conj().T)))
    if asym > settings.hermitian_tolerance:
        raise NumericalError(f"H is not Hermitian: max |H - H^dagger| = {asym:.3e}")
    h = (h + h.conj().T) / 2
    eigenvalues = sla.eigvalsh(h)
    floor = settings.probability_floor
    if eigenvalues.min() < -floor or eigenvalues.max() > 1.0 + floor:
        raise NumericalError(
            f"H spectrum [{eigenvalues.min():.3e}, {eigenvalues.max():.3e}] leaves [0, 1]"
        )
    return h


def _generating_function(s, eta):
    h = _h_matrix(s.network, eta, s.gram.v)
    total = 0.0 + 0.0j
    for n, m, weight in s.occupation_terms:
        total += weight * permanent(submatrix_with_repetition(h, m, n))
    return total


def _finalize_probability(value, what):
    floor = settings.probability_floor
    if abs(value.imag) > settings.imaginary_residue_tolerance:
        raise NumericalError(f"{what} has imaginary residue {value.imag:.3e}")
    real = float(value.real)
    if real < -floor or real > 1.0 + floor:
        raise NumericalError(f"{what} = {real!r} is outside [0, 1]")
    if real < 0.0:
        logger.debug(f"clamping {what} = {real:.3e} to 0")
        return 0.0
    return min(real, 1.0)


def _warn_truncation(s):
    if s.is_truncated:
        logger.warning(
            f"p_max = {s.p_max} truncates the generating series below the source support "
            f"{s.support_total}; probabilities at eta < 1 are approximate"
        )


def vacuum_probability(s):
    """
    Probability of detecting no photon at all.

    Args:
        s (Scenario): Simulation input

    Returns:
        float: P0 at the scenario's detector efficiencies
    """
    _warn_truncation(s)
    value = _generating_function(s, s.detectors.eta.astype(np.complex128))
    return _finalize_probability(value, "vacuum probability")


def vacuum_reduce(s):
    """
    Drop vacuum input ports.

    The network keeps only the rows of non-vacuum inputs and the Gram matrix
    its matching block; every output probability is unchanged.

    Args:
        s (Scenario): Simulation input

    Returns:
        Scenario: Reduced scenario (the same object when nothing is vacuum)
    """
    keep = [i for i, src in enumerate(s.sources) if not src.is_vacuum]
    if len(keep) == s.input_ports:
        return s
    logger.debug(f"vacuum reduction keeps inputs {keep} of {s.input_ports}")
    return Scenario(
        network=s.network[keep, :],
        sources=tuple(s.sources[i] for i in keep),
        gram=GramMatrix(s.gram.v[np.ix_(keep, keep)]),
        detectors=s.detectors,
        p_max=s.p_max,
    )


def probability_fock(s, m):
    """
    Fast path for Fock inputs when every input photon is detected.

    P_m = eta^m / (m! n!) sum_{s1, s2} J(s2 s1^-1) prod_i U[k_s1(i), l_i] conj(U[k_s2(i), l_i])

    with k and l the nondecreasing input and output port lists.

    Args:
        s (Scenario): Scenario whose sources are all Fock states
        m (OutcomePattern): Pattern with |m| equal to the number of input photons

    Returns:
        float: Probability of the pattern
    """
    if not s.is_fock:
        raise WrongPathError("probability_fock needs every source to be a Fock state")
    pattern = outcome_pattern(m, s)
    occupation = s.input_occupation
    photons = sum(occupation)
    if sum(pattern) != photons:
        raise DomainError(
            f"fock path needs |m| = {photons} detected photons, got {sum(pattern)}; use probability_general"
        )
    if photons > settings.fock_path_max_photons:
        raise SizeGuardError(
            f"fock path limited to {settings.fock_path_max_photons} photons, got {photons}"
        )
    if photons == 0:
        return 1.0

    k = port_list(occupation)
    l = port_list(pattern)
    perms = np.array(list(permutations(range(photons))))
    # amplitudes[a] = prod_i U[k_{s_a(i)}, l_i]
    amplitudes = np.prod(s.network[k[perms], l], axis=1)
    inverses = np.argsort(perms, axis=1)

    # Rows s1 are chunked so the (chunk, N!, N) weight stack stays bounded.
    chunk = max(1, (1 << 20) // (len(perms) * photons))
    total = 0.0 + 0.0j
    for start in range(0, len(perms), chunk):
        # sigma[a, b] = s2_b o s1_a^-1
        sigma = np.swapaxes(perms[:, inverses[start:start + chunk]], 0, 1)
        weights = distinguishability_weight(s.gram, k, sigma)
        total += np.einsum("a,ab,b->", amplitudes[start:start + chunk], weights, amplitudes.conj())

    eta = s.detectors.eta
    scale = np.prod(eta ** np.array(pattern)) / (
        np.prod(FACTORIALS[list(pattern)]) * np.prod(FACTORIALS[list(occupation)])
    )
    return _finalize_probability(scale * total, f"P{pattern}")


def _interpolation_nodes(count):
    if settings.interpolation_nodes == "unit-circle":
        nodes = np.exp(2j * np.pi * np.arange(count) / count)
    else:
        j = np.arange(count)
        nodes = 0.5 * (1.0 + np.cos((2 * j + 1) * np.pi / (2 * count))) + 0.0j
    vander = np.vander(nodes, count, increasing=True)
    condition = np.linalg.cond(vander)
    if condition > settings.max_condition_number:
        raise NumericalError(
            f"interpolation system with {count} nodes has condition number {condition:.3e}; "
            f"lower p_max"
        )
    return nodes, vander


def _count_coefficients(s, axes, workers=1):
    """Taylor coefficients of P0(eta o (1 - t)) in t over the given ports, up to degree p_max."""
    count = s.p_max + 1
    shape = (count,) * len(axes)
    points = math.prod(shape)
    if points > settings.max_grid_points:
        raise SizeGuardError(
            f"interpolation grid of {points} points exceeds {settings.max_grid_points}"
        )
    # Each grid point sums one permanent per series term; a size-n permanent visits 2^n subsets.
    subsets = sum(2 ** sum(n) for n, _, _ in s.occupation_terms)
    work = points * subsets
    if work > settings.max_generating_work:
        raise SizeGuardError(
            f"{points} grid points x {subsets} permanent subsets per point = {work} "
            f"exceeds max_generating_work = {settings.max_generating_work}; lower the source cutoffs or p_max"
        )
    nodes, vander = _interpolation_nodes(count)
    eta0 = s.detectors.eta.astype(np.complex128)

    # t_l = node j on each counted port l; the other ports keep their efficiency
    def evaluate(index):
        eta = eta0.copy()
        for axis, j in zip(axes, index):
            eta[axis] = eta0[axis] * (1.0 - nodes[j])
        return _generating_function(s, eta)

    indices = list(np.ndindex(*shape))
    if workers > 1 and len(indices) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(evaluate, indices))
    else:
        values = [evaluate(index) for index in indices]
    coeffs = np.array(values, dtype=np.complex128).reshape(shape)

    # Solve the Vandermonde system one axis at a time; values become Taylor coefficients.
    for dim in range(len(axes)):
        moved = np.moveaxis(coeffs, dim, 0)
        solved = np.linalg.solve(vander, moved.reshape(count, -1)).reshape(moved.shape)
        coeffs = np.moveaxis(solved, 0, dim)
    logger.debug(f"interpolated {len(indices)} generating-function values over ports {list(axes)}")
    return coeffs


def probability_general(s, m, workers=1):
    """
    Probability of an outcome pattern from derivatives of the generating function.

    Args:
        s (Scenario): Simulation input
        m (OutcomePattern): Detected photons per output port, |m| <= p_max
        workers (int): Threads for generating-function evaluations

    Returns:
        float: Probability of the pattern
    """
    pattern = outcome_pattern(m, s)
    _warn_truncation(s)
    axes = [l for l, c in enumerate(pattern) if c > 0]
    coeffs = _count_coefficients(s, axes, workers)
    value = coeffs[tuple(pattern[l] for l in axes)]
    return _finalize_probability(complex(value), f"P{pattern}")


def _fock_path_applies(s, pattern):
    return (
        s.is_fock
        and s.total_photons <= settings.fock_path_max_photons
        and sum(pattern) == s.total_photons
    )


def probability(s, m):
    """Probability of one pattern, using the Fock fast path when it applies."""
    pattern = outcome_pattern(m, s)
    if _fock_path_applies(s, pattern):
        return probability_fock(s, pattern)
    return probability_general(s, pattern)


def distribution(s, max_total=None, workers=1):
    """
    Probabilities of every outcome pattern with total count <= max_total.

    Fock-path patterns are evaluated directly. The remaining patterns share one
    interpolation grid over every counted port when it fits `max_grid_points`,
    and are evaluated one by one otherwise.

    Cost grows as (p_max + 1)^M grid points times, per point, one permanent of
    size |n| for every series term, each visiting 2^|n| subsets. Two coherent
    sources at alpha = 0.5 (cutoffs 8, p_max 16) already take minutes;
    `max_generating_work` stops such jobs with a SizeGuardError before any
    evaluation.

    Args:
        s (Scenario): Simulation input
        max_total (int): Largest pattern total, defaults to p_max
        workers (int): Threads for generating-function evaluations

    Returns:
        ProbabilityTable: Table in pattern order
    """
    max_total = s.p_max if max_total is None else int(max_total)
    if max_total < 0 or max_total > s.p_max:
        raise DomainError(f"max_total must lie in [0, p_max = {s.p_max}], got {max_total}")
    _warn_truncation(s)

    patterns = enumerate_patterns(s.output_ports, max_total)
    entries, paths = {}, {}
    general = []
    for pattern in patterns:
        if _fock_path_applies(s, pattern):
            entries[pattern] = probability_fock(s, pattern)
            paths[pattern] = PATH_FOCK
        else:
            general.append(pattern)

    if general:
        axes = sorted({l for p in general for l, c in enumerate(p) if c > 0})
        if (s.p_max + 1) ** len(axes) <= settings.max_grid_points:
            coeffs = _count_coefficients(s, axes, workers)
            for pattern in general:
                value = complex(coeffs[tuple(pattern[l] for l in axes)])
                entries[pattern] = _finalize_probability(value, f"P{pattern}")
                paths[pattern] = PATH_GENERAL
        else:
            logger.info(f"grid over {len(axes)} ports too large, evaluating {len(general)} patterns one by one")
            for pattern in general:
                entries[pattern] = probability_general(s, pattern, workers)
                paths[pattern] = PATH_GENERAL

    ordered = {p: entries[p] for p in patterns}
    warnings = []
    if s.is_truncated:
        warnings.append(
            f"generating series truncated at p_max = {s.p_max} below source support {s.support_total}"
        )
    metadata = {
        "scenario_digest": s.digest(),
        "cutoff": s.p_max,
        "max_total": max_total,
        "truncation_budget": s.truncation_budget,
        "paths": sorted(set(paths.values())),
        "interpolation_nodes": settings.interpolation_nodes,
        "uniform_overlap": _uniform_overlap(s.gram),
        "warnings": warnings,
    }
    logger.info(f"assembled table of {len(ordered)} patterns, total probability {sum(ordered.values()):.12g}")
    return ProbabilityTable(ordered, {p: paths[p] for p in patterns}, metadata)


def _uniform_overlap(gram):
    # [re, im] of the shared overlap, None when overlaps differ or there is one source
    if gram.size <= 1 or not is_uniform_overlap(gram):
        return None
    v = complex(gram.v[0, 1])
    return [v.real, v.imag]


def with_overlap(s, gram):
    """Copy of a scenario with a different Gram matrix."""
    return replace(s, gram=gram)


def with_detectors(s, detectors):
    """Copy of a scenario with different detector efficiencies."""
    return replace(s, detectors=detectors)
