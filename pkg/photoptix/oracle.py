"""
oracle.py - Brute-force Fock-space reference for the counting engine

The oracle simulates the full pipeline on an explicit lattice of M x d bosonic
modes (port k, internal mode s -> flat index k * d + s):

1. every source rho_k is expanded onto the internal modes of its port through
   its mode vector, and the sources are tensored together;
2. the network acts on creation operators as a^dagger[k, s] -> sum_l conj(U[k, l]) b^dagger[l, s],
   lifted to Fock space by expanding products of linear forms;
3. detection pools the internal modes of each port and thins every port with a
   binomial of efficiency eta_l.

None of this goes through H, Husimi series or matrix permanents, so agreement
with the engine is an independent check.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Tuple

import numpy as np
from scipy import linalg as sla
from scipy.stats import binom

from photoptix.distinguishability import ModeVector, mode_vectors_from_gram
from photoptix.engine import ProbabilityTable, enumerate_patterns, outcome_pattern
from photoptix.errors import DimensionError, DomainError, NumericalError, SizeGuardError
from photoptix.linalg import as_complex_matrix, occupation_vectors
from photoptix.settings import settings

logger = logging.getLogger(__name__)

PATH_ORACLE = "oracle"


@dataclass(frozen=True, eq=False)
class FockBasis:
    """All occupation vectors over `mode_count` modes with at most `max_total` photons."""

    mode_count: int
    max_total: int
    states: Tuple[Tuple[int, ...], ...]

    @classmethod
    def build(cls, mode_count, max_total):
        size = math.comb(mode_count + max_total, mode_count)
        if size > settings.oracle_max_states:
            raise SizeGuardError(
                f"Fock basis of {mode_count} modes and {max_total} photons has {size} states, "
                f"more than {settings.oracle_max_states}"
            )
        states = tuple(
            state for total in range(max_total + 1) for state in occupation_vectors(total, mode_count)
        )
        return cls(mode_count, max_total, states)

    @cached_property
    def index(self):
        return {state: i for i, state in enumerate(self.states)}

    @property
    def size(self):
        return len(self.states)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Density matrix over the states of a FockBasis."""

    basis: FockBasis
    matrix: np.ndarray

    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    def populations(self):
        return np.real(np.diag(self.matrix))

    def validate(self, trace_budget=0.0):
        """Check Hermiticity, positivity and trace; raise NumericalError on violation."""
        asym = float(np.max(np.abs(self.matrix - self.matrix.conj().T))) if self.matrix.size else 0.0
        if asym > 1e-10:
            raise NumericalError(f"density operator is not Hermitian: {asym:.3e}")
        smallest = float(sla.eigvalsh((self.matrix + self.matrix.conj().T) / 2).min())
        if smallest < -1e-8:
            raise NumericalError(f"density operator is not PSD: smallest eigenvalue {smallest:.3e}")
        if abs(self.trace() - 1.0) > trace_budget + 1e-9:
            raise NumericalError(f"density operator trace {self.trace()!r} exceeds the truncation budget")
        return self


def _port_state(src, vector):
    # Columns are (c^dagger)^n |0> / sqrt(n!) on the port's internal-mode occupations.
    support = src.support
    local = FockBasis.build(vector.dimension, support)
    phi = vector.amplitudes
    psi = np.zeros((local.size, support + 1), dtype=np.complex128)
    for i, occ in enumerate(local.states):
        n = sum(occ)
        multinomial = math.sqrt(math.factorial(n) / math.prod(math.factorial(o) for o in occ))
        psi[i, n] = multinomial * np.prod(phi ** np.array(occ))
    rho = src.rho[: support + 1, : support + 1]
    return local, psi @ rho @ psi.conj().T


def assemble_input_state(s, d, mode_vectors=None):
    """
    Product input state of every source on the M x d mode lattice.

    Args:
        s (Scenario): Simulation input
        d (int): Internal dimension per port
        mode_vectors (list): ModeVector per source; factorized from the Gram matrix when omitted

    Returns:
        DensityOperator: Input state with full photon support
    """
    vectors = mode_vectors_from_gram(s.gram, d) if mode_vectors is None else [
        v if isinstance(v, ModeVector) else ModeVector(v) for v in mode_vectors
    ]
    if len(vectors) != s.input_ports:
        raise DimensionError(f"{len(vectors)} mode vectors given for {s.input_ports} sources")
    if any(v.dimension != d for v in vectors):
        raise DimensionError(f"mode vectors must all have dimension d = {d}")

    basis = FockBasis.build(s.input_ports * d, s.support_total)
    ports = [_port_state(src, vec) for src, vec in zip(s.sources, vectors)]

    joint = np.ones((1, 1), dtype=np.complex128)
    for _, local_rho in ports:
        joint = np.kron(joint, local_rho)
    flat = [basis.index[sum(states, ())] for states in product(*(local.states for local, _ in ports))]

    matrix = np.zeros((basis.size, basis.size), dtype=np.complex128)
    matrix[np.ix_(flat, flat)] = joint
    logger.info(f"assembled input state on {basis.size} Fock states ({s.input_ports} ports, d = {d})")
    return DensityOperator(basis, matrix)


def _expand(polynomial, row):
    grown = defaultdict(complex)
    targets = np.nonzero(row)[0]
    for occ, coeff in polynomial.items():
        for j in targets:
            raised = list(occ)
            raised[j] += 1
            grown[tuple(raised)] += coeff * row[j]
    return grown


def apply_network(rho, u):
    """
    Evolve a density operator through the network acting on every internal mode.

    Args:
        rho (DensityOperator): State on the input lattice (N ports x d)
        u (array_like): N x M network with orthonormal rows

    Returns:
        DensityOperator: State on the output lattice (M ports x d)
    """
    u = as_complex_matrix(u, "network")
    rows, cols = u.shape
    if rows == 0 or rho.basis.mode_count % rows:
        raise DimensionError(f"network with {rows} inputs does not fit {rho.basis.mode_count} modes")
    d = rho.basis.mode_count // rows
    out = FockBasis.build(cols * d, rho.basis.max_total)
    # Creation operator of input mode (k, j) becomes row (k, j) of this matrix over output modes (l, j).
    substitution = np.kron(u.conj(), np.eye(d))

    transfer = np.zeros((out.size, rho.basis.size), dtype=np.complex128)
    for column, state in enumerate(rho.basis.states):
        # Expand the product of substituted creation operators as a polynomial in output modes.
        polynomial = {(0,) * out.mode_count: 1.0 + 0.0j}
        for mode, count in enumerate(state):
            for _ in range(count):
                polynomial = _expand(polynomial, substitution[mode])
        # Monomials to normalized Fock states: multiply by sqrt(m!) and divide by sqrt(n!).
        norm_in = math.sqrt(math.prod(math.factorial(c) for c in state))
        for occ, coeff in polynomial.items():
            norm_out = math.sqrt(math.prod(math.factorial(c) for c in occ))
            transfer[out.index[occ], column] = coeff * norm_out / norm_in

    # rho_out = T rho T^dagger, trace preserving for an isometry.
    matrix = transfer @ rho.matrix @ transfer.conj().T
    evolved = DensityOperator(out, matrix)
    loss = abs(evolved.trace() - rho.trace())
    if loss > 1e-9:
        raise NumericalError(f"network evolution changed the trace by {loss:.3e}")
    return evolved


def detect(rho, eta, m):
    """
    Probability that lossy photon-number detectors register pattern m.

    Internal modes of a port are pooled; each port thins its photons
    binomially with its efficiency.

    Args:
        rho (DensityOperator): Output-lattice state
        eta (DetectorBank): Efficiency per port
        m (array_like): Detected photons per port

    Returns:
        float: Detection probability
    """
    efficiencies = np.asarray(eta.eta, dtype=np.float64)
    ports = efficiencies.size
    counts = np.asarray(m, dtype=np.int64)
    if counts.size != ports or rho.basis.mode_count % ports:
        raise DimensionError(f"pattern of length {counts.size} does not fit {ports} detectors")
    d = rho.basis.mode_count // ports

    states = np.array(rho.basis.states, dtype=np.int64).reshape(rho.basis.size, ports, d)
    photons = states.sum(axis=2)
    likelihood = np.prod(binom.pmf(counts[None, :], photons, efficiencies[None, :]), axis=1)
    return float(np.dot(likelihood, rho.populations()))


def oracle_distribution(s, d, max_total=None, mode_vectors=None):
    """
    Brute-force probability table for a scenario.

    Args:
        s (Scenario): Simulation input
        d (int): Internal dimension of the lattice
        max_total (int): Largest pattern total in the table, defaults to p_max
        mode_vectors (list): Optional explicit mode vectors, one per source

    Returns:
        ProbabilityTable: Table in the engine's pattern order, every path "oracle"
    """
    max_total = s.p_max if max_total is None else int(max_total)
    if max_total < 0 or max_total > s.p_max:
        raise DomainError(f"max_total must lie in [0, p_max = {s.p_max}], got {max_total}")

    rho_in = assemble_input_state(s, d, mode_vectors)
    rho_in.validate(s.truncation_budget)
    rho_out = apply_network(rho_in, s.network)

    entries = {}
    floor = settings.probability_floor
    for pattern in enumerate_patterns(s.output_ports, max_total):
        value = detect(rho_out, s.detectors, outcome_pattern(pattern, s))
        if value < -floor:
            raise NumericalError(f"oracle probability {value!r} for {pattern} is negative")
        entries[pattern] = min(max(value, 0.0), 1.0)

    metadata = {
        "scenario_digest": s.digest(),
        "cutoff": s.p_max,
        "max_total": max_total,
        "lattice_states": rho_out.basis.size,
        "internal_dimension": d,
        "truncation_budget": s.truncation_budget,
    }
    logger.info(f"oracle table of {len(entries)} patterns on {rho_out.basis.size} output states")
    return ProbabilityTable(entries, {p: PATH_ORACLE for p in entries}, metadata)
