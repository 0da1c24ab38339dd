"""
test_engine.py - Tests for the photon-counting engine

Covers the H matrix, the vacuum probability, both probability paths and the
batch distribution, including the randomized dual-path, normalization and
vacuum-reduction checks.
"""

import math

import numpy as np
import pytest

from conftest import HADAMARD_BS, fock_scenario, random_gram
from photoptix.distinguishability import GramMatrix, model_uniform_overlap
from photoptix.engine import (
    PATH_FOCK,
    PATH_GENERAL,
    DetectorBank,
    ProbabilityTable,
    Scenario,
    build_H,
    distribution,
    enumerate_patterns,
    probability,
    probability_fock,
    probability_general,
    vacuum_probability,
    vacuum_reduce,
    with_detectors,
    with_overlap,
)
from photoptix.errors import (
    DimensionError,
    DomainError,
    NumericalError,
    SizeGuardError,
    ValidationError,
    WrongPathError,
)
from photoptix.linalg import occupation_vectors, random_unitary
from photoptix.settings import settings
from photoptix.sources import coherent, fock, required_cutoff, thermal, vacuum

BALANCED_BS = np.array([[1.0, 1.0], [-1.0, 1.0]], dtype=np.complex128) / math.sqrt(2.0)


def single_port(src, eta=1.0, p_max=None):
    return Scenario(np.eye(1), (src,), GramMatrix([[1.0]]), DetectorBank([eta]), p_max=p_max)


def random_occupation(rng, m, photons):
    return tuple(int(c) for c in rng.multinomial(photons, np.full(m, 1.0 / m)))


# build_H

def test_build_H_without_detection_is_identity(rng):
    u = random_unitary(3, rng)
    h = build_H(u, DetectorBank.uniform(3, 0.0), random_gram(rng, 3))
    assert np.allclose(h, np.eye(3), atol=1e-14)


def test_build_H_vanishes_for_perfect_detectors(rng):
    h = build_H(np.eye(3), DetectorBank.uniform(3, 1.0), random_gram(rng, 3))
    assert np.allclose(h, 0, atol=1e-14)
    h = build_H(HADAMARD_BS, DetectorBank.uniform(2, 1.0), GramMatrix(np.eye(2)))
    assert np.allclose(h, 0, atol=1e-14)


def test_build_H_spectrum_in_unit_interval(rng):
    for _ in range(25):
        m = int(rng.integers(1, 5))
        h = build_H(random_unitary(m, rng), DetectorBank(rng.uniform(0, 1, m)), random_gram(rng, m, 3))
        assert np.allclose(h, h.conj().T, atol=1e-12)
        eigenvalues = np.linalg.eigvalsh(h)
        assert eigenvalues.min() >= -1e-9
        assert eigenvalues.max() <= 1 + 1e-9


def test_build_H_dimension_mismatch():
    with pytest.raises(DimensionError):
        build_H(np.eye(2), DetectorBank.uniform(3, 1.0), GramMatrix(np.eye(2)))


# Scenario validation

def test_scenario_rejects_non_unitary_network():
    with pytest.raises(ValidationError, match="unitarity violated, residual 3.0"):
        fock_scenario([[1, 0], [0, 2]], (1, 1), GramMatrix(np.eye(2)))


def test_scenario_rejects_inconsistent_inputs():
    with pytest.raises(DimensionError):
        fock_scenario(HADAMARD_BS, (1, 1, 0), GramMatrix(np.eye(2)))
    with pytest.raises(DimensionError):
        Scenario(HADAMARD_BS, (fock(1), fock(1)), GramMatrix(np.eye(2)), DetectorBank([1.0]))
    with pytest.raises(ValidationError):
        fock_scenario(HADAMARD_BS, (1, 1), GramMatrix(np.eye(2)), p_max=1)
    with pytest.raises(ValidationError):
        DetectorBank([0.5, 1.2])


# vacuum_probability

def test_vacuum_probability_of_vacuum_inputs(rng):
    u = random_unitary(3, rng)
    s = Scenario(u, (vacuum(),) * 3, GramMatrix(np.eye(3)), DetectorBank(rng.uniform(0, 1, 3)))
    assert vacuum_probability(s) == 1.0


def test_vacuum_probability_of_coherent_state():
    alpha = 0.8 + 0.3j
    n_cut = required_cutoff("coherent", alpha)
    for eta in (0.0, 0.35, 1.0):
        p0 = vacuum_probability(single_port(coherent(alpha, n_cut), eta))
        assert p0 == pytest.approx(math.exp(-eta * abs(alpha) ** 2), abs=1e-9)


def test_vacuum_probability_of_two_photons_with_perfect_detectors(rng):
    for _ in range(5):
        u = random_unitary(2, rng)
        s = fock_scenario(u, (1, 1), random_gram(rng, 2), np.ones(2))
        assert vacuum_probability(s) == pytest.approx(0.0, abs=1e-12)


# Fock path

@pytest.mark.parametrize("v", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_hom_coincidence(make_hom, v):
    assert probability_fock(make_hom(v), (1, 1)) == pytest.approx((1 - v ** 2) / 2, abs=1e-12)


def test_hom_bunching_limits(make_hom):
    full = make_hom(1.0)
    assert probability_fock(full, (2, 0)) == pytest.approx(0.5)
    assert probability_fock(full, (0, 2)) == pytest.approx(0.5)
    assert probability_fock(full, (1, 1)) == pytest.approx(0.0, abs=1e-12)

    classical = make_hom(0.0)
    assert probability_fock(classical, (1, 1)) == pytest.approx(0.5)
    assert probability_fock(classical, (2, 0)) == pytest.approx(0.25)
    assert probability_fock(classical, (0, 2)) == pytest.approx(0.25)


def test_hom_coincidence_is_monotone_in_overlap(make_hom):
    values = [probability(make_hom(v), (1, 1)) for v in (0.0, 0.25, 0.5, 0.75, 1.0)]
    assert all(later <= earlier + 1e-12 for earlier, later in zip(values, values[1:]))


def test_hom_complex_overlap_uses_modulus(make_hom):
    assert probability_fock(make_hom(0.3 + 0.4j), (1, 1)) == pytest.approx((1 - 0.25) / 2, abs=1e-12)


def test_fock_path_errors(make_hom):
    s = make_hom(0.5)
    with pytest.raises(DomainError):
        probability_fock(s, (1, 0))
    with pytest.raises(DomainError):
        probability_fock(s, (2, 1))
    with pytest.raises(DimensionError):
        probability_fock(s, (1, 1, 0))
    coherent_scenario = single_port(coherent(0.5, 10))
    with pytest.raises(WrongPathError):
        probability_fock(coherent_scenario, (1,))


def test_fock_path_size_guard(make_hom, monkeypatch):
    monkeypatch.setattr(settings, "fock_path_max_photons", 1)
    with pytest.raises(SizeGuardError):
        probability_fock(make_hom(0.5), (1, 1))


# General path

def test_general_path_matches_fock_path_on_random_scenarios(rng, random_fock_scenario):
    """At least 50 random Fock scenarios with M, N <= 3 agree on every |m| = N pattern."""
    cases = 0
    while cases < 60:
        m = int(rng.integers(1, 4))
        photons = int(rng.integers(1, 4))
        s = random_fock_scenario(m, random_occupation(rng, m, photons))
        for pattern in occupation_vectors(photons, m):
            fast = probability_fock(s, pattern)
            general = probability_general(s, pattern)
            assert abs(fast - general) <= 1e-8, (s.input_occupation, pattern)
        cases += 1


def test_general_path_thermal_closed_form():
    s = single_port(thermal(1.0, 40), p_max=8)
    assert s.is_truncated
    for k in range(5):
        assert probability_general(s, (k,)) == pytest.approx(0.5 ** (k + 1), abs=1e-9)


def test_general_path_coherent_closed_form():
    s = single_port(coherent(1.0, 13))
    for k in range(5):
        assert probability_general(s, (k,)) == pytest.approx(math.exp(-1) / math.factorial(k), abs=1e-9)


def test_general_path_coherent_under_loss():
    eta = 0.6
    s = single_port(coherent(1.0, 13), eta)
    for k in range(5):
        expected = math.exp(-eta) * eta ** k / math.factorial(k)
        assert probability_general(s, (k,)) == pytest.approx(expected, abs=1e-9)


def test_general_path_pattern_checks(make_hom):
    s = make_hom(0.5)
    with pytest.raises(DomainError):
        probability_general(s, (2, 1))
    with pytest.raises(ValidationError):
        probability_general(s, (-1, 1))


def test_chebyshev_nodes_agree_with_unit_circle(make_hom, monkeypatch):
    s = make_hom(0.5, eta=(0.6, 0.9))
    reference = distribution(s)
    monkeypatch.setattr(settings, "interpolation_nodes", "chebyshev")
    chebyshev = distribution(s)
    assert chebyshev.metadata["interpolation_nodes"] == "chebyshev"
    assert reference.max_deviation(chebyshev) <= 1e-8


def test_ill_conditioned_interpolation_is_rejected(make_hom, monkeypatch):
    monkeypatch.setattr(settings, "interpolation_nodes", "chebyshev")
    monkeypatch.setattr(settings, "max_condition_number", 1.5)
    with pytest.raises(NumericalError, match="lower p_max"):
        probability_general(make_hom(0.5, eta=(0.5, 0.5)), (1, 0))


def test_generating_work_guard(make_hom, monkeypatch):
    s = make_hom(0.5, eta=(0.5, 0.5))
    # 3 x 3 grid points, one series term of size 2 for Fock inputs: 9 x 2^2
    monkeypatch.setattr(settings, "max_generating_work", 35)
    with pytest.raises(SizeGuardError, match="max_generating_work"):
        probability_general(s, (1, 1))
    with pytest.raises(SizeGuardError):
        distribution(s)
    monkeypatch.setattr(settings, "max_generating_work", 36)
    assert probability_general(s, (1, 1)) == pytest.approx(probability_fock(s, (1, 1)), abs=1e-10)


def test_probability_dispatch(make_hom):
    lossy = make_hom(0.5, eta=(0.8, 0.8))
    assert probability(lossy, (1, 1)) == pytest.approx(probability_fock(lossy, (1, 1)))
    assert probability(lossy, (1, 0)) == pytest.approx(probability_general(lossy, (1, 0)))


# Distribution

def test_distribution_of_vacuum_scenario():
    s = Scenario(np.eye(2), (vacuum(), vacuum()), GramMatrix(np.eye(2)), DetectorBank([0.3, 0.9]))
    table = distribution(s)
    assert table.entries == {(0, 0): 1.0}


def test_distribution_hom_full_dip(make_hom):
    table = distribution(make_hom(1.0))
    assert table[(2, 0)] == pytest.approx(0.5)
    assert table[(0, 2)] == pytest.approx(0.5)
    assert table[(1, 1)] == pytest.approx(0.0, abs=1e-12)
    for pattern in [(0, 0), (1, 0), (0, 1)]:
        assert table[pattern] == pytest.approx(0.0, abs=1e-12)
    assert table.paths[(1, 1)] == PATH_FOCK
    assert table.paths[(0, 0)] == PATH_GENERAL
    assert table.metadata["paths"] == [PATH_FOCK, PATH_GENERAL]


def test_distribution_complete_under_loss():
    s = fock_scenario(BALANCED_BS, (1, 1), model_uniform_overlap(2, 1.0), np.array([0.5, 0.5]))
    table = distribution(s)
    assert len(table) == 6
    assert table.total() == pytest.approx(1.0, abs=1e-8)
    # both photons bunch, so each port sees 0, 1 or 2 photons binomially thinned
    assert table[(1, 1)] == pytest.approx(0.0, abs=1e-12)
    assert table[(0, 0)] == pytest.approx(0.25)


def test_distribution_normalization_on_random_scenarios(rng, random_fock_scenario):
    for _ in range(30):
        m = int(rng.integers(1, 4))
        photons = int(rng.integers(1, 4))
        s = random_fock_scenario(m, random_occupation(rng, m, photons))
        assert distribution(s).total() == pytest.approx(1.0, abs=1e-8)


def test_single_photon_loss_marginal(rng):
    for eta in (0.2, 0.6, 1.0):
        s = fock_scenario(random_unitary(3, rng), (0, 1, 0), random_gram(rng, 3), np.full(3, eta))
        table = distribution(s)
        assert table[(0, 0, 0)] == pytest.approx(1 - eta, abs=1e-10)
        detected = sum(table[p] for p in occupation_vectors(1, 3))
        assert detected == pytest.approx(eta, abs=1e-10)


def test_distribution_pattern_order_and_max_total(make_hom):
    s = make_hom(0.5, eta=(0.7, 0.7))
    table = distribution(s, max_total=1)
    assert list(table.entries) == [(0, 0), (1, 0), (0, 1)]
    assert enumerate_patterns(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    with pytest.raises(DomainError):
        distribution(s, max_total=3)


def test_distribution_threads_do_not_change_results(make_hom):
    s = make_hom(0.3, eta=(0.4, 0.9))
    assert distribution(s).max_deviation(distribution(s, workers=3)) <= 1e-14


def test_distribution_metadata_reports_truncation():
    table = distribution(single_port(thermal(1.0, 40), p_max=8), max_total=3)
    assert table.metadata["cutoff"] == 8
    assert table.metadata["max_total"] == 3
    assert table.metadata["warnings"]
    assert len(table.metadata["scenario_digest"]) == 64
    assert [round(v, 12) for v in table.entries.values()] == [0.5, 0.25, 0.125, 0.0625]
    assert table.metadata["uniform_overlap"] is None


def test_distribution_metadata_reports_uniform_overlap(rng):
    complex_hom = fock_scenario(HADAMARD_BS, (1, 1), model_uniform_overlap(2, 0.3 - 0.4j))
    assert distribution(complex_hom).metadata["uniform_overlap"] == pytest.approx([0.3, -0.4])

    s = fock_scenario(random_unitary(3, rng), (1, 0, 1), random_gram(rng, 3))
    assert distribution(s).metadata["uniform_overlap"] is None


# Vacuum reduction

def test_vacuum_reduce_trivial_cases(make_hom):
    s = make_hom(0.5)
    assert vacuum_reduce(s) is s

    empty = Scenario(np.eye(2), (vacuum(), vacuum()), GramMatrix(np.eye(2)), DetectorBank([0.5, 0.5]))
    reduced = vacuum_reduce(empty)
    assert reduced.input_ports == 0
    assert reduced.output_ports == 2
    assert vacuum_probability(reduced) == 1.0


def test_vacuum_reduction_preserves_distribution(rng):
    """Full and reduced scenarios agree on every pattern for 1-2 vacuum ports."""
    layouts = [
        (fock(1), vacuum(), fock(1)),
        (vacuum(), fock(2), vacuum()),
        (fock(1), vacuum(), vacuum()),
        (vacuum(), fock(1), fock(1)),
        (fock(2), fock(1), vacuum()),
        (vacuum(), vacuum(), fock(3)),
        (coherent(0.4, 4, truncation_tolerance=1e-3), vacuum(), fock(1)),
        (vacuum(), thermal(0.2, 3, truncation_tolerance=1e-2), fock(1)),
        (coherent(0.3 + 0.2j, 3, truncation_tolerance=1e-3), vacuum(), vacuum()),
        (thermal(0.1, 2, truncation_tolerance=1e-2), coherent(0.2, 3, truncation_tolerance=1e-3), vacuum()),
    ]
    for sources in layouts:
        s = Scenario(
            random_unitary(3, rng),
            sources,
            random_gram(rng, 3),
            DetectorBank(rng.uniform(0.2, 1.0, 3)),
            p_max=3,
        )
        reduced = vacuum_reduce(s)
        assert reduced.input_ports < s.input_ports
        assert reduced.output_ports == s.output_ports
        full_table = distribution(s)
        reduced_table = distribution(reduced)
        assert list(full_table.entries) == list(reduced_table.entries)
        assert full_table.max_deviation(reduced_table) <= 1e-10


# ProbabilityTable

def test_probability_table_invariants():
    with pytest.raises(NumericalError):
        ProbabilityTable({(0,): 1.5})
    with pytest.raises(NumericalError):
        ProbabilityTable({(0,): -0.1})
    with pytest.raises(NumericalError):
        ProbabilityTable({(0,): 0.6, (1,): 0.6})
    table = ProbabilityTable({(0, 1): 0.25, (1, 0): 0.75}, {(0, 1): PATH_FOCK, (1, 0): PATH_FOCK})
    assert table[[1, 0]] == 0.75
    other = ProbabilityTable({(0, 1): 0.2})
    assert table.max_deviation(other) == pytest.approx(0.75)


def test_probability_table_to_dataframe(make_hom):
    frame = distribution(make_hom(1.0)).to_dataframe()
    assert list(frame.columns) == ["pattern", "probability", "path"]
    assert frame["pattern"].tolist()[:3] == ["0 0", "1 0", "0 1"]
    assert frame.loc[frame["pattern"] == "2 0", "probability"].iloc[0] == pytest.approx(0.5)


# Scenario helpers

def test_with_overlap_and_with_detectors(make_hom):
    s = make_hom(0.0)
    merged = with_overlap(s, model_uniform_overlap(2, 1.0))
    assert probability(merged, (1, 1)) == pytest.approx(0.0, abs=1e-12)
    lossy = with_detectors(s, DetectorBank([0.5, 0.5]))
    assert probability(lossy, (1, 1)) == pytest.approx(0.125)
    assert s.digest() != lossy.digest()
