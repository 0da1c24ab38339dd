"""
test_multimode.py - Tests for the multimode Monte-Carlo vacuum probability
"""

import math

import numpy as np
import pytest

from photoptix.distinguishability import GramMatrix
from photoptix.engine import DetectorBank, Scenario, vacuum_probability
from photoptix.errors import DimensionError, SingularityError, ValidationError
from photoptix.multimode import (
    InternalModeState,
    MultimodeScenario,
    SamplableHusimiSource,
    build_calligraphic_H,
    estimate_vacuum_probability,
)
from photoptix.sources import coherent, thermal

BEAMSPLITTER = np.array(
    [[math.cos(0.6), np.exp(0.3j) * math.sin(0.6)], [-np.exp(-0.3j) * math.sin(0.6), math.cos(0.6)]]
)


def coherent_mode(alpha):
    return SamplableHusimiSource((InternalModeState("coherent", alpha=alpha),))


def thermal_mode(nbar):
    return SamplableHusimiSource((InternalModeState("thermal", nbar=nbar),))


def within_standard_errors(estimate, std_error, expected, count=3.0):
    return abs(estimate - expected) <= count * std_error


def test_build_calligraphic_H_examples():
    assert np.allclose(build_calligraphic_H(BEAMSPLITTER, DetectorBank([0.0, 0.0]), 3), np.eye(6))
    assert np.allclose(build_calligraphic_H(np.eye(1), DetectorBank([0.5]), 2), 0.5 * np.eye(2))
    balanced = np.array([[1.0, 1.0], [-1.0, 1.0]]) / math.sqrt(2.0)
    assert np.allclose(build_calligraphic_H(balanced, DetectorBank([0.5, 0.5]), 1), 0.5 * np.eye(2))


def test_build_calligraphic_H_determinant():
    eta = np.array([0.3, 0.75])
    hc = build_calligraphic_H(BEAMSPLITTER, DetectorBank(eta), 2)
    assert hc.shape == (4, 4)
    assert np.linalg.det(hc).real == pytest.approx(np.prod((1 - eta) ** 2), abs=1e-9)


def test_perfect_detection_is_singular():
    with pytest.raises(SingularityError):
        build_calligraphic_H(np.eye(1), DetectorBank([1.0]), 1)
    with pytest.raises(SingularityError):
        MultimodeScenario(np.eye(1), (coherent_mode(1.0),), DetectorBank([1.0]), 1, 100, 7)


def test_scenario_validation():
    with pytest.raises(ValidationError):
        MultimodeScenario(np.eye(1), (coherent_mode(1.0),), DetectorBank([0.5]), 1, 1, 7)
    with pytest.raises(ValidationError):
        MultimodeScenario(np.eye(1), (coherent_mode(1.0),), DetectorBank([0.5]), 1, 100, -1)
    with pytest.raises(DimensionError):
        MultimodeScenario(np.eye(1), (SamplableHusimiSource.vacuum(2),), DetectorBank([0.5]), 1, 100, 7)
    with pytest.raises(ValidationError, match="unitarity violated"):
        MultimodeScenario([[1.0, 0.0], [0.0, 2.0]], (coherent_mode(0.0),) * 2, DetectorBank([0.5, 0.5]), 1, 100, 7)


def test_vacuum_sources_without_detection_give_constant_weight():
    ms = MultimodeScenario(
        BEAMSPLITTER, (SamplableHusimiSource.vacuum(2),) * 2, DetectorBank([0.0, 0.0]), 2, 1000, 11
    )
    estimate, std_error = estimate_vacuum_probability(ms)
    assert estimate == 1.0
    assert std_error == 0.0


def test_single_coherent_mode_closed_form():
    alpha, eta = 0.9 - 0.4j, 0.6
    ms = MultimodeScenario(np.eye(1), (coherent_mode(alpha),), DetectorBank([eta]), 1, 100000, 2024)
    estimate, std_error = estimate_vacuum_probability(ms)
    assert within_standard_errors(estimate, std_error, math.exp(-eta * abs(alpha) ** 2))
    assert -3 * std_error <= estimate <= 1 + 3 * std_error


def test_all_coherent_closed_form_with_internal_modes():
    alphas = np.array([0.7, 0.5j])
    vectors = [np.array([1.0, 0.0]), np.array([0.6, 0.8j])]
    eta = np.array([0.4, 0.7])
    ms = MultimodeScenario(
        BEAMSPLITTER,
        tuple(SamplableHusimiSource.coherent_in_mode(a, v) for a, v in zip(alphas, vectors)),
        DetectorBank(eta),
        2,
        100000,
        99,
    )
    displacement = np.array([a * v for a, v in zip(alphas, vectors)])
    output = BEAMSPLITTER.conj().T @ displacement
    expected = math.exp(-float(np.sum(eta[:, None] * np.abs(output) ** 2)))
    estimate, std_error = estimate_vacuum_probability(ms)
    assert within_standard_errors(estimate, std_error, expected)


def test_embedded_single_mode_sources_match_engine():
    alpha, nbar = 0.5 + 0.2j, 0.3
    eta = [0.6, 0.8]
    series = Scenario(
        BEAMSPLITTER,
        (coherent(alpha, 6, truncation_tolerance=1e-6), thermal(nbar, 9, truncation_tolerance=1e-6)),
        GramMatrix(np.ones((2, 2))),
        DetectorBank(eta),
    )
    expected = vacuum_probability(series)

    ms = MultimodeScenario(BEAMSPLITTER, (coherent_mode(alpha), thermal_mode(nbar)), DetectorBank(eta), 1, 100000, 5)
    estimate, std_error = estimate_vacuum_probability(ms)
    assert within_standard_errors(estimate, std_error, expected)


def test_thermal_mode_matches_loss_formula():
    nbar, eta = 0.8, 0.5
    ms = MultimodeScenario(np.eye(1), (thermal_mode(nbar),), DetectorBank([eta]), 1, 100000, 31)
    estimate, std_error = estimate_vacuum_probability(ms)
    assert within_standard_errors(estimate, std_error, 1 / (1 + eta * nbar))


def test_fixed_seed_is_bit_reproducible_across_workers():
    ms = MultimodeScenario(
        BEAMSPLITTER, (coherent_mode(0.4), thermal_mode(0.5)), DetectorBank([0.3, 0.9]), 1, 20000, 123
    )
    first = estimate_vacuum_probability(ms)
    assert estimate_vacuum_probability(ms) == first
    assert estimate_vacuum_probability(ms, workers=4) == first


def test_different_seeds_give_different_estimates():
    def run(seed):
        ms = MultimodeScenario(np.eye(1), (coherent_mode(1.0),), DetectorBank([0.5]), 1, 5000, seed)
        return estimate_vacuum_probability(ms)[0]

    assert run(1) != run(2)


def test_standard_error_scales_with_sample_count():
    def std_error(count):
        ms = MultimodeScenario(np.eye(1), (coherent_mode(1.2),), DetectorBank([0.5]), 1, count, 77)
        return estimate_vacuum_probability(ms)[1]

    ratio = std_error(10000) / std_error(40000)
    assert 1.8 <= ratio <= 2.2
