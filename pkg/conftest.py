"""
conftest.py - Shared fixtures for the PhotOptix test suite

Provides seeded random generators, the balanced beamsplitter used in the HOM
tests and small scenario builders.
"""

import math

import numpy as np
import pytest

from photoptix.distinguishability import ModeVector, gram_matrix, model_uniform_overlap
from photoptix.engine import DetectorBank, Scenario
from photoptix.linalg import random_unitary
from photoptix.sources import fock

HADAMARD_BS = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / math.sqrt(2.0)


def random_mode_vectors(rng, m, d):
    """m random normalized complex vectors of length d."""
    raw = rng.standard_normal((m, d)) + 1j * rng.standard_normal((m, d))
    return [ModeVector.normalized(row) for row in raw]


def random_gram(rng, m, d=2):
    """Random Gram matrix of rank <= d."""
    return gram_matrix(random_mode_vectors(rng, m, d))


def fock_scenario(network, occupation, gram, eta=None, p_max=None):
    """Scenario with Fock sources given by an occupation vector."""
    network = np.asarray(network, dtype=np.complex128)
    eta = np.ones(network.shape[1]) if eta is None else eta
    sources = tuple(fock(n) for n in occupation)
    return Scenario(network, sources, gram, DetectorBank(eta), p_max=p_max)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def hadamard_bs():
    return HADAMARD_BS.copy()


@pytest.fixture
def make_hom():
    """Builder for the two-photon HOM scenario with overlap v."""

    def build(v, eta=(1.0, 1.0)):
        return fock_scenario(HADAMARD_BS, (1, 1), model_uniform_overlap(2, v), np.asarray(eta))

    return build


@pytest.fixture
def random_fock_scenario(rng):
    """Builder for random Fock scenarios with Haar networks and random overlaps."""

    def build(m, occupation, eta=None, d=2):
        network = random_unitary(m, rng)
        gram = random_gram(rng, m, d)
        eta = rng.uniform(0.0, 1.0, m) if eta is None else eta
        return fock_scenario(network, occupation, gram, eta)

    return build
