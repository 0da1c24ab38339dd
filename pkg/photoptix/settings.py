"""
settings.py - Numeric defaults and size guards for PhotOptix

Every tolerance and guard used by the library lives here so that the engine,
the oracle and the CLI agree on the same numbers. Individual operations accept
keyword overrides; nothing is read from the environment.
"""

from typing import Literal

from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Library-wide tolerances, guards and defaults."""

    # Validation tolerances
    truncation_tolerance: float = Field(1e-10, gt=0)
    unitarity_tolerance: float = Field(1e-10, gt=0)
    hermitian_tolerance: float = Field(1e-12, gt=0)
    psd_tolerance: float = Field(1e-9, gt=0)
    unit_diagonal_tolerance: float = Field(1e-10, gt=0)
    normalization_tolerance: float = Field(1e-10, gt=0)

    # Probability bookkeeping
    probability_floor: float = Field(1e-9, gt=0)
    probability_sum_tolerance: float = Field(1e-8, gt=0)
    imaginary_residue_tolerance: float = Field(1e-9, gt=0)

    # Size guards
    naive_permanent_max: int = Field(9, ge=1)
    ryser_permanent_max: int = Field(26, ge=1)
    ryser_chunk_bits: int = Field(16, ge=4)
    fock_path_max_photons: int = Field(8, ge=1)
    max_factorial: int = Field(170, ge=1)
    oracle_max_states: int = Field(20000, ge=1)
    max_generating_work: int = Field(20_000_000, ge=1)

    # Derivative extraction
    interpolation_nodes: Literal["unit-circle", "chebyshev"] = "unit-circle"
    max_condition_number: float = Field(1e12, gt=1)
    max_grid_points: int = Field(65536, ge=1)

    # Multimode Monte-Carlo
    min_eta_gap: float = Field(1e-6, gt=0)
    mc_block_size: int = Field(4096, ge=1)

    # Fixtures
    quadrature_step: float = Field(0.01, gt=0)
    quadrature_step_matrix: float = Field(0.2, gt=0)
    quadrature_radius_sigmas: float = Field(6.0, gt=0)
    ordering_series_terms: int = Field(200, ge=1)
    ordering_tail_tolerance: float = Field(1e-15, gt=0)

    # Output
    output_significant_digits: int = Field(12, ge=1)
    oracle_agreement_tolerance: float = Field(1e-8, gt=0)
    bench_agreement_tolerance: float = Field(1e-10, gt=0)

    model_config = {"validate_assignment": True}


settings = Settings()
