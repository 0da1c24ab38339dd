"""
Pydantic models for PhotOptix

This module defines the data models used for validation and serialization of
scenario files and of the reports printed by the CLI.
"""

import math
from typing import Annotated, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Complex numbers are written as [re, im] pairs
ComplexPair = Annotated[List[float], Field(min_length=2, max_length=2)]
ComplexMatrixEntries = List[List[ComplexPair]]


class FileModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# Network section: a preset or an explicit matrix
class NetworkSpec(FileModel):
    preset: Optional[Literal["identity", "beamsplitter", "hadamard-bs", "dft"]] = None
    modes: Optional[int] = Field(None, ge=1)
    theta: float = math.pi / 4
    phi: float = 0.0
    matrix: Optional[ComplexMatrixEntries] = None

    @model_validator(mode="after")
    def check_choice(self):
        if (self.preset is None) == (self.matrix is None):
            raise ValueError("network needs exactly one of 'preset' or 'matrix'")
        if self.preset in ("identity", "dft") and self.modes is None:
            raise ValueError(f"preset '{self.preset}' needs 'modes'")
        return self


# Parameters of a single-mode source
class SourceParams(FileModel):
    n: Optional[int] = Field(None, ge=0)
    alpha: Optional[ComplexPair] = None
    nbar: Optional[float] = Field(None, ge=0)
    rho: Optional[ComplexMatrixEntries] = None


# Single-mode source entry
class SourceSpec(FileModel):
    type: Literal["vacuum", "fock", "coherent", "thermal", "custom"]
    params: SourceParams = SourceParams()
    cutoff: Optional[int] = Field(None, ge=0)
    truncation_tolerance: Optional[float] = Field(None, gt=0)
    mode_vector: Optional[List[ComplexPair]] = None
    label: Optional[str] = None

    @model_validator(mode="after")
    def check_params(self):
        required = {"fock": "n", "coherent": "alpha", "thermal": "nbar", "custom": "rho"}
        name = required.get(self.type)
        if name is not None and getattr(self.params, name) is None:
            raise ValueError(f"{self.type} source needs params.{name}")
        return self


# Scenario file for the single-mode engine
class ScenarioFile(FileModel):
    network: NetworkSpec
    sources: List[SourceSpec] = Field(min_length=1)
    gram: Optional[ComplexMatrixEntries] = None
    detectors: List[float] = Field(min_length=1)
    cutoff: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def check_overlaps(self):
        with_vectors = [s for s in self.sources if s.mode_vector is not None]
        if self.gram is not None and with_vectors:
            raise ValueError("give either 'gram' or per-source 'mode_vector', not both")
        if self.gram is None:
            missing = [i for i, s in enumerate(self.sources) if s.type != "vacuum" and s.mode_vector is None]
            if missing:
                raise ValueError(f"sources {missing} need a 'mode_vector' when no 'gram' is given")
        return self


# One internal mode of a samplable multimode source
class InternalModeSpec(FileModel):
    kind: Literal["vacuum", "coherent", "thermal"]
    alpha: ComplexPair = [0.0, 0.0]
    nbar: float = Field(0.0, ge=0)


class MultimodeSourceSpec(FileModel):
    modes: List[InternalModeSpec] = Field(min_length=1)


# Scenario file for multimode Monte-Carlo runs
class MultimodeScenarioFile(FileModel):
    network: NetworkSpec
    sources: List[MultimodeSourceSpec] = Field(min_length=1)
    detectors: List[float] = Field(min_length=1)
    d: int = Field(ge=1)
    sample_count: int = Field(ge=2)
    rng_seed: int = Field(ge=0, lt=2 ** 64)

    @field_validator("sources")
    @classmethod
    def check_dimensions(cls, sources):
        dims = {len(s.modes) for s in sources}
        if len(dims) > 1:
            raise ValueError(f"every source needs the same number of internal modes, got {sorted(dims)}")
        return sources


# Report of the normal/anti-normal ordering fixture
class OrderingReport(BaseModel):
    n_max: int
    xi: float
    lam: float
    normal_diagonal_deviation: float
    normal_offdiagonal_max: float
    anti_normal_deviation: float
    relation_deviation: float
    max_deviation: float
    series_terms_used: int


# Report of the Gaussian integral quadrature fixture
class GaussianIntegralReport(BaseModel):
    dimension: int
    numeric_real: float
    numeric_imag: float
    closed_form_real: float
    closed_form_imag: float
    relative_deviation: float
    grid_points: int
    step: float


# Multimode vacuum-probability estimate
class MultimodeEstimate(BaseModel):
    estimate: float
    std_error: float
    sample_count: int
    rng_seed: int
    scenario_digest: Optional[str] = None
