"""
scenario_file.py - Load scenario files into engine objects

Scenario files are JSON documents validated against the pydantic models in
photoptix.models. Complex entries are [re, im] pairs. The digest of a file is
the SHA-256 of its canonical JSON form (defaults filled in, keys sorted), so
it changes exactly when a field that reaches a computation changes.
"""

import hashlib
import json
import logging
import math

import numpy as np
import pydantic

from photoptix import sources as source_states
from photoptix.distinguishability import GramMatrix, ModeVector, gram_for_ports
from photoptix.engine import DetectorBank, Scenario
from photoptix.errors import ValidationError
from photoptix.models import MultimodeScenarioFile, ScenarioFile
from photoptix.multimode import InternalModeState, MultimodeScenario, SamplableHusimiSource

logger = logging.getLogger(__name__)


def load_document(path):
    """
    Read a JSON document.

    Args:
        path (str): File path

    Returns:
        dict: Parsed document
    """
    with open(path, "r", encoding="utf-8") as handle:
        text = handle.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _parse(model, data, path):
    try:
        return model.model_validate(data)
    except pydantic.ValidationError as exc:
        first = exc.errors()[0]
        location = ".".join(str(part) for part in first["loc"]) or "<document>"
        raise ValidationError(f"{path}: field '{location}': {first['msg']}") from exc


def is_multimode_document(data):
    return isinstance(data, dict) and ("rng_seed" in data or "sample_count" in data)


# Fields each builder actually reads
_PRESET_FIELDS = {None: ("matrix",), "identity": ("modes",), "dft": ("modes",),
                  "beamsplitter": ("theta", "phi"), "hadamard-bs": ()}
_SOURCE_PARAMS = {"vacuum": (), "fock": ("n",), "coherent": ("alpha",), "thermal": ("nbar",), "custom": ("rho",)}
_INTERNAL_MODE_FIELDS = {"vacuum": (), "coherent": ("alpha",), "thermal": ("nbar",)}


def _canonical_network(network):
    fields = _PRESET_FIELDS[network["preset"]]
    return {"preset": network["preset"], **{name: network[name] for name in fields}}


def _canonical_source(source):
    kind = source["type"]
    canonical = {
        "type": kind,
        "params": {name: source["params"][name] for name in _SOURCE_PARAMS[kind]},
        "mode_vector": source["mode_vector"],
    }
    if kind != "vacuum":
        canonical["cutoff"] = source["cutoff"]
    if kind in ("coherent", "thermal", "custom"):
        canonical["truncation_tolerance"] = source["truncation_tolerance"]
    return canonical


def canonical_document(model):
    """
    JSON-ready form of a parsed scenario file holding only the fields that reach a computation.

    Defaults are filled in. Source labels, preset parameters the preset ignores
    and parameters of other source types are dropped.

    Args:
        model (ScenarioFile or MultimodeScenarioFile): Parsed file

    Returns:
        dict: Canonical document
    """
    document = model.model_dump(mode="json")
    document["network"] = _canonical_network(document["network"])
    if isinstance(model, MultimodeScenarioFile):
        document["sources"] = [
            {"modes": [{"kind": m["kind"], **{f: m[f] for f in _INTERNAL_MODE_FIELDS[m["kind"]]}}
                       for m in source["modes"]]}
            for source in document["sources"]
        ]
    else:
        document["sources"] = [_canonical_source(source) for source in document["sources"]]
    return document


def digest(model):
    """SHA-256 of the canonical JSON form of a parsed scenario file."""
    canonical = json.dumps(canonical_document(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def complex_array(entries):
    """Convert nested [re, im] pairs into a complex array."""
    pairs = np.asarray(entries, dtype=np.float64)
    return pairs[..., 0] + 1j * pairs[..., 1]


def build_network(spec):
    """
    Network matrix from a NetworkSpec.

    Presets:
        identity      I_M
        beamsplitter  [[cos t, e^{i p} sin t], [-e^{-i p} sin t, cos t]]
        hadamard-bs   [[1, 1], [1, -1]] / sqrt(2)
        dft           U[k, l] = exp(2 pi i k l / M) / sqrt(M), zero-based
    """
    if spec.matrix is not None:
        return complex_array(spec.matrix)
    if spec.preset == "identity":
        return np.eye(spec.modes, dtype=np.complex128)
    if spec.preset == "beamsplitter":
        c, s = math.cos(spec.theta), math.sin(spec.theta)
        phase = np.exp(1j * spec.phi)
        return np.array([[c, phase * s], [-np.conj(phase) * s, c]], dtype=np.complex128)
    if spec.preset == "hadamard-bs":
        return np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / math.sqrt(2.0)
    k = np.arange(spec.modes)
    return np.exp(2j * np.pi * np.outer(k, k) / spec.modes) / math.sqrt(spec.modes)


def build_source(spec):
    """SingleModeSource for one SourceSpec; cutoffs default to the certified minimum."""
    params = spec.params
    tol = spec.truncation_tolerance
    if spec.type == "vacuum":
        return source_states.vacuum()
    if spec.type == "fock":
        return source_states.fock(params.n, spec.cutoff)
    if spec.type == "coherent":
        alpha = complex(*params.alpha)
        cutoff = spec.cutoff if spec.cutoff is not None else source_states.required_cutoff("coherent", alpha, tol)
        return source_states.coherent(alpha, cutoff, tol)
    if spec.type == "thermal":
        cutoff = spec.cutoff if spec.cutoff is not None else source_states.required_cutoff("thermal", params.nbar, tol)
        return source_states.thermal(params.nbar, cutoff, tol)
    return source_states.custom(complex_array(params.rho), tol, label=spec.label or "custom")


def build_scenario(model):
    """
    Scenario from a parsed ScenarioFile.

    Every constructor validates its own invariants, so the first violated
    invariant surfaces as a ValidationError.
    """
    network = build_network(model.network)
    sources = [build_source(spec) for spec in model.sources]
    if model.gram is not None:
        gram = GramMatrix(complex_array(model.gram))
    else:
        gram = gram_for_ports(
            [None if spec.mode_vector is None else ModeVector(complex_array(spec.mode_vector)) for spec in model.sources]
        )
    return Scenario(
        network=network,
        sources=tuple(sources),
        gram=gram,
        detectors=DetectorBank(model.detectors),
        p_max=model.cutoff,
    )


def internal_dimension(model):
    """Length of the per-source mode vectors, or None when the file gives a Gram matrix."""
    for spec in model.sources:
        if spec.mode_vector is not None:
            return len(spec.mode_vector)
    return None


def mode_vectors(model, d):
    """
    Explicit mode vectors for the oracle, or None when the file gives a Gram matrix.

    Vacuum sources without a vector carry no photons, so any vector of length
    d stands in for them.
    """
    if model.gram is not None:
        return None
    placeholder = np.eye(d, 1).ravel()
    return [
        ModeVector(placeholder if spec.mode_vector is None else complex_array(spec.mode_vector))
        for spec in model.sources
    ]


def build_multimode_scenario(model):
    """MultimodeScenario from a parsed MultimodeScenarioFile."""
    sources = []
    for spec in model.sources:
        modes = tuple(InternalModeState(m.kind, alpha=complex(*m.alpha), nbar=m.nbar) for m in spec.modes)
        sources.append(SamplableHusimiSource(modes))
    return MultimodeScenario(
        network=build_network(model.network),
        sources=tuple(sources),
        detectors=DetectorBank(model.detectors),
        d=model.d,
        sample_count=model.sample_count,
        rng_seed=model.rng_seed,
    )


def load_scenario(path):
    """
    Load and validate a single-mode scenario file.

    Args:
        path (str): File path

    Returns:
        tuple: (Scenario, parsed ScenarioFile, digest)
    """
    model = _parse(ScenarioFile, load_document(path), path)
    scenario = build_scenario(model)
    logger.info(f"loaded scenario {path}: {scenario.input_ports} ports, p_max = {scenario.p_max}")
    return scenario, model, digest(model)


def load_multimode_scenario(path):
    """
    Load and validate a multimode scenario file.

    Args:
        path (str): File path

    Returns:
        tuple: (MultimodeScenario, parsed MultimodeScenarioFile, digest)
    """
    model = _parse(MultimodeScenarioFile, load_document(path), path)
    scenario = build_multimode_scenario(model)
    logger.info(f"loaded multimode scenario {path}: d = {scenario.d}, {scenario.sample_count} samples")
    return scenario, model, digest(model)
