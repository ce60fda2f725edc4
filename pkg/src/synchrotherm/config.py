"""Run configuration: strict JSON schemas, parsing and model construction."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .bath import BathSpec
from .errors import ConfigError, SynchrothermError
from .models import (
    DispersiveSpec,
    NDModelSpec,
    build_dispersive,
    build_generic_composite,
    build_nd_model,
)
from .spectral_core import HermitianOperator, eigendecompose, matrix_from_json

SCHEMA_VERSION = 1
COMMANDS = ("analyze", "evolve", "fc-table", "blockade", "validate")

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_matrix = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dim", "entries"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "entries": {
            "type": "array",
            "items": {
                "type": "array",
                "items": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
            },
        },
    },
}

MODEL_SCHEMAS = {
    "nd": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "level_energies", "osc_freqs", "couplings", "n_max"],
        "properties": {
            "kind": {"const": "nd"},
            "level_energies": {"type": "array", "items": _number, "minItems": 2},
            "osc_freqs": {"type": "array", "items": _positive, "minItems": 1},
            "couplings": {"type": "array", "items": {"type": "array", "items": _number, "minItems": 1}},
            "n_max": {
                "oneOf": [
                    {"type": "integer", "minimum": 1},
                    {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                ]
            },
            "energy_cap": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "leakage_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        },
    },
    "dispersive": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "qubit_gap", "resonator_freq", "dispersive_shift", "n_max"],
        "properties": {
            "kind": {"const": "dispersive"},
            "qubit_gap": _number,
            "resonator_freq": _positive,
            "dispersive_shift": _number,
            "n_max": {"type": "integer", "minimum": 1},
        },
    },
    "generic": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "H_a", "H_b", "V_ab", "A_ops"],
        "properties": {
            "kind": {"const": "generic"},
            "H_a": _matrix,
            "H_b": _matrix,
            "V_ab": _matrix,
            "A_ops": {"type": "array", "items": _matrix},
        },
    },
}

BATH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family", "coupling", "beta"],
    "properties": {
        "family": {"enum": ["ohmic_exp_cutoff", "flat"]},
        "coupling": _positive,
        "cutoff": _positive,
        "beta": {"oneOf": [_positive, {"const": "inf"}]},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "model", "bath"],
    "properties": {
        "version": {"type": "integer"},
        "model": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": list(MODEL_SCHEMAS)}},
        },
        "bath": BATH_SCHEMA,
        "initial_state": {
            "oneOf": [
                {"type": "string", "pattern": r"^(ground|uniform|level:\d+|label:-?\d+(,\d+)+)$"},
                {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
            ]
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"edge_threshold": {"type": "number", "minimum": 0}, "gap_tol": _positive},
        },
    },
}

REPORT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": [
        "version", "model_kind", "n_levels", "levels", "kind", "connected", "components",
        "component_weights", "populations", "residual", "residual_bound", "stationary",
        "null_space_discrepancy", "edge_threshold", "gap_tol", "degenerate_pairs", "warnings",
        "spectral_gap",
    ],
    "properties": {
        "version": {"const": SCHEMA_VERSION},
        "model_kind": {"enum": list(MODEL_SCHEMAS)},
        "n_levels": {"type": "integer", "minimum": 1},
        "levels": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["index", "energy", "label"],
                "properties": {
                    "index": {"type": "integer"},
                    "energy": _number,
                    "label": {"type": ["array", "null"]},
                },
            },
        },
        "kind": {"enum": ["canonical", "mixture"]},
        "connected": {"type": "boolean"},
        "components": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}},
        "component_weights": {"type": "array", "items": _number},
        "populations": {"type": "array", "items": _number},
        "residual": _number,
        "residual_bound": _number,
        "stationary": {"type": "boolean"},
        "null_space_discrepancy": _number,
        "edge_threshold": _number,
        "gap_tol": _number,
        "degenerate_pairs": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
        },
        "warnings": {"type": "array", "items": {"type": "string"}},
        "spectral_gap": {"type": ["number", "null"]},
    },
}


def _path(prefix: str, error: jsonschema.ValidationError) -> str:
    out = prefix
    for part in error.absolute_path:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else str(part))
    return out or "<root>"


def schema_problems(instance, schema, prefix: str = "") -> list[str]:
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: list(map(str, e.absolute_path)))
    return [f"{_path(prefix, e)}: {e.message}" for e in errors]


@dataclass
class RunConfig:
    command: str
    model: dict | None = None
    bath: BathSpec | None = None
    initial_state: Any = "ground"
    thresholds: dict = field(default_factory=dict)
    output: Path | None = None
    fmt: str = "json"
    options: dict = field(default_factory=dict)


def validate_document(doc: Any) -> list[str]:
    """Every schema and consistency violation in a configuration document."""
    problems = schema_problems(doc, CONFIG_SCHEMA)
    if not isinstance(doc, dict):
        return problems
    if "version" in doc and isinstance(doc["version"], int) and doc["version"] != SCHEMA_VERSION:
        problems.append(f"version: expected schema version {SCHEMA_VERSION}, got {doc['version']}")
    model = doc.get("model")
    if isinstance(model, dict) and model.get("kind") in MODEL_SCHEMAS:
        problems += schema_problems(model, MODEL_SCHEMAS[model["kind"]], "model")
        if model["kind"] == "nd" and not any(p.startswith("model.") for p in problems):
            n, m = len(model["level_energies"]), len(model["osc_freqs"])
            xi = model["couplings"]
            if len(xi) != n or any(len(row) != m for row in xi):
                problems.append(f"model.couplings: expected a {n} x {m} matrix (levels x modes)")
            if isinstance(model["n_max"], list) and len(model["n_max"]) != m:
                problems.append(f"model.n_max: expected one entry per mode ({m})")
    return problems


def load_document(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None


def config_from_document(doc: dict, command: str = "analyze") -> RunConfig:
    problems = validate_document(doc)
    if problems:
        raise ConfigError(problems)
    return RunConfig(
        command=command,
        model=doc["model"],
        bath=BathSpec.from_json(doc["bath"]),
        initial_state=doc.get("initial_state", "ground"),
        thresholds=dict(doc.get("thresholds", {})),
    )


@dataclass(frozen=True)
class BuiltSystem:
    """Model ready for the rate builder: the system object plus its couplings."""

    kind: str
    system: Any
    couplings: Any
    energies: np.ndarray
    labels: tuple | None


def build_system(model: dict) -> BuiltSystem:
    kind = model["kind"]
    if kind == "nd":
        spec = NDModelSpec(
            level_energies=model["level_energies"],
            osc_freqs=model["osc_freqs"],
            couplings=model["couplings"],
            n_max=model["n_max"],
            energy_cap=model.get("energy_cap"),
            leakage_tol=model.get("leakage_tol", 1e-6),
        )
        eig = build_nd_model(spec)
        return BuiltSystem(kind, eig, None, eig.energies, eig.levels)
    if kind == "dispersive":
        dm = build_dispersive(
            DispersiveSpec(model["qubit_gap"], model["resonator_freq"], model["dispersive_shift"], model["n_max"])
        )
        return BuiltSystem(kind, dm.basis, dm.channels, dm.basis.energies, dm.basis.labels)
    h, channels = build_generic_composite(
        HermitianOperator.from_json(model["H_a"]),
        HermitianOperator.from_json(model["H_b"]),
        HermitianOperator.from_json(model["V_ab"]),
        [matrix_from_json(a) for a in model["A_ops"]],
    )
    basis = eigendecompose(h)
    return BuiltSystem(kind, basis, channels, basis.energies, None)


def _label_key(label) -> tuple:
    flat = []
    for part in label:
        flat.extend(part if isinstance(part, tuple) else (part,))
    return tuple(int(v) for v in flat)


def initial_populations(spec, energies, labels=None) -> np.ndarray:
    """Resolve a population vector or preset (``ground``, ``uniform``, ``level:k``, ``label:p,n...``)."""
    n = len(energies)
    if isinstance(spec, str):
        if spec == "ground":
            p = np.zeros(n)
            p[int(np.argmin(energies))] = 1.0
            return p
        if spec == "uniform":
            return np.full(n, 1.0 / n)
        if spec.startswith("level:"):
            k = int(spec.split(":", 1)[1])
            if not 0 <= k < n:
                raise ConfigError([f"initial_state: level {k} out of range 0..{n - 1}"])
            p = np.zeros(n)
            p[k] = 1.0
            return p
        if spec.startswith("label:"):
            want = tuple(int(v) for v in spec.split(":", 1)[1].split(","))
            if labels is None:
                raise ConfigError(["initial_state: label presets need a model with level labels"])
            for k, lab in enumerate(labels):
                if _label_key(lab) == want:
                    p = np.zeros(n)
                    p[k] = 1.0
                    return p
            raise ConfigError([f"initial_state: no level labelled {want}"])
        raise ConfigError([f"initial_state: unknown preset {spec!r}"])
    p = np.asarray(spec, dtype=float)
    if p.size != n:
        raise ConfigError([f"initial_state: expected {n} populations, got {p.size}"])
    if abs(p.sum() - 1.0) > 1e-9:
        raise ConfigError([f"initial_state: populations sum to {p.sum()!r}, expected 1"])
    return p


def json_label(label):
    if label is None:
        return None
    return [list(part) if isinstance(part, tuple) else int(part) for part in label]


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError([f"cannot parse number list {text!r}"]) from None


def finite_or_none(x) -> float | None:
    return float(x) if x is not None and math.isfinite(x) else None


__all__ = [
    "COMMANDS",
    "CONFIG_SCHEMA",
    "REPORT_SCHEMA",
    "RunConfig",
    "BuiltSystem",
    "SynchrothermError",
    "build_system",
    "config_from_document",
    "initial_populations",
    "load_document",
    "validate_document",
]
