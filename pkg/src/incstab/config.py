"""Experiment configuration: JSON schema, strict validation, hashing."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .backstepping import BacksteppingGains, gains_for_system
from .errors import ConfigError, ContractError
from .model import HamiltonianSystem, ValidityBox
from .pendulum import PendulumParams, build_pendulum, default_box
from .signals import make_signal

MODEL_REGISTRY = {"pendulum": (build_pendulum, PendulumParams, default_box)}

_SECTIONS = {
    "model", "gains", "simulation", "initial", "inputs", "verification",
    "seed", "output_dir",
}


def _require_mapping(obj: Any, allowed: set[str], path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError("expected a JSON object", path)
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", path)
    return obj


def _number(obj: dict, key: str, path: str, *, default=None, required=False,
            minimum=None, strict_min=None, integer=False):
    if key not in obj:
        if required:
            raise ConfigError("missing required key", f"{path}.{key}")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", f"{path}.{key}")
    if integer and int(value) != value:
        raise ConfigError("expected an integer", f"{path}.{key}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}", f"{path}.{key}")
    if strict_min is not None and value <= strict_min:
        raise ConfigError(f"must be > {strict_min}", f"{path}.{key}")
    return int(value) if integer else float(value)


def _vector(obj: dict, key: str, path: str, length: int | None = None) -> np.ndarray:
    if key not in obj:
        raise ConfigError("missing required key", f"{path}.{key}")
    value = obj[key]
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError("expected a list of numbers", f"{path}.{key}")
    vec = np.asarray(value, dtype=float)
    if length is not None and vec.size != length:
        raise ConfigError(f"expected {length} entries, got {vec.size}", f"{path}.{key}")
    return vec


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; `raw` retains the loaded document."""

    raw: dict
    model_name: str
    model_params: dict
    box_override: dict | None
    gains_spec: dict
    simulation: dict
    x0: np.ndarray | None
    x0_prime: np.ndarray | None
    input_spec: dict | None
    input_prime_spec: dict | None
    verification: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str | None = None

    def sha256(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a loaded JSON document; unknown keys are rejected everywhere."""
    _require_mapping(doc, _SECTIONS, "")

    model = _require_mapping(doc.get("model", {}), {"name", "params", "box"}, "model")
    name = model.get("name")
    if name not in MODEL_REGISTRY:
        raise ConfigError(
            f"unknown model {name!r}; known: {sorted(MODEL_REGISTRY)}", "model.name"
        )
    params = model.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("expected a JSON object", "model.params")
    box_override = None
    if "box" in model:
        box = _require_mapping(model["box"], {"lower", "upper"}, "model.box")
        box_override = {
            "lower": _vector(box, "lower", "model.box"),
            "upper": _vector(box, "upper", "model.box"),
        }

    gains = _require_mapping(
        doc.get("gains", {}), {"k", "kappa1", "eps1", "eps2"}, "gains"
    )
    gains_spec = {
        "k": _number(gains, "k", "gains", required=True, minimum=2),
        "kappa1": _number(gains, "kappa1", "gains", required=True, strict_min=0.0),
        "eps1": _number(gains, "eps1", "gains", required=True, strict_min=0.0),
        "eps2": None,
    }
    if gains.get("eps2") is not None:
        gains_spec["eps2"] = _number(gains, "eps2", "gains", strict_min=0.0)

    sim_doc = _require_mapping(
        doc.get("simulation", {}),
        {"t_final", "dt", "realizations", "record_stride", "chunk_size"},
        "simulation",
    )
    simulation = {
        "t_final": _number(sim_doc, "t_final", "simulation", default=5.0, strict_min=0.0),
        "dt": _number(sim_doc, "dt", "simulation", default=1e-3, strict_min=0.0),
        "realizations": _number(sim_doc, "realizations", "simulation",
                                default=5000, minimum=2, integer=True),
        "record_stride": _number(sim_doc, "record_stride", "simulation",
                                 default=10, minimum=1, integer=True),
        "chunk_size": _number(sim_doc, "chunk_size", "simulation",
                              default=500, minimum=1, integer=True),
    }

    x0 = x0_prime = None
    if "initial" in doc:
        initial = _require_mapping(doc["initial"], {"x0", "x0_prime"}, "initial")
        x0 = _vector(initial, "x0", "initial")
        if "x0_prime" in initial:
            x0_prime = _vector(initial, "x0_prime", "initial", length=x0.size)

    input_spec = input_prime_spec = None
    if "inputs" in doc:
        inputs = _require_mapping(doc["inputs"], {"u", "u_prime"}, "inputs")
        input_spec = inputs.get("u")
        input_prime_spec = inputs.get("u_prime", input_spec)

    ver_doc = _require_mapping(
        doc.get("verification", {}),
        {"samples", "input_bound", "margin_tolerance", "slack_sigmas"},
        "verification",
    )
    verification = {
        "samples": _number(ver_doc, "samples", "verification",
                           default=10000, minimum=1, integer=True),
        "input_bound": _number(ver_doc, "input_bound", "verification",
                               default=1.0, minimum=0.0),
        "margin_tolerance": _number(ver_doc, "margin_tolerance", "verification",
                                    default=1e-9, minimum=0.0),
        "slack_sigmas": _number(ver_doc, "slack_sigmas", "verification",
                                default=3.0, minimum=0.0),
    }

    seed = _number(doc, "seed", "", required=True, minimum=0, integer=True)
    output_dir = doc.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise ConfigError("expected a string", "output_dir")

    return ExperimentConfig(
        raw=doc,
        model_name=name,
        model_params=params,
        box_override=box_override,
        gains_spec=gains_spec,
        simulation=simulation,
        x0=x0,
        x0_prime=x0_prime,
        input_spec=input_spec,
        input_prime_spec=input_prime_spec,
        verification=verification,
        seed=seed,
        output_dir=output_dir,
    )


def load_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment configuration file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: line {exc.lineno} column {exc.colno}") from exc
    return parse_config(doc)


def build_model(config: ExperimentConfig):
    """Instantiate (system, params, box) from the model section."""
    builder, params_cls, box_fn = MODEL_REGISTRY[config.model_name]
    try:
        params = params_cls(**config.model_params)
    except (TypeError, ContractError) as exc:
        raise ConfigError(str(exc), "model.params") from exc
    sys = builder(params)
    if config.box_override is not None:
        try:
            box = ValidityBox(**config.box_override)
        except ContractError as exc:
            raise ConfigError(str(exc), "model.box") from exc
    else:
        box = box_fn()
    return sys, params, box


def build_gains(config: ExperimentConfig, sys: HamiltonianSystem) -> BacksteppingGains:
    """Derive the validated gains (raises GainBoundError when kappa1 is too small)."""
    gs = config.gains_spec
    return gains_for_system(sys, gs["k"], gs["kappa1"], gs["eps1"], gs["eps2"])


def build_inputs(config: ExperimentConfig, dim: int):
    """Build the (u, u_prime) signal pair; both default to the zero family."""
    spec = config.input_spec if config.input_spec is not None else {"family": "zero"}
    spec_p = config.input_prime_spec if config.input_prime_spec is not None else spec
    return make_signal(spec, dim, "inputs.u"), make_signal(spec_p, dim, "inputs.u_prime")
