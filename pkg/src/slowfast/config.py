"""Experiment configuration: a single JSON document, strictly validated.

Unknown keys are errors reported with their dotted key path.  Defaults are
filled in so that the resolved document (and its hash) fully describes a run.
"""
from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .exceptions import ConfigError

ANALYSES = ("classify", "certify-slow", "construct-fast", "quotient-check")

MODEL_KEYS = {
    "ode2_slow": {"R": 10.0},
    "ode2_fast": {"lambda": 1.0, "beta": 10.0, "p": 1.0, "q": 1.0, "R": 10.0},
    "neumann_interval": {"modes": 16, "p": 2.0, "c": 1.0, "R": 1.0, "samples": 10_000},
    "dirichlet_interval": {"modes": 16, "p": 2.0, "c": 1.0, "critical": True, "shift": 0.5,
                           "R": 1.0, "samples": 10_000},
    "custom": {"eigenvalues": None, "multiplicities": None, "terms": [], "R": 1.0,
               "sign_condition": None, "samples": 10_000},
}

INITIAL_SOURCES = ("coefficients", "preset", "certificate", "constructed")

DEFAULTS = {
    "seed": 0,
    "integrator": {"dt": 1e-3, "t_end": 10.0, "scheme": "etd2rk", "diag_stride": 1,
                   "blowup_norm": 1e6, "dt_ratio": 0.0, "dt_max": None},
    "analyses": [],
    "classify": {"expect": None, "verify_slow": True},
    "certify_slow": {"strict": True, "monitor_t_end": 1e4, "openness": True,
                     "openness_samples": 100},
    "construct_fast": {"lambda_index": None, "v0": None, "w0": None, "v0_mode": None,
                       "w0_mode": None, "r0": 0.05, "validate": True, "window": [2.0, 8.0],
                       "window_tol": 1e-4, "tol": 1e-11},
    "quotients": {"d": [0.0, "2p"], "atol": 1e-6},
    "output": {"dir": "out", "store_states": False},
    "sweep": {"axes": {}, "budget": 64, "workers": 1},
}

PRESETS = {"kernel_constant": ("a",), "mode": ("index", "a")}


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise ConfigError(path or "<root>", "expected an object")
    for key in doc:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")


def _merge(defaults: dict, doc: dict, path: str) -> dict:
    _check_keys(doc, defaults, path)
    out = copy.deepcopy(defaults)
    out.update(copy.deepcopy(doc))
    return out


def resolve(doc: dict) -> dict:
    """Validate ``doc`` and return it with every default filled in."""
    allowed = set(DEFAULTS) | {"model", "initial"}
    _check_keys(doc, allowed, "")
    cfg = {}
    model = doc.get("model")
    if model is None:
        raise ConfigError("model", "missing")
    if isinstance(model, str):
        model = {"name": model}
    if not isinstance(model, dict) or model.get("name") not in MODEL_KEYS:
        raise ConfigError("model.name", f"must be one of {sorted(MODEL_KEYS)}")
    params = {k: v for k, v in model.items() if k != "name"}
    cfg["model"] = {"name": model["name"], **_merge(MODEL_KEYS[model["name"]], params, "model")}
    if cfg["model"]["name"] == "custom" and cfg["model"]["eigenvalues"] is None:
        raise ConfigError("model.eigenvalues", "missing")

    for key in ("seed",):
        cfg[key] = doc.get(key, DEFAULTS[key])
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed", "must be a nonnegative integer")
    for key in ("integrator", "classify", "certify_slow", "construct_fast", "quotients", "output", "sweep"):
        cfg[key] = _merge(DEFAULTS[key], doc.get(key, {}), key)

    analyses = doc.get("analyses", [])
    if not isinstance(analyses, list):
        raise ConfigError("analyses", "expected a list")
    for i, a in enumerate(analyses):
        if a not in ANALYSES:
            raise ConfigError(f"analyses[{i}]", f"unknown analysis {a!r}; expected one of {ANALYSES}")
    cfg["analyses"] = list(analyses)

    init = doc.get("initial")
    if init is None:
        raise ConfigError("initial", "missing")
    _check_keys(init, set(INITIAL_SOURCES), "initial")
    if len(init) != 1:
        raise ConfigError("initial", f"exactly one source required among {INITIAL_SOURCES}")
    (source, value), = init.items()
    if source == "preset":
        _check_preset(value)
    elif source == "certificate":
        value = _merge({"fraction": 0.5}, value or {}, "initial.certificate")
    elif source == "constructed" and value is not True:
        raise ConfigError("initial.constructed", "must be true")
    elif source == "coefficients" and not isinstance(value, list):
        raise ConfigError("initial.coefficients", "expected a list of numbers")
    cfg["initial"] = {source: value}
    if cfg["integrator"]["scheme"] not in ("etd1", "etd2rk"):
        raise ConfigError("integrator.scheme", "must be etd1 or etd2rk")
    return cfg


def _check_preset(value):
    if not isinstance(value, dict) or value.get("name") not in PRESETS:
        raise ConfigError("initial.preset.name", f"must be one of {sorted(PRESETS)}")
    allowed = {"name", *PRESETS[value["name"]]}
    _check_keys(value, allowed, "initial.preset")
    for key in PRESETS[value["name"]]:
        if key not in value:
            raise ConfigError(f"initial.preset.{key}", "missing")


def load_raw(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise ConfigError("<root>", f"cannot read config: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected an object")
    return doc


def load(path) -> dict:
    return resolve(load_raw(path))


def canonical(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()


def set_path(doc: dict, dotted: str, value):
    """Assign ``value`` at a dotted key path such as ``initial.preset.a``."""
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(dotted, "path crosses a non-object value")
    node[keys[-1]] = value
