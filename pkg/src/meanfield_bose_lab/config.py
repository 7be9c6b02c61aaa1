"""TOML experiment configuration: schema validation and object builders.

Configs are flat TOML tables per experiment kind; unknown keys are rejected
with their full path so typos fail loudly.  Builders translate validated
sections into model-space, interaction and problem objects.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import gp as _gp
from . import model as _model


class ConfigError(Exception):
    """Malformed experiment configuration; message names the offending key."""


_REQUIRED = object()

_SPACE = {
    "dim": (int, 1),
    "extent": ((int, float), 2.0 * math.pi),
    "modes": (int, 64),
    "bc": (str, "periodic"),
}

_POTENTIAL = {
    "kind": (str, "none"),
    "omega": ((int, float), 1.0),
}

_INTERACTION = {
    "kind": (str, _REQUIRED),
    "coefficients": (list, [1.0, 1.0]),
    "cap": ((int, float), 1e3),
    "strength": ((int, float), 1.0),
    "width": ((int, float), 1.0),
    "path": (str, ""),
    "scale": ((int, float), 1.0),
}

_GP = {
    "coupling": ((int, float), -1.0),
    "n_particles": (int, 0),
    "restarts": (int, 8),
    "tol_resid": ((int, float), 1e-9),
    "max_iter": (int, 50_000),
}

_SCHEMAS = {
    "gp-solve": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "space": _SPACE,
        "potential": _POTENTIAL,
        "interaction": _INTERACTION,
        "gp": _GP,
        "output": {"dir": (str, "")},
    },
    "fig3": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "fig3": {
            "n_particles": (int, 10),
            "density": ((int, float), 1.0),
            "modes": (int, 512),
            "cap": ((int, float), 1e3),
            "restarts": (int, 8),
            "max_iter": (int, 15_000),
        },
        "output": {"dir": (str, "")},
    },
    "bdg-spectrum": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "space": _SPACE,
        "potential": _POTENTIAL,
        "interaction": _INTERACTION,
        "gp": _GP,
        "bdg": {
            "ladder_count": (int, 10),
        },
        "output": {"dir": (str, "")},
    },
    "ed-spectrum": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "space": _SPACE,
        "potential": _POTENTIAL,
        "interaction": _INTERACTION,
        "ed": {
            "modes": (int, 5),
            "n_values": (list, [6, 10, 14, 18]),
            "j_count": (int, 5),
            "n_max_quad": (int, 12),
        },
        "output": {"dir": (str, "")},
    },
    "definetti-check": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "definetti": {
            "dim": (int, 2),
            "n_particles": (int, 10),
            "k": (int, 1),
            "samples": (int, 100_000),
            "state": (str, "random"),
        },
        "output": {"dir": (str, "")},
    },
    "dynamics": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "space": _SPACE,
        "potential": _POTENTIAL,
        "interaction": _INTERACTION,
        "dynamics": {
            "t_final": ((int, float), 0.5),
            "dt": ((int, float), 2.5e-3),
            "n_max": (int, 8),
            "n_values": (list, [4, 8, 12]),
            "initial": (str, "one-particle"),
            "amplitude": ((int, float), 0.3),
        },
        "output": {"dir": (str, "")},
    },
    "acceptance": {
        "kind": (str, _REQUIRED),
        "seed": (int, 0),
        "acceptance": {"criteria": (list, [])},
        "output": {"dir": (str, "")},
    },
}

EXPERIMENT_KINDS = tuple(_SCHEMAS)


def _validate_section(section, schema, path):
    if not isinstance(section, dict):
        raise ConfigError(f"{path or 'config'} must be a table")
    out = {}
    for key, value in section.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key {here!r}")
        rule = schema[key]
        if isinstance(rule, dict):
            out[key] = _validate_section(value, rule, here)
            continue
        types, _ = rule
        if isinstance(value, bool) and types is int:
            raise ConfigError(f"{here!r} must be an integer")
        if not isinstance(value, types):
            raise ConfigError(f"{here!r} has wrong type {type(value).__name__}")
        out[key] = value
    for key, rule in schema.items():
        if key in out:
            continue
        if isinstance(rule, dict):
            out[key] = _validate_section({}, rule, f"{path}.{key}" if path else key)
            continue
        types, default = rule
        if default is _REQUIRED:
            raise ConfigError(f"missing required key "
                              f"{(f'{path}.{key}' if path else key)!r}")
        out[key] = default
    return out


def validate(config: dict) -> dict:
    if not isinstance(config, dict):
        raise ConfigError("config root must be a table")
    kind = config.get("kind")
    if kind not in _SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}; "
                          f"expected one of {sorted(_SCHEMAS)}")
    return _validate_section(config, _SCHEMAS[kind], "")


def load_config(path) -> dict:
    text = Path(path).read_bytes()
    try:
        raw = tomllib.loads(text.decode("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path}: {exc}") from exc
    return validate(raw)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_space(section: dict) -> _model.ModelSpace:
    try:
        return _model.build_model(_model.ModelConfig(
            dim=section["dim"], extent=float(section["extent"]),
            modes=section["modes"], bc=section["bc"]))
    except _model.ModelError as exc:
        raise ConfigError(str(exc)) from exc


def build_potential(section: dict, space: _model.ModelSpace) -> _model.OneBodyOperator:
    kind = section["kind"]
    if kind == "none":
        return _model.make_one_body(space)
    if kind == "harmonic":
        omega = float(section["omega"])
        center = space.extent / 2.0
        def v(*grids):
            return sum(0.25 * omega ** 2 * (g - center) ** 2 for g in grids)
        return _model.make_one_body(space, v)
    raise ConfigError(f"unknown potential kind {kind!r}")


def build_interaction(section: dict, space: _model.ModelSpace) -> _model.Interaction:
    kind = section["kind"]
    if kind == "zero":
        w = _model.make_interaction(space, func=lambda *c: 0.0 * c[0])
    elif kind == "cosine":
        coeffs = [float(c) for c in section["coefficients"]]
        w = _model.make_interaction(
            space, func=_model.cosine_interaction(coeffs, space.extent))
    elif kind == "lennard_jones":
        w = _model.make_interaction(
            space, func=_model.truncated_lennard_jones(float(section["cap"])))
    elif kind == "gaussian":
        w = _model.make_interaction(
            space, func=_model.gaussian_interaction(
                float(section["strength"]), float(section["width"])))
    elif kind == "csv":
        if not section["path"]:
            raise ConfigError("interaction.path is required for kind 'csv'")
        data = np.loadtxt(section["path"], delimiter=",", comments="#")
        w = _model.interaction_from_table(space, data[:, 0], data[:, 1])
    else:
        raise ConfigError(f"unknown interaction kind {kind!r}")
    scale = float(section["scale"])
    return w if scale == 1.0 else w.scaled(scale)


def build_gp_problem(config: dict) -> _gp.GPProblem:
    space = build_space(config["space"])
    h = build_potential(config["potential"], space)
    w = build_interaction(config["interaction"], space)
    sec = config["gp"]
    if sec["n_particles"]:
        g = float(sec["n_particles"] - 1)
    elif sec["coupling"] >= 0:
        g = float(sec["coupling"])
    else:
        g = 1.0
    return _gp.GPProblem(space=space, h=h, w=w, g=g)
