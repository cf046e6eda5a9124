"""Scenario configuration files.

Flat ``key = value`` text with section headers, read by :mod:`configparser`::

    [scenario]
    name = p_laplace_perturbed
    p = 2.5
    T = 0.1
    n = 12
    y0 = multi
    f = zero
    seed = 0

    [solver]
    dt = 1e-3
    scheme = implicit_euler

    [perturbation]
    name = linear_plus_sine
    lam = 1.0

    [constants]
    c0 = 1.0

    [probes]
    conditions = auto
    samples = 200

Unset keys fall back to the preset of the named scenario.
"""
from __future__ import annotations

import configparser
from dataclasses import replace
from pathlib import Path

from .perturbation import from_catalogue
from .scenarios import ScenarioConfig, preset

SCENARIO_KEYS = {
    "name": str, "p": float, "delta": float, "T": float, "n": int, "y0": str, "y0_scale": float,
    "f": str, "seed": int, "length": float, "quadrature_order": int,
}
SOLVER_KEYS = {
    "dt": float, "scheme": str, "theta": float, "newton_tol": float, "newton_max_iter": int,
    "blow_up_threshold": float, "jacobian": str,
}
CONSTANT_KEYS = ("c0", "c1", "c2", "alpha", "beta", "gamma")
PROBE_KEYS = {"conditions": str, "samples": int, "tolerance": float}
SECTIONS = ("scenario", "solver", "perturbation", "constants", "probes")


class ConfigError(ValueError):
    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


def _line_of(text: str, section: str, key: str):
    current = None
    for i, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return i
    return None


def _section_line(text: str, section: str):
    for i, raw in enumerate(text.splitlines(), start=1):
        if raw.strip() == f"[{section}]":
            return i
    return None


def _convert(kind, value, section, key, text, path):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {value!r} is not a valid {kind.__name__}",
                          _line_of(text, section, key), path) from None


def parse_config(text: str, path=None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path) if path else "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any [section]", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected key = value)", line, path) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).split("\n")[0], getattr(exc, "lineno", None), path) from None

    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]; expected one of {SECTIONS}",
                              _section_line(text, section), path)

    def section_values(section, schema):
        out = {}
        if not parser.has_section(section):
            return out
        for key, value in parser.items(section):
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} in [{section}]; expected one of {sorted(schema)}",
                                  _line_of(text, section, key), path)
            out[key] = _convert(schema[key], value, section, key, text, path)
        return out

    scen = section_values("scenario", SCENARIO_KEYS)
    solver = section_values("solver", SOLVER_KEYS)
    consts = section_values("constants", {k: float for k in CONSTANT_KEYS})
    probes = section_values("probes", PROBE_KEYS)
    if "name" not in scen:
        raise ConfigError("[scenario] needs a name", None, path)
    name = scen.pop("name")

    pert = {}
    if parser.has_section("perturbation"):
        items = dict(parser.items("perturbation"))
        if "name" not in items:
            raise ConfigError("[perturbation] needs a name", _section_line(text, "perturbation"), path)
        pname = items.pop("name")
        params = {k: _convert(float, v, "perturbation", k, text, path) for k, v in items.items()}
        pert = {"perturbation": pname, "perturbation_params": params}

    overrides = {**scen, **solver, **pert}
    if consts:
        overrides["constants"] = consts
    if "conditions" in probes:
        overrides["probes"] = tuple(c.strip() for c in probes["conditions"].split(",") if c.strip())
    if "samples" in probes:
        overrides["probe_samples"] = probes["samples"]
    if "tolerance" in probes:
        overrides["probe_tolerance"] = probes["tolerance"]
    try:
        cfg = preset(name, **overrides)
        if cfg.perturbation not in (None, "zero"):
            from_catalogue(cfg.perturbation, **cfg.perturbation_params)
        cfg.solve_config
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), None, path) from None
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    return parse_config(text, path)


def with_seed(cfg: ScenarioConfig, seed) -> ScenarioConfig:
    return cfg if seed is None else replace(cfg, seed=int(seed))
