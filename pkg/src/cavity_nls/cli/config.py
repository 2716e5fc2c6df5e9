"""Experiment configuration: loading, defaults, validation and object construction.

Configs are TOML (or JSON) files with the sections ``system``, ``cavity``,
``pump``, ``probe``, ``scan``, ``numerics``, ``output``, ``multimode`` and
``oracle``.  All frequencies and rates are in units of kappa, times in 1/kappa.
"""
from __future__ import annotations

import copy
import json
import re

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..models import CavityConfig, PulseSpec, build_three_level, build_two_level


class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the source file when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + message)


PULSE_DEFAULTS = {"eta": 1.0, "omega": None, "tau": 2.0, "tau_w": 0.05, "phi": 0.0, "k": 0.0}

DEFAULTS = {
    "system": {"kind": "2ls", "omega0": 100.0, "mu": 1.0, "gamma": 0.0, "gamma_phi": 0.0,
               "omega2": None, "omega3": None, "mu12": 1.0, "mu23": float(np.sqrt(2.0)),
               "delta": 0.0},
    "cavity": {"omega_c": None, "kappa": 1.0, "g_sqrt_n": 3.0, "n_molecules": 1.0, "e0": None},
    "pump": dict(PULSE_DEFAULTS),
    "probe": dict(PULSE_DEFAULTS, tau=None),
    "scan": {"tau_delta": None, "components": ["total"], "max_n": 2, "max_m": 1,
             "chunk": 10},
    "numerics": {"n_points": 2 ** 14, "rtol": 1e-9, "atol": 1e-12, "t_end": None, "method": "dp5",
                 "pad": 4, "floor": 1e-3, "rwa": None, "decay": 1e-8},
    "output": {"dir": "out", "omega_range": None, "plot_script": False},
    "multimode": {"n_k": 1, "width": 10.0, "velocity": 1.0},
    "oracle": {"tolerance": 1e-3, "fd_scale": 1e-3, "tau_delta": 1.0},
}

OPTIONAL_SECTIONS = {"probe"}
KINDS = ("2ls", "3ls", "disorder")


def _locate(text, section, key=None):
    """Line number of ``key`` inside ``[section]`` (TOML) or of ``"key"`` (JSON)."""
    if text is None:
        return None
    lines = text.splitlines()
    if text.lstrip().startswith("{"):
        needle = f'"{key or section}"'
        start = 0
        if key is not None:
            for i, line in enumerate(lines):
                if f'"{section}"' in line:
                    start = i
                    break
        for i in range(start, len(lines)):
            if needle in lines[i]:
                return i + 1
        return None
    current = None
    for i, line in enumerate(lines):
        s = line.strip()
        m = re.match(r"^\[\s*([A-Za-z0-9_.\-]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return i + 1
            continue
        if key is not None and current == section and re.match(rf"^{re.escape(key)}\s*=", s):
            return i + 1
    return None


def parse_text(text, path="<config>"):
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"invalid TOML: {exc}", path, int(m.group(1)) if m else None) from None


def load_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_text(text, str(path)), text


def parse_override(item):
    """``section.key=value`` with ``value`` read as a TOML literal (bare words become strings)."""
    if "=" not in item or "." not in item.split("=", 1)[0]:
        raise ConfigError(f"override {item!r} must look like section.key=value")
    dotted, raw = item.split("=", 1)
    section, key = dotted.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return section, key, value


def apply_overrides(raw, overrides):
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        section, key, value = parse_override(item)
        raw.setdefault(section, {})[key] = value
    return raw


def _number(value, name, loc, *, positive=False, nonneg=False, integer=False, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}", *loc)
    if integer and int(value) != value:
        raise ConfigError(f"{name} must be an integer", *loc)
    if not np.isfinite(value):
        raise ConfigError(f"{name} must be finite", *loc)
    if positive and value <= 0:
        raise ConfigError(f"{name} must be positive", *loc)
    if nonneg and value < 0:
        raise ConfigError(f"{name} must be non-negative", *loc)
    return int(value) if integer else float(value)


POSITIVE = {("system", "omega0"), ("cavity", "kappa"), ("pump", "tau_w"), ("probe", "tau_w"),
            ("numerics", "rtol"), ("numerics", "atol"), ("multimode", "width"), ("oracle", "tolerance"),
            ("oracle", "fd_scale"), ("numerics", "decay")}
NONNEG = {("system", "gamma"), ("system", "gamma_phi"), ("system", "delta"), ("pump", "eta"),
          ("probe", "eta"), ("cavity", "g_sqrt_n"), ("oracle", "tau_delta")}
INTEGER = {("numerics", "n_points"), ("numerics", "pad"), ("scan", "max_n"), ("scan", "max_m"),
           ("scan", "chunk"), ("multimode", "n_k")}


def _parse_component(c, loc):
    if c == "total":
        return "total"
    if isinstance(c, str):
        parts = c.replace("(", "").replace(")", "").split(",")
    else:
        parts = list(c)
    try:
        v = tuple(int(x) for x in parts)
    except (TypeError, ValueError):
        raise ConfigError(f"bad phase component {c!r}", *loc) from None
    if v not in ((0, 1), (2, -1)):
        raise ConfigError(f"phase component {v} does not contribute to the DT; use (0,1) or (2,-1)", *loc)
    return f"{v[0]},{v[1]}"


def _tau_list(value, loc):
    if value is None:
        return None
    if isinstance(value, dict):
        unknown = set(value) - {"start", "stop", "num"}
        if unknown or not {"start", "stop", "num"} <= set(value):
            raise ConfigError("tau_delta range needs exactly start, stop, num", *loc)
        num = _number(value["num"], "tau_delta.num", loc, positive=True, integer=True)
        start = _number(value["start"], "tau_delta.start", loc, nonneg=True)
        stop = _number(value["stop"], "tau_delta.stop", loc, nonneg=True)
        return [float(x) for x in np.linspace(start, stop, num)]
    if not isinstance(value, list) or not value:
        raise ConfigError("tau_delta must be a non-empty list or a {start, stop, num} table", *loc)
    taus = [_number(x, "tau_delta", loc, nonneg=True) for x in value]
    return sorted(taus)


def resolve(raw, text=None, path=None):
    """Validate ``raw`` against the schema and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a table", path)
    cfg = {}
    for section, value in raw.items():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]", path, _locate(text, section))
        if not isinstance(value, dict):
            raise ConfigError(f"[{section}] must be a table", path, _locate(text, section))
    for section, defaults in DEFAULTS.items():
        given = raw.get(section)
        if given is None and section in OPTIONAL_SECTIONS:
            cfg[section] = None
            continue
        given = given or {}
        out = dict(defaults)
        for key, value in given.items():
            loc = (path, _locate(text, section, key))
            if key not in defaults:
                raise ConfigError(f"unknown key {section}.{key}", *loc)
            if (section, key) in POSITIVE:
                value = _number(value, f"{section}.{key}", loc, positive=True)
            elif (section, key) in NONNEG:
                value = _number(value, f"{section}.{key}", loc, nonneg=True)
            elif (section, key) in INTEGER:
                value = _number(value, f"{section}.{key}", loc, positive=section != "scan", nonneg=True,
                                integer=True)
            elif key == "tau_delta" and section == "scan":
                value = _tau_list(value, loc)
            elif key == "components":
                if not isinstance(value, list) or not value:
                    raise ConfigError("components must be a non-empty list", *loc)
                value = [_parse_component(c, loc) for c in value]
            elif key in ("kind", "method", "dir"):
                if not isinstance(value, str):
                    raise ConfigError(f"{section}.{key} must be a string", *loc)
            elif key in ("plot_script", "rwa"):
                if not isinstance(value, bool):
                    raise ConfigError(f"{section}.{key} must be true or false", *loc)
            elif key == "omega_range":
                if (not isinstance(value, list) or len(value) != 2
                        or not all(isinstance(x, (int, float)) for x in value) or value[0] >= value[1]):
                    raise ConfigError("omega_range must be [lo, hi] with lo < hi", *loc)
                value = [float(x) for x in value]
            elif value is not None:
                value = _number(value, f"{section}.{key}", loc)
            out[key] = value
        cfg[section] = out
    sysc = cfg["system"]
    if sysc["kind"] not in KINDS:
        raise ConfigError(f"system.kind must be one of {KINDS}", path, _locate(text, "system", "kind"))
    if sysc["kind"] == "3ls":
        if sysc["omega2"] is None or sysc["omega3"] is None:
            raise ConfigError("3ls systems need omega2 and omega3", path, _locate(text, "system"))
        if not sysc["omega3"] > sysc["omega2"] > 0:
            raise ConfigError("need omega3 > omega2 > 0", path, _locate(text, "system", "omega3"))
    if sysc["kind"] == "disorder" and sysc["delta"] >= sysc["omega0"]:
        raise ConfigError("delta must be smaller than omega0", path, _locate(text, "system", "delta"))
    if cfg["cavity"]["omega_c"] is None:
        cfg["cavity"]["omega_c"] = sysc["omega2"] if sysc["kind"] == "3ls" else sysc["omega0"]
    if cfg["cavity"]["n_molecules"] < 1:
        raise ConfigError("cavity.n_molecules must be >= 1", path, _locate(text, "cavity", "n_molecules"))
    for name in ("pump", "probe"):
        pulse = cfg[name]
        if pulse is None:
            continue
        if pulse["omega"] is None:
            pulse["omega"] = cfg["cavity"]["omega_c"]
    if cfg["probe"] is not None and cfg["probe"]["tau"] is None:
        cfg["probe"]["tau"] = cfg["pump"]["tau"]
    return cfg


def load_config(path, overrides=()):
    raw, text = load_file(path)
    raw = apply_overrides(raw, overrides)
    return resolve(raw, text, str(path))


# construction of library objects -------------------------------------------------

def build_models(cfg):
    """``(models, weights)`` for the configured molecular system."""
    s = cfg["system"]
    if s["kind"] == "2ls":
        return [build_two_level(s["omega0"], s["mu"], s["gamma"], s["gamma_phi"])], [1.0]
    if s["kind"] == "3ls":
        return [build_three_level(s["omega2"], s["omega3"], s["mu12"], s["mu23"], s["gamma_phi"])], [1.0]
    lo = build_two_level(s["omega0"] - s["delta"], s["mu"], s["gamma"], s["gamma_phi"])
    hi = build_two_level(s["omega0"] + s["delta"], s["mu"], s["gamma"], s["gamma_phi"])
    return [lo, hi], [0.5, 0.5]


def dipole(cfg):
    s = cfg["system"]
    return s["mu12"] if s["kind"] == "3ls" else s["mu"]


def build_cavity(cfg):
    c = cfg["cavity"]
    if c["e0"] is not None:
        return CavityConfig(c["omega_c"], c["kappa"], c["n_molecules"], c["e0"])
    return CavityConfig.from_collective_coupling(c["omega_c"], c["g_sqrt_n"], c["kappa"], c["n_molecules"],
                                                 dipole(cfg))


def build_pulse(block):
    return PulseSpec(eta=block["eta"], omega=block["omega"], tau=block["tau"], tau_w=block["tau_w"],
                     phi=block["phi"], k=block["k"])


def to_json(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"
