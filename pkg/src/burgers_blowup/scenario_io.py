"""Scenario files: INI-style sections with typed keys and command-line overrides."""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
import re
from pathlib import Path
from typing import Iterable, Union

from .errors import ConfigurationError
from .scenarios import PerturbationSpec, Scenario

# which Scenario / PerturbationSpec field lives in which section
SECTIONS = {
    "scenario": ("name", "i_list", "L", "delta", "T", "kappa", "q", "s_span", "seed"),
    "perturbation": ("shape", "center", "halfwidth", "theta", "amplitude"),
    "grids": ("n_s", "n_x", "blowup_grid", "n_lagrangian", "n_track"),
    "tolerances": ("delta_max", "quad_rtol", "ds", "energy_h", "energy_C_max",
                   "simultaneity_rtol", "blowup_time_rtol", "fit_factor"),
    "constants": ("K0", "K1", "K_eps", "K_deps"),
}
_OPTIONAL_FLOATS = {"amplitude", "K0", "K1", "K_eps", "K_deps"}
_SECTION_OF = {key: sec for sec, keys in SECTIONS.items() for key in keys}


def _parse_value(key: str, raw: str):
    text = raw.strip()
    try:
        if key == "i_list":
            parts = [p for p in re.split(r"[\s,()\[\]]+", text) if p]
            if not parts:
                raise ValueError("empty i_list")
            return tuple(int(p) for p in parts)
        if key in _OPTIONAL_FLOATS:
            return None if text.lower() in ("", "none") else float(text)
        if key in ("name", "shape"):
            return text
        if key == "L":
            return int(text)
        if key in ("q", "seed", "n_s", "n_x", "blowup_grid", "n_lagrangian", "n_track"):
            value = float(text)
            if value != int(value):
                raise ValueError("not an integer")
            return int(value)
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("not finite")
        return value
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r} ({exc})") from None


def _resolve_key(dotted: str) -> tuple:
    if "." in dotted:
        section, key = dotted.split(".", 1)
        if section not in SECTIONS or key not in SECTIONS[section]:
            raise ConfigurationError(f"unknown key {dotted!r}")
        return section, key
    if dotted not in _SECTION_OF:
        raise ConfigurationError(f"unknown key {dotted!r}")
    return _SECTION_OF[dotted], dotted


def parse_overrides(items: Iterable[str]) -> list:
    """``key=value`` or ``section.key=value`` strings as ``(section, key, raw)`` triples."""
    out = []
    for item in items:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        dotted, raw = item.split("=", 1)
        section, key = _resolve_key(dotted.strip())
        out.append((section, key, raw))
    return out


def _build(values: dict) -> Scenario:
    pert_fields = {k: values.pop(k) for k in SECTIONS["perturbation"] if k in values}
    try:
        pert = PerturbationSpec(**pert_fields)
        return Scenario(perturbation=pert, **values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def loads_scenario(text: str, overrides: Iterable[str] = (), source: str = "<string>") -> Scenario:
    """Parse scenario text, apply overrides, validate.

    Unknown sections or keys are configuration errors.  Overrides are applied
    after the file is read, so they win over file values.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {source}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigurationError(f"unknown section [{section}] in {source}")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigurationError(f"unknown key {section}.{key} in {source}")
            values[key] = _parse_value(key, raw)
    overridden = set()
    for section, key, raw in parse_overrides(overrides):
        values[key] = _parse_value(key, raw)
        overridden.add(key)
    # L follows the list unless it was set alongside it
    if "i_list" in values and ("L" not in values or ("i_list" in overridden and "L" not in overridden)):
        values["L"] = len(values["i_list"])
    return _build(values).validate()


def load_scenario(path: Union[str, Path], overrides: Iterable[str] = ()) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc.strerror}") from None
    return loads_scenario(text, overrides, source=str(path))


def dumps_scenario(sc: Scenario) -> str:
    """Scenario as text that :func:`loads_scenario` reads back to an equal object."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    flat = dataclasses.asdict(sc)
    flat.update(flat.pop("perturbation"))
    for section, keys in SECTIONS.items():
        entries = {}
        for key in keys:
            value = flat[key]
            if value is None:
                continue
            if key == "i_list":
                value = ", ".join(str(i) for i in value)
            elif isinstance(value, float):
                value = repr(value)
            entries[key] = str(value)
        if entries:
            parser[section] = entries
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
