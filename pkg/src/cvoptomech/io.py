"""Plain-text covariance-matrix files and flat ``key = value`` configuration files."""

from __future__ import annotations

import configparser
import hashlib
import json
from pathlib import Path
from typing import Iterable, Mapping, Optional

import numpy as np

from .dual import DualConfig
from .errors import ConfigParse, DimensionMismatch
from .filters import FilterSpec
from .gaussian import Convention, GaussianState
from .optomech import OptomechConfig

_CONVENTION_NAMES = {"one": Convention.ONE, "half": Convention.HALF}


# -- covariance matrix files ----------------------------------------------


def format_cm(state: GaussianState) -> str:
    name = "one" if state.convention is Convention.ONE else "half"
    lines = [f"modes={state.modes} convention={name}"]
    lines += [" ".join("%.17g" % x for x in row) for row in state.cm]
    if np.any(state.d != 0):
        lines.append("d= " + " ".join("%.17g" % x for x in state.d))
    return "\n".join(lines) + "\n"


def write_cm(path, state: GaussianState) -> None:
    Path(path).write_text(format_cm(state))


def parse_cm(text: str) -> GaussianState:
    """Parse the CM file format.

    Raises:
        ConfigParse: malformed header or rows.
        DimensionMismatch: row or column count inconsistent with ``modes``.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ConfigParse("empty CM file")
    header = dict(tok.split("=", 1) for tok in lines[0].split() if "=" in tok)
    try:
        n = int(header["modes"])
        conv = _CONVENTION_NAMES[header.get("convention", "one")]
    except (KeyError, ValueError) as exc:
        raise ConfigParse(f"bad CM header {lines[0]!r}") from exc
    body = lines[1:]
    d = None
    if body and body[-1].startswith("d="):
        d = _floats(body[-1][2:].split())
        body = body[:-1]
    if len(body) != 2 * n:
        raise DimensionMismatch(f"expected {2 * n} rows, got {len(body)}")
    rows = [_floats(ln.split()) for ln in body]
    if any(len(r) != 2 * n for r in rows) or (d is not None and len(d) != 2 * n):
        raise DimensionMismatch(f"expected {2 * n} columns")
    return GaussianState(np.array(rows), None if d is None else np.array(d), conv)


def read_cm(path) -> GaussianState:
    return parse_cm(Path(path).read_text())


def _floats(tokens) -> list:
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise ConfigParse(str(exc)) from exc


# -- configuration ---------------------------------------------------------------

SINGLE_KEYS = {
    "omega_m_hz": float,
    "Q": float,
    "mass_kg": float,
    "length_m": float,
    "finesse": float,
    "wavelength_m": float,
    "power_w": float,
    "detuning_mode": str,
    "detuning_over_omega_m": float,
    "temperature_k": float,
}
DUAL_KEYS = {
    "omega_m_hz": float,
    "Q": float,
    "mass_kg": float,
    "length_m": float,
    "finesse": float,
    "detuning_mode": str,
    "temperature_k": float,
    "laser_a_power_w": float,
    "laser_a_detuning_over_omega_m": float,
    "laser_a_wavelength_m": float,
    "laser_b_power_w": float,
    "laser_b_detuning_over_omega_m": float,
    "laser_b_wavelength_m": float,
}
FILTER_KEYS = {
    "filter_shape": str,
    "filter_omega_over_omega_m": str,   # comma-separated list of centres
    "filter_epsilon": float,
    "filter_a_omega_over_omega_m": float,
    "filter_b_omega_over_omega_m": float,
}
DEFAULTS = {
    "detuning_mode": "effective",
    "filter_shape": "step",
    "filter_epsilon": 10.0,
    "laser_b_wavelength_m": None,
}


def parse_config(text: str, schema: Mapping[str, type], overrides: Iterable[str] = ()) -> dict:
    """Parse flat ``key = value`` text against a schema.

    Precedence is override > file > default.  Unknown keys and missing
    required keys are errors.

    Raises:
        ConfigParse: on any syntax, key or type error.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigParse(str(exc)) from exc
    raw = dict(cp["config"])
    for item in overrides:
        if "=" not in item:
            raise ConfigParse(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        raw[k.strip()] = v.strip()
    allowed = {**schema, **FILTER_KEYS}
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigParse(f"unknown keys: {', '.join(unknown)}")
    out = {}
    for key, typ in allowed.items():
        if key in raw:
            try:
                out[key] = typ(raw[key])
            except ValueError as exc:
                raise ConfigParse(f"{key}: {exc}") from exc
        elif key in DEFAULTS:
            out[key] = DEFAULTS[key]
        elif key in schema:
            raise ConfigParse(f"missing key {key}")
    return out


def load_config(path, schema=SINGLE_KEYS, overrides: Iterable[str] = ()) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParse(str(exc)) from exc
    return parse_config(text, schema, overrides)


def config_hash(cfg: Mapping) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _wrap(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigParse(str(exc)) from exc


def single_config(cfg: Mapping) -> OptomechConfig:
    wm = 2 * np.pi * cfg["omega_m_hz"]
    return _wrap(
        OptomechConfig,
        omega_m=wm, Q=cfg["Q"], mass=cfg["mass_kg"], length=cfg["length_m"],
        finesse=cfg["finesse"], wavelength=cfg["wavelength_m"], power=cfg["power_w"],
        detuning=cfg["detuning_over_omega_m"] * wm, temperature=cfg["temperature_k"],
        detuning_mode=cfg["detuning_mode"],
    )


def dual_config(cfg: Mapping) -> DualConfig:
    wm = 2 * np.pi * cfg["omega_m_hz"]
    return _wrap(
        DualConfig,
        omega_m=wm, Q=cfg["Q"], mass=cfg["mass_kg"], length=cfg["length_m"],
        finesse=cfg["finesse"], temperature=cfg["temperature_k"],
        power_a=cfg["laser_a_power_w"], power_b=cfg["laser_b_power_w"],
        detuning_a=cfg["laser_a_detuning_over_omega_m"] * wm,
        detuning_b=cfg["laser_b_detuning_over_omega_m"] * wm,
        wavelength_a=cfg["laser_a_wavelength_m"], wavelength_b=cfg["laser_b_wavelength_m"],
        detuning_mode=cfg["detuning_mode"],
    )


def single_filters(cfg: Mapping, omega_m: float) -> list:
    """Filters on the single cavity output; empty when no centre is configured."""
    centres = cfg.get("filter_omega_over_omega_m")
    if centres is None or not str(centres).strip():
        return []
    try:
        values = [float(x) for x in str(centres).split(",") if x.strip()]
        maker = {"step": FilterSpec.step, "exponential": FilterSpec.exponential}[cfg["filter_shape"]]
    except (ValueError, KeyError) as exc:
        raise ConfigParse(f"bad filter settings: {exc}") from exc
    return [_wrap(maker, c * omega_m, cfg["filter_epsilon"], omega_m) for c in values]


def dual_filter_centres(cfg: Mapping) -> Optional[tuple]:
    a, b = cfg.get("filter_a_omega_over_omega_m"), cfg.get("filter_b_omega_over_omega_m")
    if a is None or b is None:
        return None
    return a, b
