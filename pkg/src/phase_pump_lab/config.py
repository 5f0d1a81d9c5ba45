"""Run configuration: a flat ``[section]`` / ``key = value`` format.

Grammar (one item per line, ``#`` starts a comment)::

    [classical]              # exactly one mode section:
                             #   classical | adiabatic | floquet | propagate | duffing
    r = 0.51                 # model parameters for that mode
    [sweep]
    r = 0.40:0.60:0.01       # inclusive start:stop:step, or a comma list
    [numerics]
    tol = 1e-9               # mode-specific knobs, see NUMERICS
    [output]
    dir = results
    name = winding

Unknown sections or keys are errors carrying the offending line number.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Dict, List, Tuple

from .errors import ConfigError
from .model import ModelParams
from .oracles.duffing import DuffingParams

MODES = ("classical", "adiabatic", "floquet", "propagate", "duffing")
META_SECTIONS = ("sweep", "numerics", "output")

MODEL_KEYS = ("r", "mu", "delta", "omega", "m_e")
DUFFING_KEYS = tuple(f.name for f in fields(DuffingParams)
                     if f.name not in ("b", "amplitude_scale"))

# mode -> default model parameters (omega in rad per unit time)
MODEL_DEFAULTS = {
    "classical": {"mu": 1.0, "delta": 0.0, "omega": 2.0 * math.pi * 2e-4, "m_e": 1.0},
    "adiabatic": {"mu": 1.0, "delta": 0.0, "omega": 1e-3, "m_e": 10.0},
    "floquet": {"mu": 1.0, "delta": 0.0, "omega": 0.0016, "m_e": 10.0},
    "propagate": {"mu": 1.0, "delta": 0.0, "omega": 0.0016, "m_e": 10.0},
}

# mode -> numerical knob -> default
NUMERICS = {
    "classical": {"tol": 1e-9, "settle_cycles": 1, "measure_cycles": 1, "slips": 1},
    "adiabatic": {"k_max": 40, "theta_grid": 2048, "n_excited": 12, "method": "fd"},
    "floquet": {"k_max": 24, "q_max": 0, "q_cap": 4096},    # q_max = 0: automatic
    "propagate": {"k_max": 24, "q_max": 0, "dt": 0.0},      # dt = 0: automatic
    "duffing": {"phi0": math.nan, "t_end": 0.0},          # nan / 0: automatic
}
INT_KNOBS = {"settle_cycles", "measure_cycles", "slips", "k_max", "theta_grid", "n_excited",
             "q_max", "q_cap"}
STR_KNOBS = {"method"}


@dataclass
class RunConfig:
    mode: str
    params: Dict[str, object]
    sweep: List[Tuple[str, List[float]]] = field(default_factory=list)
    numerics: Dict[str, object] = field(default_factory=dict)
    output: Dict[str, str] = field(default_factory=dict)

    @property
    def out_dir(self) -> str:
        return self.output.get("dir", ".")

    @property
    def name(self) -> str:
        return self.output.get("name", self.mode)

    def points(self) -> List[Dict[str, object]]:
        """Parameter dicts for the Cartesian product, lexicographic in the axes."""
        pts = [dict(self.params)]
        for name, values in self.sweep:
            pts = [dict(p, **{name: v}) for p in pts for v in sorted(values)]
        return sorted(pts, key=lambda p: tuple(p[n] for n, _ in self.sweep))

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


def _number(text: str, line: int, key: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {text!r}", line=line,
                          field=key) from None


def _axis_values(text: str, line: int, key: str) -> List[float]:
    if ":" in text:
        parts = [p.strip() for p in text.split(":")]
        if len(parts) != 3:
            raise ConfigError(f"{key}: range must be start:stop:step",
                              line=line, field=key)
        a, b, s = (_number(p, line, key) for p in parts)
        if s <= 0 or b < a:
            raise ConfigError(f"{key}: empty or non-increasing range",
                              line=line, field=key)
        n = int(round((b - a) / s))
        if abs(a + n * s - b) > 1e-9 * max(1.0, abs(b)):
            raise ConfigError(f"{key}: step does not divide the range",
                              line=line, field=key)
        # round away float noise so "0.4 + 3*0.01" prints as 0.43
        return [float(f"{a + i * s:.12g}") for i in range(n + 1)]
    vals = [_number(v.strip(), line, key) for v in text.split(",") if v.strip()]
    if not vals:
        raise ConfigError(f"{key}: no values", line=line, field=key)
    if len(set(vals)) != len(vals):
        raise ConfigError(f"{key}: duplicate sweep values", line=line, field=key)
    return vals


def _param_keys(mode: str):
    return DUFFING_KEYS if mode == "duffing" else MODEL_KEYS


def _coerce_param(mode, key, text, line):
    if mode == "duffing" and key == "kind":
        return text
    return _number(text, line, key)


def _coerce_knob(key, text, line):
    if key in STR_KNOBS:
        return text
    v = _number(text, line, key)
    if key in INT_KNOBS:
        if v != int(v):
            raise ConfigError(f"{key}: expected an integer", line=line, field=key)
        return int(v)
    return v


def build_params(mode: str, values: Dict[str, object]):
    """Instantiate the parameter record for one point (ValueError on bad input)."""
    if mode == "duffing":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return DuffingParams(**values)
    if "r" not in values:
        raise ValueError("parameter r is required")
    return ModelParams(**{k: float(v) for k, v in values.items()})


def _check(mode, values, line, key):
    try:
        build_params(mode, values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), line=line, field=key) from None


def parse_config(text: str) -> RunConfig:
    sections: Dict[str, Dict[str, Tuple[str, int]]] = {}
    order: List[str] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed section header", line=lineno)
            current = line[1:-1].strip().lower()
            if current not in MODES + META_SECTIONS:
                raise ConfigError(f"unknown section [{current}]", line=lineno,
                                  field=current)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", line=lineno,
                                  field=current)
            sections[current] = {}
            order.append(current)
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", line=lineno)
        if current is None:
            raise ConfigError("key outside any section", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key}", line=lineno, field=key)
        sections[current][key] = (value, lineno)

    modes = [s for s in order if s in MODES]
    if len(modes) != 1:
        raise ConfigError(f"exactly one mode section required, found {modes or 'none'}",
                          line=None, field="mode")
    mode = modes[0]
    keys = _param_keys(mode)

    params: Dict[str, object] = dict(MODEL_DEFAULTS.get(mode, {}))
    first_line = 0
    for key, (value, ln) in sections[mode].items():
        if key not in keys:
            raise ConfigError(f"unknown parameter {key!r} for mode {mode}",
                              line=ln, field=key)
        params[key] = _coerce_param(mode, key, value, ln)
        first_line = first_line or ln

    sweep = []
    for key, (value, ln) in sections.get("sweep", {}).items():
        if key not in keys or key == "kind":
            raise ConfigError(f"sweep axis {key!r} is not a {mode} parameter",
                              line=ln, field=key)
        vals = _axis_values(value, ln, key)
        for v in vals:
            _check(mode, dict(params, **{key: v}), ln, key)
        sweep.append((key, vals))
    swept = {k for k, _ in sweep}
    if mode != "duffing" and "r" not in params and "r" not in swept:
        raise ConfigError("parameter r is required", line=None, field="r")
    if not swept:
        _check(mode, params, first_line, next(iter(sections[mode]), "mode"))

    numerics = dict(NUMERICS[mode])
    for key, (value, ln) in sections.get("numerics", {}).items():
        if key not in numerics:
            raise ConfigError(f"unknown numerics key {key!r} for mode {mode}",
                              line=ln, field=key)
        v = _coerce_knob(key, value, ln)
        if key.endswith("tol") and not v > 0:
            raise ConfigError(f"{key} must be positive", line=ln, field=key)
        numerics[key] = v

    output = {}
    for key, (value, ln) in sections.get("output", {}).items():
        if key not in ("dir", "name"):
            raise ConfigError(f"unknown output key {key!r}", line=ln, field=key)
        output[key] = value
    return RunConfig(mode=mode, params=params, sweep=sweep, numerics=numerics, output=output)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def serialize(cfg: RunConfig) -> str:
    """Canonical text form: fixed section order, sorted keys, explicit lists."""
    lines = [f"[{cfg.mode}]"]
    lines += [f"{k} = {_fmt(cfg.params[k])}" for k in sorted(cfg.params)]
    if cfg.sweep:
        lines.append("[sweep]")
        lines += [f"{k} = " + ", ".join(_fmt(float(v)) for v in vals) for k, vals in cfg.sweep]
    lines.append("[numerics]")
    lines += [f"{k} = {_fmt(cfg.numerics[k])}" for k in sorted(cfg.numerics)]
    if cfg.output:
        lines.append("[output]")
        lines += [f"{k} = {cfg.output[k]}" for k in sorted(cfg.output)]
    return "\n".join(lines) + "\n"
