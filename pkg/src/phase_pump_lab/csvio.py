"""CSV schemas and the deterministic writer.

Layout: ``#``-prefixed metadata lines, one column header, then rows.  Floats
are written with 12 significant digits; lists (slip angles) are joined with
``;``.  Nothing time- or host-dependent goes into the file, so identical
inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import fields
from typing import Dict, Iterable, List, Sequence

from . import __version__, classical, floquet
from .adiabatic import AdiabaticConfig
from .oracles import duffing, propagation

TOOL = "phase-pump-lab"

SCHEMAS: Dict[str, List[str]] = {
    "classical": ["r", "delta", "omega", "chi", "slip_theta_fwd", "slip_theta_bwd"],
    "adiabatic": ["r", "m_e", "omega", "chi"],
    "floquet": ["r", "omega", "m_e", "chi", "epsilon0", "pt_residual", "kmax_used",
                "qmax_used"],
    "propagate": ["r", "m_e", "omega", "chi", "chi_floquet", "fidelity", "norm_drift"],
    # swept Duffing axes are prepended at run time
    "duffing": ["kind", "d_pred", "d_fit", "h1_pred", "h1_fit", "h2_pred", "h2_fit",
                "residual"],
}


def columns(mode: str, axes: Sequence[str] = ()) -> List[str]:
    base = SCHEMAS[mode]
    extra = [a for a in axes if a not in base]
    return extra + base + ["error"]


def module_defaults() -> Dict[str, object]:
    """Numerical defaults in force across the simulation modules."""
    out = {
        "classical.rtol": classical.DEFAULT_RTOL,
        "classical.slip_jump": classical.SLIP_JUMP,
        "floquet.edge_tol": floquet.EDGE_TOL,
        "floquet.k_max": floquet.DEFAULT_K_MAX,
        "floquet.q_cap": floquet.Q_CAP,
        "propagation.norm_tol": propagation.NORM_TOL,
        "propagation.kinetic_step_max": propagation.KINETIC_STEP_MAX,
        "propagation.drive_step_max": propagation.DRIVE_STEP_MAX,
        "duffing.lowpass_fraction": duffing.LOWPASS_FRACTION,
        "duffing.min_periods": duffing.MIN_PERIODS,
        "duffing.samples_per_period": duffing.SAMPLES_PER_PERIOD,
        "duffing.validity_limit": duffing.VALIDITY_LIMIT,
    }
    cfg = AdiabaticConfig()
    for f in fields(cfg):
        if f.name != "dtheta_fd":
            out[f"adiabatic.{f.name}"] = getattr(cfg, f.name)
    return dict(sorted(out.items()))


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ";".join(fmt(v) for v in value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) or hasattr(value, "dtype"):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if v == 0.0:
            return "0"  # folds -0.0
        return f"{v:.12g}"
    return str(value)


def header_lines(mode: str, config_hash: str, extra: Dict[str, object] = None) -> List[str]:
    lines = [f"# tool: {TOOL} {__version__}",
             f"# config_sha256: {config_hash}",
             f"# mode: {mode}"]
    for k, v in module_defaults().items():
        lines.append(f"# default {k} = {fmt(v)}")
    for k, v in sorted((extra or {}).items()):
        lines.append(f"# {k} = {fmt(v)}")
    return lines


def render(cols: Sequence[str], rows: Iterable[Dict[str, object]],
           header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def write_csv(path: str, cols: Sequence[str], rows: Iterable[Dict[str, object]],
              header: Sequence[str] = ()) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render(cols, rows, header))
    return path


def write_columns(path: str, data: Dict[str, Sequence], header: Sequence[str] = ()) -> str:
    """Write equal-length arrays as columns (trajectories, curves)."""
    cols = list(data)
    n = len(next(iter(data.values())))
    if any(len(v) != n for v in data.values()):
        raise ValueError("columns have different lengths")
    rows = ({c: data[c][i] for c in cols} for i in range(n))
    return write_csv(path, cols, rows, header)


def read_csv(path: str):
    """Return ``(comments, header, rows)`` with rows as lists of strings."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    parsed = list(csv.reader(body))
    return comments, parsed[0], parsed[1:]
