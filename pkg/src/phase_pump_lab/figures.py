"""Plot-ready data bundles for the reference figures.

Every figure's parameters are fixed here rather than taken from module
defaults, so a changed default cannot silently change a bundle.  Each bundle
is a directory ``<out>/<name>/`` with CSV files and ``metadata.json``.
No plotting happens here.
"""

from __future__ import annotations

import json
import math
import os
from typing import Callable, Dict, List

import numpy as np

from . import __version__, classical, csvio
from .adiabatic import AdiabaticConfig, amplitude_map, pump_curve
from .config import NUMERICS, RunConfig
from .floquet import locate_hysteresis_r
from .hamiltonian import MomentumBasis
from .model import ModelParams
from .sweep import run_sweep

TWO_PI = 2.0 * math.pi
OMEGA_SLOW = TWO_PI * 2e-4
R_STEP = [round(0.40 + 0.01 * i, 2) for i in range(21)]

# fixed parameter sets, recorded verbatim in metadata.json
FIGURE_PARAMS: Dict[str, Dict[str, object]] = {
    "fig2": {"r": [0.49, 0.51], "delta": 0.0, "omega_over_2pi": 2e-4, "mu": 1.0},
    "fig3a": {"r": R_STEP, "delta": 0.0, "omega_over_2pi": 2e-4, "mu": 1.0},
    "fig3b": {"m_e": 5.0, "r": [0.45, 0.5, 0.55, 0.6], "omega": 1e-3},
    "fig3c": {"m_e": [1.0, 2.0, 5.0, 10.0], "r": R_STEP, "omega": 1e-3},
    "fig3d": {"m_e": 10.0, "omega": 0.005, "r_candidates": [0.55, 0.6, 0.65]},
    "fig4": {"m_e": [10.0, 1.0], "r": 0.55, "theta_slices_over_pi": [1.4, 1.6],
             "grid": [256, 256]},
    "fig5": {"m_e": 10.0, "r": [0.2, 0.3, 0.4],
             "omega": [round(0.0016 + 0.0004 * i, 6) for i in range(22)]},
    "figS1": {"r": 0.55, "delta_over_2pi": 0.004, "omega_over_2pi": 2e-4, "mu": 0.1,
              "kappa": 0.1, "kappa_note": "reference rate scale; used as the force scale mu"},
}


def _header(name: str) -> List[str]:
    return [f"# tool: {csvio.TOOL} {__version__}", f"# figure: {name}"]


def _trajectory_columns(pair: classical.HysteresisPair) -> Dict[str, list]:
    cols: Dict[str, list] = {"direction": [], "t": [], "theta": [], "phi": []}
    for tr in (pair.forward, pair.backward):
        n = len(tr)
        cols["direction"] += [tr.direction] * n
        cols["t"] += list(tr.t)
        cols["theta"] += list(tr.theta)
        cols["phi"] += list(tr.phi)
    return cols


def _pair_bundle(name, out, params: List[ModelParams], label) -> List[str]:
    files = []
    for p in params:
        pair = classical.hysteresis_pair(p, dt_out=TWO_PI / abs(p.omega) / 2048)
        path = os.path.join(out, f"{name}_{label(p)}.csv")
        hdr = _header(name) + [
            f"# r = {csvio.fmt(p.r)}", f"# delta = {csvio.fmt(p.delta)}",
            f"# omega = {csvio.fmt(p.omega)}", f"# mu = {csvio.fmt(p.mu)}",
            f"# slip_theta_fwd = {csvio.fmt(pair.slip_theta_fwd)}",
            f"# slip_theta_bwd = {csvio.fmt(pair.slip_theta_bwd)}",
            f"# net_displacement = {csvio.fmt(pair.net_displacement())}"]
        files.append(csvio.write_columns(path, _trajectory_columns(pair), hdr))
    return files


def _fig2(out, workers):
    ps = [ModelParams(r=r, omega=OMEGA_SLOW) for r in (0.49, 0.51)]
    return _pair_bundle("fig2", out, ps, lambda p: f"r{p.r:g}")


def _figS1(out, workers):
    p = ModelParams(r=0.55, mu=0.1, delta=TWO_PI * 0.004, omega=OMEGA_SLOW)
    return _pair_bundle("figS1", out, [p], lambda p: f"r{p.r:g}")


def _sweep_bundle(out, workers, mode, name, params, axes) -> List[str]:
    cfg = RunConfig(mode=mode, params=params, sweep=axes, numerics=dict(NUMERICS[mode]),
                    output={"dir": out, "name": name})
    if mode == "classical":
        cfg.numerics["slips"] = 0
    res = run_sweep(cfg, workers=workers, out_dir=out)
    return [res.csv_path, res.log_path]


def _fig3a(out, workers):
    params = {"r": 0.5, "mu": 1.0, "delta": 0.0, "omega": OMEGA_SLOW, "m_e": 1.0}
    return _sweep_bundle(out, workers, "classical", "fig3a", params, [("r", R_STEP)])


def _fig3b(out, workers):
    cols: Dict[str, list] = {"r": [], "theta": [], "phase": []}
    for r in FIGURE_PARAMS["fig3b"]["r"]:
        curve = pump_curve(ModelParams(r=r, m_e=5.0, omega=1e-3), AdiabaticConfig())
        cols["r"] += [r] * len(curve.theta)
        cols["theta"] += list(curve.theta)
        cols["phase"] += list(curve.phase)
    return [csvio.write_columns(os.path.join(out, "fig3b.csv"), cols, _header("fig3b"))]


def _fig3c(out, workers):
    params = {"r": 0.5, "mu": 1.0, "delta": 0.0, "omega": 1e-3, "m_e": 1.0}
    files = _sweep_bundle(out, workers, "adiabatic", "fig3c", params,
                          [("m_e", [1.0, 2.0, 5.0, 10.0]), ("r", R_STEP)])
    # classical step for comparison
    cl = {"r": 0.5, "mu": 1.0, "delta": 0.0, "omega": OMEGA_SLOW, "m_e": 1.0}
    return files + _sweep_bundle(out, workers, "classical", "fig3c_classical", cl,
                                 [("r", R_STEP)])


def _fig3d(out, workers):
    h = locate_hysteresis_r()
    n = min(len(h.forward.phase), len(h.backward.phase), len(h.difference))
    omega = FIGURE_PARAMS["fig3d"]["omega"]
    cols = {"t": list(np.abs(h.forward.theta[:n]) / omega),
            "phase_forward": list(h.forward.phase[:n]),
            "phase_backward": list(h.backward.phase[:n]),
            "difference": list(h.difference[:n])}
    hdr = _header("fig3d") + [f"# r = {csvio.fmt(h.r)}",
                              f"# delta_eps = {csvio.fmt(h.delta_eps)}",
                              f"# interference_frequency = {csvio.fmt(h.frequency)}",
                              f"# max_difference = {csvio.fmt(h.max_difference)}"]
    return [csvio.write_columns(os.path.join(out, "fig3d.csv"), cols, hdr)]


def _fig4(out, workers):
    n_theta, n_phi = FIGURE_PARAMS["fig4"]["grid"]
    files = []
    for m_e in (10.0, 1.0):
        p = ModelParams(r=0.55, m_e=m_e)
        amp = amplitude_map(p, MomentumBasis(40), grid=(n_theta, n_phi))
        th = TWO_PI * np.arange(n_theta) / n_theta
        ph = TWO_PI * np.arange(n_phi) / n_phi
        tt, pp = np.meshgrid(th, ph)
        cols = {"theta": list(tt.ravel()), "phi": list(pp.ravel()),
                "amplitude": list(amp.ravel())}
        files.append(csvio.write_columns(os.path.join(out, f"fig4_me{m_e:g}.csv"), cols,
                                         _header("fig4") + [f"# m_e = {m_e:g}", "# r = 0.55"]))
        # slices at theta = 1.4 pi and 1.6 pi (nearest grid columns)
        sl = {"phi": list(ph)}
        for f in FIGURE_PARAMS["fig4"]["theta_slices_over_pi"]:
            j = int(round(f * math.pi / TWO_PI * n_theta)) % n_theta
            sl[f"amplitude_theta_{f:g}pi"] = list(amp[:, j])
        files.append(csvio.write_columns(os.path.join(out, f"fig4_me{m_e:g}_slices.csv"), sl,
                                         _header("fig4") + [f"# m_e = {m_e:g}", "# r = 0.55"]))
    return files


def _fig5(out, workers):
    params = {"r": 0.3, "mu": 1.0, "delta": 0.0, "omega": 0.0016, "m_e": 10.0}
    return _sweep_bundle(out, workers, "floquet", "fig5", params,
                         [("r", [0.2, 0.3, 0.4]), ("omega", FIGURE_PARAMS["fig5"]["omega"])])


FIGURES: Dict[str, Callable] = {"fig2": _fig2, "fig3a": _fig3a, "fig3b": _fig3b,
                                "fig3c": _fig3c, "fig3d": _fig3d, "fig4": _fig4,
                                "fig5": _fig5, "figS1": _figS1}


def reproduce_figure(name: str, out_dir: str = ".", workers: int = 1) -> List[str]:
    """Write the data bundle for ``name``; returns the file paths written."""
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}")
    out = os.path.join(out_dir, name)
    os.makedirs(out, exist_ok=True)
    files = FIGURES[name](out, workers)
    meta = {"figure": name, "tool": f"{csvio.TOOL} {__version__}",
            "parameters": FIGURE_PARAMS[name],
            "files": sorted(os.path.basename(f) for f in files)}
    path = os.path.join(out, "metadata.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return files + [path]
