"""Sweep orchestration: evaluate every point of a RunConfig and write one CSV.

Points are independent and go to a process pool when ``workers > 1``.
``Executor.map`` returns results in submission order and the submission
order is the lexicographic order of the sweep axes, so the CSV never depends
on scheduling.  Per-point failures land in the ``error`` column and the run
exits with status 1.
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from . import classical, csvio
from .adiabatic import AdiabaticConfig, pump_curve
from .config import RunConfig, build_params
from .errors import PhasePumpError
from .floquet import floquet_states, floquet_winding, pt_check
from .oracles import duffing
from .oracles.propagation import fidelity, propagate

log = logging.getLogger(__name__)


@dataclass
class SweepOutcome:
    status: int
    csv_path: str
    log_path: str
    rows: List[Dict[str, object]]

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if r.get("error"))


# ---------------------------------------------------------------- per mode

def _classical(p, nm):
    w = classical.winding(p, nm["settle_cycles"], nm["measure_cycles"], nm["tol"])
    row = {"chi": w.chi}
    meta = {"convergence_estimate": w.convergence_estimate, "phi_init": w.meta["phi_init"]}
    if nm["slips"]:
        pair = classical.hysteresis_pair(p, nm["tol"])
        row["slip_theta_fwd"] = pair.slip_theta_fwd
        row["slip_theta_bwd"] = pair.slip_theta_bwd
    return row, meta


def _adiabatic(p, nm):
    cfg = AdiabaticConfig(n_excited=nm["n_excited"], theta_grid=nm["theta_grid"],
                          k_max=nm["k_max"], method=nm["method"])
    curve = pump_curve(p, cfg)
    return {"chi": curve.chi}, dict(curve.meta)


def _floquet_ground(p, nm):
    q = nm["q_max"] or None
    kw = {"q_cap": nm["q_cap"]} if "q_cap" in nm else {}
    return floquet_states(p, 1, k_max=nm["k_max"], q_max=q, **kw)[0]


def _floquet(p, nm):
    st = _floquet_ground(p, nm)
    w = floquet_winding(st)
    row = {"chi": w.chi, "epsilon0": st.epsilon, "pt_residual": pt_check(st).residual,
           "kmax_used": st.basis.k_max, "qmax_used": st.basis.q_max}
    meta = {"k_edge": st.k_edge, "q_edge": st.q_edge, "q_mean": st.q_mean,
            "average_energy": st.average_energy}
    return row, meta


def auto_dt(p, k_max: int) -> float:
    """Largest step meeting both CN resolution limits with a safety factor of 2."""
    return min(0.05 * 2.0 * p.m_e / k_max ** 2, 0.005 / abs(p.omega))


def _propagate(p, nm):
    st = _floquet_ground(p, nm)
    psi = st.at_theta(0.0)
    psi = psi / np.linalg.norm(psi)
    period = 2.0 * math.pi / abs(p.omega)
    dt = nm["dt"] or auto_dt(p, st.basis.k_max)
    res = propagate(p, psi, (0.0, period), dt=dt)
    fid = fidelity(res.final, np.exp(-1j * st.epsilon * period) * psi)
    row = {"chi": res.phase[-1] / (2.0 * math.pi), "chi_floquet": floquet_winding(st).chi,
           "fidelity": fid, "norm_drift": float(np.max(np.abs(res.norms - 1.0)))}
    return row, {"dt": dt, "k_max": st.basis.k_max, "q_max": st.basis.q_max,
                 "epsilon": st.epsilon}


def _duffing(dp, nm):
    phi0 = None if math.isnan(nm["phi0"]) else nm["phi0"]
    rep = duffing.reduction_check(dp, phi0=phi0, t_end=nm["t_end"] or None)
    h1, h2 = ("f", "g") if dp.second_harmonic else ("c", "e")
    row = {"kind": dp.kind, "d_pred": rep.predicted["d"], "d_fit": rep.fitted["d"],
           "h1_pred": rep.predicted[h1], "h1_fit": rep.fitted[h1],
           "h2_pred": rep.predicted[h2], "h2_fit": rep.fitted[h2],
           "residual": rep.residual}
    meta = {k: v for k, v in rep.meta.items() if isinstance(v, (int, float, str))}
    meta["amplitude_ratio_deviation"] = rep.amplitude_ratio_deviation
    return row, meta


EVALUATORS = {"classical": _classical, "adiabatic": _adiabatic, "floquet": _floquet,
              "propagate": _propagate, "duffing": _duffing}


def evaluate_point(mode: str, values: Dict[str, object], numerics: Dict[str, object]):
    """Run one point; returns ``(row, log_record)``.  Never raises for model
    or numerical failures; those are reported in ``row["error"]``."""
    start = time.perf_counter()
    row = dict(values)
    meta: Dict[str, object] = {}
    try:
        params = build_params(mode, values)
        out, meta = EVALUATORS[mode](params, numerics)
        row.update(out)
        row["error"] = ""
    except (PhasePumpError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    record = {"params": values, "meta": meta, "error": row["error"],
              "seconds": round(time.perf_counter() - start, 3)}
    return row, record


def _star(args):
    return evaluate_point(*args)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def run_sweep(cfg: RunConfig, workers: int = 1, out_dir: Optional[str] = None,
              config_hash: Optional[str] = None) -> SweepOutcome:
    if workers < 1:
        raise ValueError("workers must be >= 1")
    out_dir = out_dir or cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)
    jobs = [(cfg.mode, pt, cfg.numerics) for pt in cfg.points()]
    log.info("%s sweep: %d points on %d worker(s)", cfg.mode, len(jobs), workers)
    if workers == 1 or len(jobs) == 1:
        results = [_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_star, jobs))

    rows = [r for r, _ in results]
    axes = [a for a, _ in cfg.sweep]
    cols = csvio.columns(cfg.mode, axes)
    header = csvio.header_lines(cfg.mode, config_hash or cfg.digest(),
                                {f"numerics {k}": v for k, v in cfg.numerics.items()})
    csv_path = csvio.write_csv(os.path.join(out_dir, f"{cfg.name}.csv"), cols, rows, header)

    log_path = os.path.join(out_dir, f"{cfg.name}.jsonl")
    with open(log_path, "w", encoding="utf-8") as fh:
        for _, rec in results:
            rec = {k: ({kk: _jsonable(vv) for kk, vv in v.items()} if isinstance(v, dict)
                       else _jsonable(v)) for k, v in rec.items()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    failed = sum(1 for r in rows if r["error"])
    if failed:
        log.warning("%d of %d points failed", failed, len(rows))
    return SweepOutcome(status=1 if failed else 0, csv_path=csv_path, log_path=log_path,
                        rows=rows)
