"""First-order adiabatic pump: ground-state velocity, phase curves, amplitude maps.

To first order in the sweep rate the ground state acquires the admixture
``sum_m |m><m|d_t 0>/(E_0 - E_m)``, which carries the expected velocity

    v = 2 Re[-i sum_{m>0} <0|v_op|m><m|d_t 0>/(E_0 - E_m)],   d_t = omega d_theta

with ``v_op = k/m_e``.  ``<m|d_theta 0>`` is obtained either from
phase-aligned finite differences of the eigenvector (``method="fd"``) or from
``<m|dH/dtheta|0>/(E_0 - E_m)`` (``method="perturbative"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .classical import WindingResult
from .errors import GapCollapseError
from .hamiltonian import (MomentumBasis, build_hamiltonian, eigensolve,
                          wavefunction_on_grid)
from .model import ModelParams

TWO_PI = 2.0 * math.pi
GAP_MIN = 1e-9


@dataclass(frozen=True)
class AdiabaticConfig:
    n_excited: int = 12
    theta_grid: int = 2048
    dtheta_fd: Optional[float] = None  # default: one grid step, 2pi/theta_grid
    k_max: int = 40
    method: str = "fd"

    def __post_init__(self):
        if self.n_excited < 1:
            raise ValueError("n_excited must be >= 1")
        if self.theta_grid < 256:
            raise ValueError("theta_grid must be >= 256")
        if self.method not in ("fd", "perturbative"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.dtheta_fd is not None and not self.dtheta_fd > 0:
            raise ValueError("dtheta_fd must be positive")
        if self.n_excited > 2 * self.k_max:
            raise ValueError("n_excited exceeds the number of excited basis states")

    @property
    def step(self) -> float:
        return self.dtheta_fd if self.dtheta_fd is not None else TWO_PI / self.theta_grid

    @property
    def basis(self) -> MomentumBasis:
        return MomentumBasis(self.k_max)


@dataclass
class PumpCurve:
    theta: np.ndarray
    phase: np.ndarray  # cumulative int <v> dt, starts at 0
    chi: float
    meta: dict = field(default_factory=dict)


def _dh_dtheta(p: ModelParams, theta: float, basis: MomentumBasis) -> np.ndarray:
    n = basis.dim
    d = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    c = -0.5 * p.a1 * (-1j) * np.exp(-1j * theta)
    d[idx[1:], idx[:-1]] = c
    d[idx[:-1], idx[1:]] = np.conj(c)
    return d


def _spectrum(p, theta, cfg):
    dec = eigensolve(build_hamiltonian(p, theta, cfg.basis), cfg.n_excited + 1)
    gap = dec.energies[1] - dec.energies[0]
    if gap < GAP_MIN:
        raise GapCollapseError(f"ground-state gap {gap:.3g} below {GAP_MIN:g} at "
                               f"theta={theta:.6g}", theta=theta, gap=gap)
    return dec.energies, dec.vectors


def _align(ref, v):
    ov = np.vdot(ref, v)
    return v * (abs(ov) / ov) if ov != 0 else v


def _velocity_per_omega(p, energies, vectors, dpsi0, cfg):
    """``v / omega`` given the excited-state projections of d_theta|0>."""
    ks = cfg.basis.ks / p.m_e
    v0 = vectors[:, 0]
    vm = vectors[:, 1:cfg.n_excited + 1]
    de = energies[0] - energies[1:cfg.n_excited + 1]
    vel_0m = (np.conj(v0) * ks) @ vm  # <0|v|m>
    proj = vm.conj().T @ dpsi0  # <m|d_theta 0>
    return float(2.0 * np.real(-1j * np.sum(vel_0m * proj / de)))


def _perturbative_dpsi(p, theta, energies, vectors, cfg):
    dh = _dh_dtheta(p, theta, cfg.basis)
    v0 = vectors[:, 0]
    vm = vectors[:, 1:cfg.n_excited + 1]
    de = energies[0] - energies[1:cfg.n_excited + 1]
    coeff = (vm.conj().T @ (dh @ v0)) / de
    return vm @ coeff


def instantaneous_velocity(p: ModelParams, theta: float,
                           cfg: AdiabaticConfig = AdiabaticConfig()) -> float:
    """First-order expected velocity <v>(theta) for the sweep rate ``p.omega``."""
    if p.omega == 0.0:
        return 0.0
    energies, vectors = _spectrum(p, theta, cfg)
    if cfg.method == "perturbative":
        dpsi = _perturbative_dpsi(p, theta, energies, vectors, cfg)
    else:
        h = cfg.step
        v0 = vectors[:, 0]
        plus = _align(v0, _spectrum(p, theta + h, cfg)[1][:, 0])
        minus = _align(v0, _spectrum(p, theta - h, cfg)[1][:, 0])
        dpsi = (plus - minus) / (2.0 * h)
    return p.omega * _velocity_per_omega(p, energies, vectors, dpsi, cfg)


def velocity_profile(p: ModelParams, cfg: AdiabaticConfig = AdiabaticConfig(),
                     phase_noise: Optional[np.random.Generator] = None):
    """``v/omega`` on the periodic grid ``theta_j = 2 pi j / theta_grid``.

    When the finite-difference step equals the grid spacing the neighbouring
    ground states are reused.  ``phase_noise`` multiplies every eigenvector
    by a random global phase first (used to test gauge robustness).
    """
    n = cfg.theta_grid
    thetas = TWO_PI * np.arange(n) / n
    spectra = []
    for th in thetas:
        e, v = _spectrum(p, th, cfg)
        if phase_noise is not None:
            v = v * np.exp(1j * phase_noise.uniform(0, TWO_PI, v.shape[1]))
        spectra.append((e, v))
    reuse = cfg.dtheta_fd is None or math.isclose(cfg.dtheta_fd, TWO_PI / n)
    out = np.empty(n)
    for j, th in enumerate(thetas):
        e, v = spectra[j]
        if cfg.method == "perturbative":
            dpsi = _perturbative_dpsi(p, th, e, v, cfg)
        else:
            if reuse:
                vp, vmn = spectra[(j + 1) % n][1][:, 0], spectra[j - 1][1][:, 0]
            else:
                vp = _spectrum(p, th + cfg.step, cfg)[1][:, 0]
                vmn = _spectrum(p, th - cfg.step, cfg)[1][:, 0]
            v0 = v[:, 0]
            dpsi = (_align(v0, vp) - _align(v0, vmn)) / (2.0 * cfg.step)
        out[j] = _velocity_per_omega(p, e, v, dpsi, cfg)
    return thetas, out


def pump_curve(p: ModelParams, cfg: AdiabaticConfig = AdiabaticConfig()) -> PumpCurve:
    """Cumulative phase ``int <v> dt`` over one modulation cycle.

    A backward sweep (omega < 0) runs theta from 0 to -2pi and yields the
    opposite winding number.
    """
    if p.omega == 0.0:
        raise ValueError("pump_curve requires omega != 0")
    sign = 1.0 if p.omega > 0 else -1.0
    # v/omega as a function of the wrapped angle; for the backward sweep
    # sample it at theta = -theta_j which wraps to 2pi - theta_j
    thetas, g = velocity_profile(p, cfg)
    if sign < 0:
        g = np.roll(g[::-1], 1)
    g_closed = np.append(g, g[0])
    th_path = sign * np.append(thetas, TWO_PI)
    # int v dt = int (v/omega) dtheta along the signed path
    steps = 0.5 * (g_closed[1:] + g_closed[:-1]) * np.diff(th_path)
    phase = np.concatenate([[0.0], np.cumsum(steps)])
    chi = phase[-1] / TWO_PI
    meta = {"method": cfg.method, "n_excited": cfg.n_excited,
            "theta_grid": cfg.theta_grid, "k_max": cfg.k_max}
    return PumpCurve(theta=th_path, phase=phase, chi=float(chi), meta=meta)


def adiabatic_winding(p: ModelParams, cfg: AdiabaticConfig = AdiabaticConfig()) -> WindingResult:
    curve = pump_curve(p, cfg)
    return WindingResult(chi=curve.chi, method="adiabatic", cycles_used=1,
                         convergence_estimate=math.nan, meta=curve.meta)


def amplitude_map(p: ModelParams, basis: MomentumBasis, grid=(256, 256)) -> np.ndarray:
    """Ground-state ``|psi_0(phi, theta)|`` with shape ``(n_phi, n_theta)``.

    Column j holds theta_j = 2 pi j / n_theta; each column is normalized so
    that ``(2pi/n_phi) sum |psi|^2 = 1``.
    """
    n_theta, n_phi = grid
    out = np.empty((n_phi, n_theta))
    for j in range(n_theta):
        th = TWO_PI * j / n_theta
        dec = eigensolve(build_hamiltonian(p, th, basis), 1)
        out[:, j] = np.abs(wavefunction_on_grid(dec.state(0), n_phi))
    return out


def cycle_average_ground_energy(p: ModelParams, basis: MomentumBasis,
                                n_theta: int = 256) -> float:
    """Mean of the instantaneous ground energy E_0(theta) over one cycle."""
    e = [linalg.eigvalsh(build_hamiltonian(p, TWO_PI * j / n_theta, basis).entries,
                         subset_by_index=[0, 0])[0] for j in range(n_theta)]
    return float(np.mean(e))
