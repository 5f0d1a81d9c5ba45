"""Direct time-dependent Schroedinger propagation in the momentum basis.

Crank-Nicolson with the Hamiltonian frozen at the step midpoint:

    (1 + i dt/2 H(t + dt/2)) psi_{n+1} = (1 - i dt/2 H(t + dt/2)) psi_n

H is pentadiagonal, so each step is a banded solve.  ``1 + i dt H/2`` has
all leading minors nonsingular (eigenvalues 1 + i lambda), which makes
elimination without pivoting safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import NormDriftError, StepResolutionError
from ..model import ModelParams

NORM_TOL = 1e-8
KINETIC_STEP_MAX = 0.1
DRIVE_STEP_MAX = 0.01


@dataclass
class PropagationResult:
    times: np.ndarray
    states: np.ndarray  # rows
    norms: np.ndarray
    phase: np.ndarray  # int <v> dt up to each recorded time

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@njit(cache=True)
def _apply_bands(d, s1, s2, x, out, scale):
    # out = (1 + scale * H) x for H with diag d, <k+1|H|k> = s1, <k+2|H|k> = s2
    n = d.shape[0]
    c1 = np.conj(s1)
    for i in range(n):
        acc = d[i] * x[i]
        if i >= 1:
            acc += s1 * x[i - 1]
        if i + 1 < n:
            acc += c1 * x[i + 1]
        if i >= 2:
            acc += s2 * x[i - 2]
        if i + 2 < n:
            acc += s2 * x[i + 2]
        out[i] = x[i] + scale * acc


@njit(cache=True)
def _solve_penta(d, s1, s2, scale, rhs, work):
    # solve (1 + scale * H) y = rhs in place by banded elimination
    n = d.shape[0]
    a = work  # shape (n, 5): columns i-2 .. i+2
    c1 = np.conj(s1)
    for i in range(n):
        a[i, 0] = scale * s2
        a[i, 1] = scale * s1
        a[i, 2] = 1.0 + scale * d[i]
        a[i, 3] = scale * c1
        a[i, 4] = scale * s2
    y = rhs
    for i in range(n):
        piv = a[i, 2]
        for r in (1, 2):
            j = i + r
            if j >= n:
                break
            f = a[j, 2 - r] / piv
            if f == 0:
                continue
            # row j -= f * row i over columns i .. i+2
            for c in range(3):
                col = i + c
                if col >= n:
                    break
                a[j, 2 - r + c] -= f * a[i, 2 + c]
            y[j] -= f * y[i]
    for i in range(n - 1, -1, -1):
        acc = y[i]
        if i + 1 < n:
            acc -= a[i, 3] * y[i + 1]
        if i + 2 < n:
            acc -= a[i, 4] * y[i + 2]
        y[i] = acc / a[i, 2]


@njit(cache=True)
def _cn_run(psi0, ks, m_e, a1, a2, omega, t0, dt, nsteps, every):
    n = psi0.shape[0]
    d = ks * ks / (2.0 * m_e) + 0j
    s2 = -0.5 * a2 + 0j
    nrec = nsteps // every + 1
    states = np.empty((nrec, n), dtype=np.complex128)
    norms = np.empty(nrec)
    phase = np.empty(nrec)
    times = np.empty(nrec)
    psi = psi0.copy()
    tmp = np.empty(n, dtype=np.complex128)
    work = np.empty((n, 5), dtype=np.complex128)
    vel = ks / m_e
    v_prev = 0.0
    for i in range(n):
        v_prev += vel[i] * (psi[i].real ** 2 + psi[i].imag ** 2)
    acc = 0.0
    states[0] = psi
    norms[0] = np.sqrt(np.sum(np.abs(psi) ** 2))
    phase[0] = 0.0
    times[0] = t0
    rec = 1
    half = 0.5j * dt
    for step in range(nsteps):
        t_mid = t0 + (step + 0.5) * dt
        s1 = -0.5 * a1 * np.exp(-1j * omega * t_mid)
        _apply_bands(d, s1, s2, psi, tmp, -half)
        _solve_penta(d, s1, s2, half, tmp, work)
        psi[:] = tmp
        v_now = 0.0
        for i in range(n):
            v_now += vel[i] * (psi[i].real ** 2 + psi[i].imag ** 2)
        acc += 0.5 * dt * (v_prev + v_now)
        v_prev = v_now
        if (step + 1) % every == 0:
            states[rec] = psi
            norms[rec] = np.sqrt(np.sum(np.abs(psi) ** 2))
            phase[rec] = acc
            times[rec] = t0 + (step + 1) * dt
            rec += 1
    return times, states, norms, phase


def propagate(p: ModelParams, psi0, t_span, dt: float, record_every: int = 0,
              check: bool = True) -> PropagationResult:
    """Evolve ``psi0`` (momentum components, |k| <= k_max) with theta = omega t.

    ``dt`` is shrunk slightly so an integer number of steps spans ``t_span``.
    ``record_every`` = 0 keeps only the initial and final states.
    """
    psi0 = np.ascontiguousarray(psi0, dtype=np.complex128)
    n = psi0.shape[0]
    k_max = (n - 1) // 2
    if n != 2 * k_max + 1:
        raise ValueError("psi0 must have odd length 2*k_max+1")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("psi0 must be normalized")
    t0, t1 = float(t_span[0]), float(t_span[1])
    nsteps = max(1, int(math.ceil((t1 - t0) / dt - 1e-9)))
    dt = (t1 - t0) / nsteps
    if check:
        kin = dt * k_max ** 2 / (2.0 * p.m_e)
        if kin >= KINETIC_STEP_MAX:
            raise StepResolutionError(f"dt*k_max^2/(2 m_e) = {kin:.3g} >= {KINETIC_STEP_MAX}")
        if dt * abs(p.omega) >= DRIVE_STEP_MAX:
            raise StepResolutionError(f"dt*|omega| = {dt * abs(p.omega):.3g} >= {DRIVE_STEP_MAX}")
    every = nsteps if record_every <= 0 else int(record_every)
    ks = np.arange(-k_max, k_max + 1, dtype=np.float64)
    times, states, norms, phase = _cn_run(psi0, ks, float(p.m_e), float(p.a1), float(p.a2),
                                          float(p.omega), t0, dt, nsteps, every)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > NORM_TOL:
        raise NormDriftError(f"norm drift {drift:.3g} exceeds {NORM_TOL:g}")
    return PropagationResult(times=times, states=states, norms=norms, phase=phase)


def fidelity(a, b) -> float:
    return float(abs(np.vdot(a, b)) ** 2)
