"""Coupled Duffing-Van der Pol oscillators and their reduction to Adler form.

Each oscillator obeys (in the rescaled form where the nonlinear damping
equals the linear one)

    u_n'' + w_n^2 (1 -+ Delta_n) u_n - gamma_n w_n (1 - u_n^2) u_n' + a_n w_n^2 u_n^3 = F_n

with the coupling force ``F_n`` chosen by ``kind``:

* ``static``: ``F_1 = kappa_1 w^2 u_2`` (and symmetrically), ``w_1 = w_2``;
* ``parametric``: ``F_1 = w_1^2 2 kappa_1 cos((w_1 - w_2) t + theta_1) u_2``;
* ``nonlinear-parametric``: ``F_1 = w_1^2 2 lambda_1 cos(2 (w_1 - w_2) t) u_1 u_2^2``.

The slow phase difference ``phi = phi_2 - phi_1`` (phases measured against
the bare carriers ``w_n``) is then predicted to follow

    dphi/dt = d - c sin(phi - theta) - e cos(phi - theta)      (first harmonic)
    dphi/dt = d - f sin(2 phi) - g cos(2 phi)                   (second harmonic)
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import signal
from scipy.integrate import solve_ivp

from ..errors import DemodulationError, IntegrationError

KINDS = ("static", "parametric", "nonlinear-parametric")
VALIDITY_LIMIT = 0.1
LOWPASS_FRACTION = 1.0 / 20.0
SAMPLES_PER_PERIOD = 16
MIN_PERIODS = 60


@dataclass(frozen=True)
class DuffingParams:
    """Two-oscillator parameters.  ``k1``/``k2`` are the coupling amplitudes
    (kappa for linear couplings, lambda for the nonlinear one).

    When ``b`` is given the raw nonlinear-damping form is assumed and
    rescaled on construction: ``u -> sqrt(gamma/b) u`` and ``a -> a b / gamma``
    (``amplitude_scale`` records the factor for converting traces back).
    """

    kind: str = "static"
    omega1: float = 1.0
    omega2: float = 1.0
    gamma1: float = 0.01
    gamma2: float = 0.01
    a1: float = 0.005
    a2: float = 0.005
    k1: float = 0.0
    k2: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0
    theta1: float = 0.0
    theta2: float = 0.0
    b: Optional[float] = None
    amplitude_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coupling kind {self.kind!r}; expected one of {KINDS}")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("carrier frequencies must be positive")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise ValueError("gamma must be positive (negative damping drives the oscillation)")
        if self.kind == "static" and self.omega1 != self.omega2:
            raise ValueError("static coupling assumes a common carrier omega1 == omega2")
        if self.kind != "static" and self.omega1 == self.omega2:
            raise ValueError("parametric couplings need distinct carriers")
        if self.b is not None:
            if self.b <= 0:
                raise ValueError("b must be positive")
            # fold the raw nonlinear damping into the dimensionless form once
            object.__setattr__(self, "a1", self.a1 * self.b / self.gamma1)
            object.__setattr__(self, "a2", self.a2 * self.b / self.gamma2)
            object.__setattr__(self, "amplitude_scale", math.sqrt(self.gamma1 / self.b))
            object.__setattr__(self, "b", None)
        big = {n: v for n, v in self.small_parameters().items() if abs(v) > VALIDITY_LIMIT}
        if big:
            warnings.warn(f"reduction validity: parameters above {VALIDITY_LIMIT}: {big}",
                          RuntimeWarning, stacklevel=3)

    @classmethod
    def static(cls, omega0=1.0, gamma=0.01, a=0.005, kappa=0.0, delta=0.0, b=None):
        return cls(kind="static", omega1=omega0, omega2=omega0, gamma1=gamma, gamma2=gamma,
                   a1=a, a2=a, k1=kappa, k2=kappa, delta1=delta, delta2=delta, b=b)

    def small_parameters(self) -> dict:
        return {"gamma1": self.gamma1, "gamma2": self.gamma2, "a1": self.a1, "a2": self.a2,
                "k1": self.k1, "k2": self.k2, "delta1": self.delta1, "delta2": self.delta2}

    @property
    def epsilon(self) -> float:
        """Scale of the slow dynamics: the largest small parameter."""
        return max(abs(v) for v in self.small_parameters().values())

    def scaled(self) -> dict:
        """Slow-time parameters D, Gamma, alpha, K (each divided by epsilon)."""
        e = self.epsilon
        return {"D": (self.delta1 / e, self.delta2 / e), "Gamma": (self.gamma1 / e, self.gamma2 / e),
                "alpha": (self.a1 / e, self.a2 / e), "K": (self.k1 / e, self.k2 / e)}

    def scaled_by(self, s: float) -> "DuffingParams":
        """Every small parameter multiplied by ``s`` (carriers and phases kept)."""
        return replace(self, gamma1=self.gamma1 * s, gamma2=self.gamma2 * s, a1=self.a1 * s,
                       a2=self.a2 * s, k1=self.k1 * s, k2=self.k2 * s,
                       delta1=self.delta1 * s, delta2=self.delta2 * s)

    @property
    def second_harmonic(self) -> bool:
        return self.kind == "nonlinear-parametric"

    @property
    def theta(self) -> float:
        return self.theta2 - self.theta1 if self.kind == "parametric" else 0.0


@dataclass
class DuffingTraces:
    t: np.ndarray
    u1: np.ndarray
    u2: np.ndarray
    params: DuffingParams
    meta: dict = field(default_factory=dict)


@dataclass
class ReductionReport:
    predicted: dict  # d, and c/e or f/g
    fitted: dict
    residual: float  # rms(simulated - predicted dphi/dt) / rms(predicted)
    t: np.ndarray
    phi: np.ndarray
    dphi_dt: np.ndarray
    amplitude_ratio_deviation: float  # max |R1/R2 - 1| over the fitted window
    meta: dict = field(default_factory=dict)


def _rhs(dp: DuffingParams):
    w1, w2 = dp.omega1, dp.omega2
    g1, g2, a1, a2 = dp.gamma1, dp.gamma2, dp.a1, dp.a2
    s1, s2 = w1 * w1 * (1.0 - dp.delta1), w2 * w2 * (1.0 + dp.delta2)
    k1, k2, th1, th2 = dp.k1, dp.k2, dp.theta1, dp.theta2
    kind = dp.kind
    cos = math.cos

    def f(t, y):
        x1, v1, x2, v2 = y
        if kind == "static":
            f1, f2 = k1 * w1 * w1 * x2, k2 * w2 * w2 * x1
        elif kind == "parametric":
            f1 = w1 * w1 * 2.0 * k1 * cos((w1 - w2) * t + th1) * x2
            f2 = w2 * w2 * 2.0 * k2 * cos((w2 - w1) * t + th2) * x1
        else:
            m = cos(2.0 * (w1 - w2) * t)
            f1 = w1 * w1 * 2.0 * k1 * m * x1 * x2 * x2
            f2 = w2 * w2 * 2.0 * k2 * m * x2 * x1 * x1
        acc1 = -s1 * x1 + g1 * w1 * (1.0 - x1 * x1) * v1 - a1 * w1 * w1 * x1 ** 3 + f1
        acc2 = -s2 * x2 + g2 * w2 * (1.0 - x2 * x2) * v2 - a2 * w2 * w2 * x2 ** 3 + f2
        return [v1, acc1, v2, acc2]

    return f


def carrier_state(omega: float, amplitude: float, phase: float):
    """(u, du/dt) at t = 0 of ``amplitude * cos(omega t + phase)``."""
    return amplitude * math.cos(phase), -amplitude * omega * math.sin(phase)


def simulate_duffing(dp: DuffingParams, u_init, t_span, dt_control: Optional[float] = None,
                     rtol: float = 1e-10, atol: float = 1e-10) -> DuffingTraces:
    """Integrate the full second-order pair and sample it uniformly.

    ``u_init`` = (u1, u1', u2, u2').  The output spacing ``dt_control``
    defaults to 1/16 of the faster carrier period.
    """
    y0 = np.asarray(u_init, dtype=float)
    if y0.shape != (4,):
        raise ValueError("u_init must be (u1, du1/dt, u2, du2/dt)")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if dt_control is None:
        dt_control = 2.0 * math.pi / max(dp.omega1, dp.omega2) / SAMPLES_PER_PERIOD
    n = int(math.floor((t1 - t0) / dt_control + 1e-9))
    t_eval = t0 + dt_control * np.arange(n + 1)
    sol = solve_ivp(_rhs(dp), (t0, t1), y0, method="DOP853", t_eval=t_eval, rtol=rtol, atol=atol)
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(f"oscillator integration failed: {sol.message}", t_fail=t_fail)
    return DuffingTraces(t=sol.t, u1=sol.y[0], u2=sol.y[2], params=dp,
                         meta={"rtol": rtol, "dt_control": dt_control, "nfev": sol.nfev})


def demodulate(t, u, omega: float, cutoff_fraction: float = LOWPASS_FRACTION) -> np.ndarray:
    """Complex slow amplitude ``U`` with ``u ~ U e^{i omega t} + c.c.``."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-12):
        raise DemodulationError("demodulation needs uniformly sampled traces")
    if t[-1] - t[0] < MIN_PERIODS * 2.0 * math.pi / omega:
        raise DemodulationError(f"trace shorter than {MIN_PERIODS} carrier periods")
    nyq = math.pi / dt
    wc = cutoff_fraction * omega
    if wc >= nyq:
        raise DemodulationError("sampling too coarse for the low-pass cutoff")
    sos = signal.butter(4, wc / nyq, output="sos")
    z = u * np.exp(-1j * omega * t)
    env = signal.sosfiltfilt(sos, z.real) + 1j * signal.sosfiltfilt(sos, z.imag)
    rms = math.sqrt(float(np.mean(u ** 2)))
    if rms == 0.0 or float(np.median(np.abs(env))) < 1e-3 * rms:
        raise DemodulationError("carrier component too weak relative to the trace")
    return env


def extract_phase(traces, omegas=None, trim_periods: float = 60.0):
    """Unwrapped slow phase difference ``phi_2 - phi_1`` (or the single phase).

    ``traces`` is a DuffingTraces or a tuple ``(t, u)`` / ``(t, u1, u2)``;
    ``omegas`` defaults to the traces' carriers.  Filter edge transients are
    trimmed (``trim_periods`` periods of the slower carrier at each end).
    Returns ``(t, phi, envelopes)``.
    """
    if isinstance(traces, DuffingTraces):
        t, us = traces.t, (traces.u1, traces.u2)
        if omegas is None:
            omegas = (traces.params.omega1, traces.params.omega2)
    else:
        t, us = traces[0], tuple(traces[1:])
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    if len(omegas) != len(us):
        raise ValueError("one carrier frequency per trace")
    envs = [demodulate(t, u, w) for u, w in zip(us, omegas)]
    phases = [np.unwrap(np.angle(e)) for e in envs]
    phi = phases[0] if len(phases) == 1 else phases[1] - phases[0]
    cut = int(math.ceil(trim_periods * 2.0 * math.pi / float(np.min(omegas)) / (t[1] - t[0])))
    if 2 * cut >= len(t) - 2:
        raise DemodulationError("trace too short after trimming filter transients")
    sl = slice(cut, len(t) - cut)
    return np.asarray(t)[sl], phi[sl], [e[sl] for e in envs]


def predicted_coefficients(dp: DuffingParams) -> dict:
    """Adler coefficients from the first-order rotating-wave reduction."""
    w1, w2 = dp.omega1, dp.omega2
    d = 0.5 * (w1 * dp.delta1 + w2 * dp.delta2 + 3.0 * (w2 * dp.a2 - w1 * dp.a1))
    sine = 0.5 * (3.0 * w2 * dp.a2 * dp.k2 / dp.gamma2 + 3.0 * w1 * dp.a1 * dp.k1 / dp.gamma1)
    cosine = 0.5 * (w2 * dp.k2 - w1 * dp.k1)
    if dp.second_harmonic:
        return {"d": d, "f": sine, "g": cosine}
    return {"d": d, "c": sine, "e": cosine}


def _design(phi, dp):
    x = 2.0 * phi if dp.second_harmonic else phi - dp.theta
    return np.column_stack([np.ones_like(phi), -np.sin(x), -np.cos(x)])


def predicted_rate(dp: DuffingParams, phi, coeffs: Optional[dict] = None):
    """Right-hand side of the reduced Adler equation at ``phi``."""
    c = predicted_coefficients(dp) if coeffs is None else coeffs
    a = _design(np.asarray(phi, dtype=float), dp)
    names = ("d", "f", "g") if dp.second_harmonic else ("d", "c", "e")
    return a @ np.array([c[n] for n in names])


def default_start(dp: DuffingParams, offset: float = 0.1) -> float:
    """A point just past the repeller of the predicted equation, on the side
    from which the relaxation sweeps the whole lobe; 0 when unlocked."""
    grid = np.linspace(0.0, 2.0 * math.pi, 4097)
    rate = predicted_rate(dp, grid)
    up = np.nonzero((rate[:-1] < 0) & (rate[1:] >= 0))[0]
    if up.size == 0:
        return 0.0
    j = up[0]
    root = grid[j] - rate[j] * (grid[1] - grid[0]) / (rate[j + 1] - rate[j])
    if dp.second_harmonic:
        offset *= 0.5
    return float(root - offset)


def reduction_check(dp: DuffingParams, phi0: Optional[float] = None,
                    t_end: Optional[float] = None, fit_skip: float = 0.0) -> ReductionReport:
    """Simulate, demodulate and compare dphi/dt with the predicted Adler form.

    Both oscillators start on their free limit cycle (amplitude 2, i.e.
    |U| = 1) with phase difference ``phi0``.  The default start just below
    the repeller of a locked pair lets the relaxation sweep the whole sine
    lobe, which the fit needs.  The default run length is eight predicted
    phase times plus the trimmed filter edges.  The first ``fit_skip`` of the
    retained window is excluded from the fit.
    """
    pred = predicted_coefficients(dp)
    if phi0 is None:
        phi0 = default_start(dp)
    if t_end is None:
        rate = max(sum(abs(v) for v in pred.values()), 0.1 * dp.epsilon)
        edge = 2.0 * 60.0 * 2.0 * math.pi / min(dp.omega1, dp.omega2)
        t_end = 8.0 / rate + edge
    x1, v1 = carrier_state(dp.omega1, 2.0, 0.0)
    x2, v2 = carrier_state(dp.omega2, 2.0, phi0)
    tr = simulate_duffing(dp, (x1, v1, x2, v2), (0.0, t_end))
    t, phi, envs = extract_phase(tr)
    dphi = np.gradient(phi, t)
    keep = t >= t[0] + fit_skip * (t[-1] - t[0])
    a = _design(phi[keep], dp)
    coef, *_ = np.linalg.lstsq(a, dphi[keep], rcond=None)
    names = ("d", "f", "g") if dp.second_harmonic else ("d", "c", "e")
    fitted = dict(zip(names, map(float, coef)))
    model = a @ np.array([pred[n] for n in names])
    scale = math.sqrt(float(np.mean(model ** 2)))
    resid = math.sqrt(float(np.mean((dphi[keep] - model) ** 2)))
    ratio = np.abs(envs[0][keep]) / np.abs(envs[1][keep])
    return ReductionReport(predicted=pred, fitted=fitted,
                           residual=resid / scale if scale > 0 else math.nan,
                           t=t, phi=phi, dphi_dt=dphi,
                           amplitude_ratio_deviation=float(np.max(np.abs(ratio - 1.0))),
                           meta={"epsilon": dp.epsilon, "t_end": t_end, "phi0": phi0,
                                 "phi_span": float(np.ptp(phi[keep])),
                                 "noise_floor": resid})


@dataclass
class SingleOscillatorReport:
    amplitude: float  # steady |u_0| (half the peak-to-peak swing over 2)
    frequency: float  # steady angular frequency
    t: np.ndarray
    envelope: np.ndarray  # |U(t)| from demodulation


def single_oscillator(omega0: float = 1.0, gamma: float = 0.01, a: float = 0.005,
                      delta: float = 0.0, u_start: float = 0.05,
                      t_end: Optional[float] = None) -> SingleOscillatorReport:
    """Grow one uncoupled oscillator from ``u_start`` and measure its limit cycle.

    Amplitude and frequency are averaged over the last quarter of the run,
    the frequency as omega0 plus the slope of the demodulated phase.
    """
    dp = DuffingParams.static(omega0=omega0, gamma=gamma, a=a, kappa=0.0, delta=delta)
    if t_end is None:
        t_end = 30.0 / (gamma * omega0)
    tr = simulate_duffing(dp, (u_start, 0.0, 0.0, 0.0), (0.0, t_end))
    env = demodulate(tr.t, tr.u1, omega0)
    tail = tr.t >= 0.75 * t_end
    ph = np.unwrap(np.angle(env[tail]))
    slope = float(np.polyfit(tr.t[tail], ph, 1)[0])
    return SingleOscillatorReport(amplitude=float(np.mean(np.abs(env[tail]))),
                                  frequency=omega0 + slope, t=tr.t, envelope=np.abs(env))
