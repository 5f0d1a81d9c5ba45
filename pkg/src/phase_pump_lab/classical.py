"""Classical phase-particle dynamics: integration, fixed points, slips, winding."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import ode, quad, solve_ivp
from scipy.optimize import brentq

from .errors import DivergenceError, IntegrationError, NoSaddleError, RootInIntervalError
from .model import ModelParams, PhasePoint, force, force_dphi, force_scalar

TWO_PI = 2.0 * math.pi

# slip detector: |dphi| above SLIP_JUMP within a theta window of SLIP_WINDOW
SLIP_JUMP = 0.5
SLIP_WINDOW = 0.01
MARGINAL_A = 1e-6
TRACKING_TOL = 0.05
DEFAULT_RTOL = 1e-9
DEFAULT_OMEGA = TWO_PI * 2e-4


@dataclass(frozen=True)
class SlipEvent:
    """A discontinuous phase jump.

    ``theta`` is where the jump is steepest; ``theta_onset`` is the last
    sample still within the tracking tolerance of an attractive root (nan if
    the event was not annotated against a force field).
    """

    t: float
    theta: float
    jump: float
    theta_onset: float = math.nan

    @property
    def sign(self) -> int:
        return 1 if self.jump > 0 else -1


@dataclass
class Trajectory:
    """Unwrapped phase samples ``phi(t)`` with ``theta(t) = theta0 + omega (t - t0)``."""

    t: np.ndarray
    phi: np.ndarray
    theta: np.ndarray
    params: ModelParams
    slips: list = field(default_factory=list)

    @property
    def direction(self) -> str:
        return self.params.direction

    @property
    def samples(self):
        return zip(self.t, self.phi, self.theta)

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class FixedPoint:
    phi0: float
    slope: float

    @property
    def stability(self) -> str:
        return "attractive" if self.slope < 0 else "repulsive"


@dataclass(frozen=True)
class SaddleClassification:
    """Saddle-node point of ``f(phi, theta)`` with its local expansion.

    Near the point ``f ~ b (theta - theta0) + a (phi - phi0)**2``.  The slip
    it triggers points along ``sign(a)``: once the attractive and repulsive
    roots merge, ``f`` keeps the sign of its curvature around ``phi0``.
    ``kind`` says whether the roots annihilate (a slip happens) or are
    created when time runs forward at the record's ``omega``.
    """

    t0: float
    theta0: float
    phi0: float
    a: float
    b: float
    kind: str

    @property
    def slip_direction(self) -> str:
        if abs(self.a) < MARGINAL_A:
            return "marginal"
        return "positive" if self.a > 0 else "negative"


@dataclass(frozen=True)
class WindingResult:
    chi: float
    method: str
    cycles_used: int
    convergence_estimate: float
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------- integration

def _output_grid(p, t0, t1, dt_out):
    if dt_out is None:
        if p.omega != 0.0:
            dt_out = (TWO_PI / 4096) / abs(p.omega)
        else:
            dt_out = (t1 - t0) / 2000
    n = max(int(math.ceil((t1 - t0) / dt_out)), 1)
    return np.linspace(t0, t1, n + 1)


def integrate(p: ModelParams, phi_init: float, t_span, tol: float = DEFAULT_RTOL,
              *, theta0: float = 0.0, dt_out: Optional[float] = None,
              t_eval=None) -> Trajectory:
    """Integrate ``dphi/dt = force(phi, theta0 + omega (t - t0))``.

    Uses the embedded Dormand-Prince 8(5,3) pair with ``rtol = atol = tol``.
    Samples are returned every ``dt_out`` (default: 4096 per modulation
    cycle, or 2001 samples for a static field).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    om = p.omega

    def rhs(t, y):
        return [force_scalar(p, y[0], theta0 + om * (t - t0))]

    if t_eval is None:
        t_eval = _output_grid(p, t0, t1, dt_out)
    sol = solve_ivp(rhs, (t0, t1), [float(phi_init)], method="DOP853",
                    rtol=tol, atol=tol, t_eval=t_eval)
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(f"integration failed at t={t_fail:.6g}: {sol.message}",
                               t_fail=t_fail)
    t = sol.t
    theta = theta0 + om * (t - t0)
    phi = sol.y[0]
    slips = [_annotate_onset(p, ev, t, theta, phi) for ev in detect_slips(t, theta, phi)]
    return Trajectory(t=t, phi=phi, theta=theta, params=p, slips=slips)


def _annotate_onset(p, ev, t, theta, phi):
    i = int(np.searchsorted(t, ev.t))
    while i > 0 and math.isnan(stable_root_near(p, phi[i], theta[i])):
        i -= 1
    return SlipEvent(t=ev.t, theta=ev.theta, jump=ev.jump, theta_onset=float(theta[i]))


def integrate_marks(p: ModelParams, phi_init: float, t_marks, tol: float = DEFAULT_RTOL,
                    theta0: float = 0.0, max_restarts: int = 1000) -> np.ndarray:
    """Phase at the given times only (no dense output).

    Same Dormand-Prince 8(5,3) scheme as :func:`integrate`, but the compiled
    Hairer implementation, which is several times faster for long sweeps.
    Its stiffness heuristic fires on slow adiabatic tracking; we restart the
    integrator from the current state when that happens.
    """
    om = p.omega
    t_marks = np.asarray(t_marks, dtype=float)
    t_start = t_marks[0]
    solver = ode(lambda t, y: force_scalar(p, y[0], theta0 + om * (t - t_start)))
    solver.set_integrator("dop853", rtol=tol, atol=tol, nsteps=10 ** 6)
    solver.set_initial_value([float(phi_init)], t_start)
    out = np.empty(len(t_marks))
    out[0] = phi_init
    restarts = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for i, tm in enumerate(t_marks[1:], start=1):
            while True:
                y = solver.integrate(tm)
                if solver.successful():
                    break
                restarts += 1
                if restarts > max_restarts or solver.t <= t_start:
                    raise IntegrationError(f"integration failed at t={solver.t:.6g}",
                                           t_fail=float(solver.t))
                solver.set_initial_value(solver.y, solver.t)
            out[i] = y[0]
    return out


def detect_slips(t, theta, phi, jump: float = SLIP_JUMP,
                 window: float = SLIP_WINDOW) -> list:
    """Locate discontinuous phase jumps (|dphi| > jump within a theta window)."""
    s = np.abs(np.asarray(theta) - theta[0])
    phi = np.asarray(phi)
    n = len(s)
    if n < 2:
        return []
    j = np.searchsorted(s, s + window, side="right") - 1
    j = np.clip(j, 0, n - 1)
    flagged = np.abs(phi[j] - phi) > jump
    events = []
    i = 0
    while i < n:
        if not flagged[i]:
            i += 1
            continue
        start = i
        end = j[i]
        while i < n and flagged[i]:
            end = max(end, j[i])
            i += 1
        seg = np.abs(np.diff(phi[start:end + 1]))
        m = start + int(np.argmax(seg)) if seg.size else start
        events.append(SlipEvent(t=float(t[m]), theta=float(theta[m]),
                                jump=float(phi[end] - phi[start])))
        i = max(i, end + 1)
    return events


# ---------------------------------------------------------------- fixed points

def _wrap(x):
    return x % TWO_PI


def find_fixed_points(p: ModelParams, theta: float, n_grid: int = 4096,
                      xtol: float = 1e-12) -> list:
    """All roots of ``force(., theta)`` in [0, 2pi), sorted by phase."""
    x = np.linspace(0.0, TWO_PI, n_grid + 1)
    f = force(p, x, theta)
    roots = []
    for i in range(n_grid):
        fa, fb = f[i], f[i + 1]
        if fa == 0.0:
            roots.append(x[i])
        elif fa * fb < 0.0:
            roots.append(brentq(lambda y: force_scalar(p, y, theta), x[i], x[i + 1],
                                xtol=xtol, rtol=4 * np.finfo(float).eps))
    out = []
    for root in roots:
        root = _wrap(root)
        if root > TWO_PI - 1e-12:
            root = 0.0
        if any(abs(_angle_diff(root, q.phi0)) < 1e-9 for q in out):
            continue
        out.append(FixedPoint(phi0=float(root), slope=float(force_dphi(p, root, theta))))
    return sorted(out, key=lambda q: q.phi0)


def initial_phase(p: ModelParams, theta: float = 0.0) -> float:
    """Attractive fixed point with the smallest phase >= 0 (0 if none exist)."""
    for fp in find_fixed_points(p, theta):
        if fp.stability == "attractive":
            return fp.phi0
    return 0.0


def _angle_diff(a, b):
    return (np.asarray(a) - b + math.pi) % TWO_PI - math.pi


def time_between(p: ModelParams, theta: float, phi_i: float, phi_f: float,
                 root_tol: float = 1e-8) -> float:
    """Time of flight ``int dphi / f`` in a frozen field (static ``theta``)."""
    if phi_i == phi_f:
        return 0.0
    lo, hi = min(phi_i, phi_f), max(phi_i, phi_f)
    for end in (phi_i, phi_f):
        f_end = force_scalar(p, end, theta)
        if abs(f_end) < root_tol * max(1.0, abs(force_dphi(p, end, theta))):
            raise DivergenceError(f"force vanishes at endpoint phi={end:.12g}; "
                                  "the time of flight diverges")
    n = max(64, int(math.ceil((hi - lo) / 1e-3)))
    grid = np.linspace(lo, hi, n + 1)
    fg = force(p, grid, theta)
    if np.any(fg[:-1] * fg[1:] <= 0.0):
        raise RootInIntervalError(f"force has a root between {lo:.12g} and {hi:.12g}")
    val, _err = quad(lambda y: 1.0 / force_scalar(p, y, theta), phi_i, phi_f,
                     epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


# ---------------------------------------------------------------- saddles

class _ModelField:
    def __init__(self, p):
        self.p = p

    def f(self, phi, th):
        return force_scalar(self.p, phi, th)

    def derivs(self, phi, th):
        p = self.p
        s1, c1 = math.sin(phi - th), math.cos(phi - th)
        s2, c2 = math.sin(2 * phi), math.cos(2 * phi)
        f_phi = -p.a1 * c1 - 4 * p.a2 * c2
        f_th = p.a1 * c1
        f_pp = p.a1 * s1 + 8 * p.a2 * s2
        f_pt = -p.a1 * s1
        return f_phi, f_th, f_pp, f_pt


class _CallableField:
    def __init__(self, fn, h=1e-4):
        self.fn = fn
        self.h = h

    def f(self, phi, th):
        return float(self.fn(phi, th))

    def derivs(self, phi, th):
        h, fn = self.h, self.fn
        f0 = fn(phi, th)
        fpp_ = fn(phi + h, th)
        fmp_ = fn(phi - h, th)
        f_phi = (fpp_ - fmp_) / (2 * h)
        f_th = (fn(phi, th + h) - fn(phi, th - h)) / (2 * h)
        f_pp = (fpp_ - 2 * f0 + fmp_) / h ** 2
        f_pt = (fn(phi + h, th + h) - fn(phi + h, th - h)
                - fn(phi - h, th + h) + fn(phi - h, th - h)) / (4 * h * h)
        return f_phi, f_th, f_pp, f_pt


def _newton_saddle(fld, phi, th, max_iter=60, tol=1e-13):
    for _ in range(max_iter):
        f = fld.f(phi, th)
        f_phi, f_th, f_pp, f_pt = fld.derivs(phi, th)
        jac = np.array([[f_phi, f_th], [f_pp, f_pt]])
        rhs = np.array([f, f_phi])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        step_norm = float(np.hypot(*step))
        if step_norm > 1.0:
            step *= 1.0 / step_norm
        phi -= step[0]
        th -= step[1]
        if step_norm < tol:
            return phi, th
    f = fld.f(phi, th)
    f_phi = fld.derivs(phi, th)[0]
    if abs(f) < 1e-10 and abs(f_phi) < 1e-8:
        return phi, th
    return None


def _fit_expansion(fld, phi0, th0, h_phi=2e-2, h_th=2e-2):
    """Least-squares fit of f to the saddle-node normal form on a local stencil."""
    d = np.linspace(-1.0, 1.0, 7)
    dp, dt = np.meshgrid(d * h_phi, d * h_th)
    dp, dt = dp.ravel(), dt.ravel()
    f = np.array([fld.f(phi0 + x, th0 + y) for x, y in zip(dp, dt)])
    design = np.column_stack([dt, dp ** 2, dt * dp, dt ** 2, dp ** 3, dp ** 2 * dt])
    coef, *_ = np.linalg.lstsq(design, f, rcond=None)
    return float(coef[1]), float(coef[0])


def classify_saddle(p: ModelParams, guess: PhasePoint,
                    field: Optional[Callable] = None,
                    radius: float = 0.5) -> SaddleClassification:
    """Locate a saddle-node point near ``guess`` and classify its slip.

    ``field`` overrides the model force with any callable ``f(phi, theta)``
    (derivatives are then taken by finite differences).
    """
    fld = _ModelField(p) if field is None else _CallableField(field)
    found = _newton_saddle(fld, float(guess.phi), float(guess.theta))
    if found is None:
        raise NoSaddleError(f"no saddle-node point near phi={guess.phi:.4g}, "
                            f"theta={guess.theta:.4g}")
    phi0, th0 = found
    dist = math.hypot(_angle_diff(phi0, guess.phi), _angle_diff(th0, guess.theta))
    if dist > radius:
        raise NoSaddleError(f"Newton left the search radius ({dist:.3g} > {radius})")
    a, b = _fit_expansion(fld, phi0, th0)
    phi0 = float(_wrap(phi0))
    om = p.omega
    if om > 0:
        th0 = float(_wrap(th0))
    elif om < 0:
        th0 = float(_wrap(th0) - TWO_PI) if _wrap(th0) > 0 else 0.0
    else:
        th0 = float(_wrap(th0))
    if om == 0.0:
        kind, t0 = "static", math.nan
    else:
        # roots exist before t0 and vanish after it when b_t * a > 0
        kind = "annihilation" if (om * b) * a > 0 else "creation"
        t0 = th0 / om
    return SaddleClassification(t0=t0, theta0=th0, phi0=phi0, a=a, b=b, kind=kind)


def find_saddles(p: ModelParams, n_grid: int = 128,
                 field: Optional[Callable] = None) -> list:
    """Scan the (phi, theta) torus for all saddle-node points."""
    g = np.linspace(0.0, TWO_PI, n_grid, endpoint=False)
    ph, th = np.meshgrid(g, g, indexing="ij")
    if field is None:
        f, fp = force(p, ph, th), force_dphi(p, ph, th)
    else:
        h = 1e-5
        fv = np.vectorize(field)
        f = fv(ph, th)
        fp = (fv(ph + h, th) - fv(ph - h, th)) / (2 * h)
    scale = max(np.max(np.abs(f)), 1e-300)
    score = (f / scale) ** 2 + (fp / scale) ** 2
    # local minima of the score on the periodic grid
    is_min = np.ones_like(score, dtype=bool)
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            if sx or sy:
                is_min &= score <= np.roll(np.roll(score, sx, 0), sy, 1)
    out = []
    for i, j in zip(*np.nonzero(is_min)):
        if score[i, j] > 0.05:
            continue
        try:
            sc = classify_saddle(p, PhasePoint(ph[i, j], th[i, j]), field=field,
                                 radius=4 * TWO_PI / n_grid + 0.2)
        except NoSaddleError:
            continue
        if any(abs(_angle_diff(sc.phi0, o.phi0)) < 1e-6
               and abs(_angle_diff(sc.theta0, o.theta0)) < 1e-6 for o in out):
            continue
        out.append(sc)
    return sorted(out, key=lambda s: (_wrap(s.theta0), s.phi0))


# ---------------------------------------------------------------- winding

def winding(p: ModelParams, settle_cycles: int = 1, measure_cycles: int = 1,
            tol: float = DEFAULT_RTOL) -> WindingResult:
    """Classical winding number ``[phi(end) - phi(start)] / (2 pi cycles)``."""
    if p.omega == 0.0:
        raise ValueError("winding requires omega != 0")
    if measure_cycles < 1:
        raise ValueError("measure_cycles must be >= 1")
    period = TWO_PI / abs(p.omega)
    phi0 = initial_phase(p, 0.0)
    n_cyc = settle_cycles + measure_cycles
    phi = integrate_marks(p, phi0, np.arange(n_cyc + 1) * period, tol)
    start = phi[settle_cycles]
    chi = (phi[-1] - start) / (TWO_PI * measure_cycles)
    if measure_cycles > 1:
        prev = (phi[-2] - start) / (TWO_PI * (measure_cycles - 1))
        conv = abs(chi - prev)
    elif settle_cycles >= 1:
        conv = abs(chi - (phi[settle_cycles] - phi[settle_cycles - 1]) / TWO_PI)
    else:
        conv = math.nan
    return WindingResult(chi=float(chi), method="classical", cycles_used=n_cyc,
                         convergence_estimate=float(conv),
                         meta={"phi_init": phi0, "settle_cycles": settle_cycles})


# ---------------------------------------------------------------- hysteresis

def stable_root_near(p: ModelParams, phi: float, theta: float,
                     max_iter: int = 50) -> float:
    """Polish ``phi`` onto the attractive root of ``force(., theta)`` it tracks.

    Returns nan when Newton does not settle on an attractive root within
    ``TRACKING_TOL`` of the starting phase.
    """
    x = phi
    for _ in range(max_iter):
        fp = force_dphi(p, x, theta)
        if fp >= 0:
            return math.nan
        dx = force_scalar(p, x, theta) / fp
        x -= dx
        if abs(dx) < 1e-14:
            break
    if abs(x - phi) > TRACKING_TOL or force_dphi(p, x, theta) >= 0:
        return math.nan
    return x


class HysteresisPair(NamedTuple):
    forward: Trajectory
    backward: Trajectory

    @property
    def slip_theta_fwd(self) -> list:
        return [float(_wrap(s.theta)) for s in self.forward.slips]

    @property
    def slip_theta_bwd(self) -> list:
        return [float(_wrap(s.theta)) for s in self.backward.slips]

    def slip_gap(self) -> float:
        """Smallest circular distance between forward and backward slip angles."""
        f, b = self.slip_theta_fwd, self.slip_theta_bwd
        if not f or not b:
            return math.nan
        return float(min(abs(_angle_diff(x, y)) for x in f for y in b))

    def net_displacement(self) -> float:
        """Phase change after the forward sweep followed by the backward one."""
        return float(self.backward.phi[-1] - self.forward.phi[0])

    def _at_forward_thetas(self):
        fw, bw = self.forward, self.backward
        th = _wrap(fw.theta)
        # backward samples run theta downwards; reverse for interpolation and
        # map onto the forward cycle [0, 2pi]
        bth = bw.theta[::-1]
        if bth[0] < -1e-9:
            bth = bth + TWO_PI
        bphi = bw.phi[::-1]
        return th, fw.phi, np.interp(fw.theta, bth, bphi)

    def raw_difference(self) -> float:
        """Max |phi_fwd(theta) - phi_bwd(theta)| modulo 2pi, lag included."""
        _, pf, pb = self._at_forward_thetas()
        return float(np.max(np.abs(_angle_diff(pf, pb))))

    def branch_difference(self) -> float:
        """Max distance between the attractive branches tracked in each sweep.

        Each sample is polished onto the stable root it follows, which removes
        the O(omega) adiabatic lag; samples caught mid-slip are skipped.
        """
        p = self.forward.params
        th, pf, pb = self._at_forward_thetas()
        worst = 0.0
        for t, a, b in zip(self.forward.theta, pf, pb):
            ra = stable_root_near(p, a, t)
            rb = stable_root_near(p, b, t)
            if math.isnan(ra) or math.isnan(rb):
                continue
            worst = max(worst, abs(float(_angle_diff(ra, rb))))
        return worst


def hysteresis_pair(p: ModelParams, tol: float = DEFAULT_RTOL,
                    dt_out: Optional[float] = None,
                    chained: bool = True) -> HysteresisPair:
    """One forward sweep over a cycle and one backward sweep.

    The forward run starts on the attractive fixed point at theta = 0.  With
    ``chained`` (default) the backward run, ``theta = 2pi - |omega| t``,
    starts where the forward run ended, so the pair exposes non-reciprocity
    as the net displacement.  Otherwise it starts from the same fixed point
    and sweeps ``theta = -|omega| t``.  At zero detuning the two choices
    differ by a lattice translation only.
    """
    om = abs(p.omega) if p.omega != 0.0 else DEFAULT_OMEGA
    fwd_p = p.replace(omega=om)
    bwd_p = p.replace(omega=-om)
    period = TWO_PI / om
    phi0 = initial_phase(fwd_p, 0.0)
    fwd = integrate(fwd_p, phi0, (0.0, period), tol, dt_out=dt_out)
    if chained:
        bwd = integrate(bwd_p, fwd.phi[-1], (0.0, period), tol, theta0=TWO_PI,
                        dt_out=dt_out)
    else:
        bwd = integrate(bwd_p, phi0, (0.0, period), tol, theta0=0.0, dt_out=dt_out)
    return HysteresisPair(fwd, bwd)
