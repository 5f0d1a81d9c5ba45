"""Floquet states of the modulated rotor in Sambe space.

With ``psi(t) = e^{-i eps t} sum_q e^{-i q omega t} |chi_q>`` the Floquet
problem becomes the static eigenproblem of the real symmetric matrix

    <k,q|M|k,q>         = k^2/(2 m_e) - q omega
    <k+-1,q+-1|M|k,q>   = -mu r / 2
    <k+-2,q|M|k,q>      = -mu (1 - r) / 4

on |k| <= k_max, |q| <= q_max.  Each physical state appears as a family of
replicas: shifting q -> q + 1 maps an eigenvector to another one with
eps - omega.  The cycle-averaged energy ``<H> = eps + omega <q>`` and the
momentum ``<k>`` are the same on every replica and label the family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .adiabatic import PumpCurve, cycle_average_ground_energy
from .classical import WindingResult, find_fixed_points
from .errors import EdgeLeakageError
from .hamiltonian import MomentumBasis, build_hamiltonian, velocity_matrix, wavefunction_on_grid
from .model import ModelParams

TWO_PI = 2.0 * math.pi
EDGE_TOL = 1e-8
DEFAULT_K_MAX = 24
Q_CAP = 4096


@dataclass(frozen=True)
class SambeBasis:
    k_max: int
    q_max: int

    def __post_init__(self):
        if self.k_max < 2:
            raise ValueError("k_max must be >= 2")
        if self.q_max < 1:
            raise ValueError("q_max must be >= 1")

    @property
    def nk(self) -> int:
        return 2 * self.k_max + 1

    @property
    def nq(self) -> int:
        return 2 * self.q_max + 1

    @property
    def dim(self) -> int:
        return self.nk * self.nq

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    @property
    def qs(self) -> np.ndarray:
        return np.arange(-self.q_max, self.q_max + 1)

    def index(self, k: int, q: int) -> int:
        # q-major ordering keeps the bandwidth at 2 k_max + 2
        return (q + self.q_max) * self.nk + (k + self.k_max)


@dataclass
class SambeMatrix:
    basis: SambeBasis
    matrix: sp.csc_matrix
    params: ModelParams


@dataclass
class FloquetState:
    """One Floquet eigenvector; ``components[q + q_max, k + k_max] = <k|chi_q>``."""

    epsilon: float
    components: np.ndarray
    basis: SambeBasis
    params: ModelParams
    meta: dict = field(default_factory=dict)

    @property
    def vector(self) -> np.ndarray:
        return self.components.ravel()

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.components) ** 2

    @property
    def q_mean(self) -> float:
        return float(self.basis.qs @ self.weights.sum(axis=1))

    @property
    def q2(self) -> float:
        return float(self.basis.qs ** 2 @ self.weights.sum(axis=1))

    @property
    def k_mean(self) -> float:
        return float(self.basis.ks @ self.weights.sum(axis=0))

    @property
    def k2(self) -> float:
        return float(self.basis.ks ** 2 @ self.weights.sum(axis=0))

    @property
    def average_energy(self) -> float:
        """Cycle-averaged <H> from the harmonic weights: eps + omega <q>."""
        return self.epsilon + self.params.omega * self.q_mean

    @property
    def k_edge(self) -> float:
        w = self.weights.sum(axis=0)
        return float(max(w[0], w[-1]))

    @property
    def q_edge(self) -> float:
        w = self.weights.sum(axis=1)
        return float(max(w[0], w[-1]))

    def max_imag(self) -> float:
        return float(np.max(np.abs(np.imag(self.components))))

    def at_theta(self, theta) -> np.ndarray:
        """Momentum-space ``|chi(theta)> = sum_q e^{-i q theta} |chi_q>``.

        Accepts a scalar or an array of angles (rows of the result).
        """
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        ph = np.exp(-1j * np.outer(th, self.basis.qs))
        out = ph @ self.components
        return out[0] if np.ndim(theta) == 0 else out

    def shifted(self, n: int) -> "FloquetState":
        """Replica with components moved q -> q + n (quasi-energy eps - n omega).

        Weight pushed past the cutoff is dropped; the result is exact only for
        states well inside the q window.
        """
        c = np.zeros_like(self.components)
        if n >= 0:
            c[n:] = self.components[:self.basis.nq - n]
        else:
            c[:n] = self.components[-n:]
        return FloquetState(epsilon=self.epsilon - n * self.params.omega, components=c,
                            basis=self.basis, params=self.params, meta=dict(self.meta))


@dataclass(frozen=True)
class PtCheckResult:
    lam: complex
    residual: float


# ------------------------------------------------------------------ matrix

def build_sambe_matrix(p: ModelParams, basis: SambeBasis) -> SambeMatrix:
    nk, nq = basis.nk, basis.nq
    K = basis.k_max
    kk = np.tile(basis.ks, nq)
    qq = np.repeat(basis.qs, nk)
    n = basis.dim
    idx = np.arange(n)
    diag = kk.astype(float) ** 2 / (2.0 * p.m_e) - qq * p.omega
    rows, cols, vals = [idx], [idx], [diag]
    # (k,q) <-> (k+1,q+1): the e^{i phi} e^{-i omega t} half of cos(phi - omega t)
    m = (kk < K) & (qq < basis.q_max)
    a = idx[m]
    b = a + nk + 1
    c1 = np.full(a.size, -0.5 * p.a1)
    # (k,q) <-> (k+2,q)
    m2 = kk < K - 1
    a2 = idx[m2]
    b2 = a2 + 2
    c2 = np.full(a2.size, -0.5 * p.a2)
    rows += [a, b, a2, b2]
    cols += [b, a, b2, a2]
    vals += [c1, c1, c2, c2]
    mat = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n))
    return SambeMatrix(basis=basis, matrix=mat, params=p)


# ------------------------------------------------------------------ selection

def _make_state(sm: SambeMatrix, eps: float, vec: np.ndarray) -> FloquetState:
    b = sm.basis
    vec = np.real_if_close(vec)
    i = int(np.argmax(np.abs(vec)))
    vec = vec / np.linalg.norm(vec)
    if vec[i] < 0:
        vec = -vec
    return FloquetState(epsilon=float(eps), components=vec.reshape(b.nq, b.nk),
                        basis=b, params=sm.params)


LOOSE_TOL = 1e-4


def _eigs_near(sm: SambeMatrix, sigma: float, nev: int):
    nev = min(nev, sm.basis.dim - 2)
    # fixed Lanczos start vector: ARPACK's own seed advances per process,
    # which would make results depend on call history
    v0 = np.random.default_rng(0).standard_normal(sm.basis.dim)
    w, v = eigsh(sm.matrix, k=nev, sigma=sigma, which="LM", v0=v0)
    order = np.argsort(w)
    return w[order], v[:, order]


def _eigs_window(sm: SambeMatrix, sigma: float, nev: int):
    # every family has one replica per omega-wide window of quasi-energy, so
    # widen the request until the returned spectrum spans at least omega
    om = abs(sm.params.omega)
    while True:
        w, v = _eigs_near(sm, sigma, nev)
        if om == 0.0 or w[-1] - w[0] >= om or nev >= sm.basis.dim - 2:
            return w, v
        nev *= 2


def _representative(sm: SambeMatrix, cand: FloquetState) -> FloquetState:
    n = int(round(cand.q_mean))
    target = cand.shifted(-n)
    w, v = _eigs_near(sm, target.epsilon, 6)
    ov = np.abs(v.T @ target.vector)
    j = int(np.argmax(ov))
    rep = _make_state(sm, w[j], v[:, j])
    # a replica sitting exactly between two q values: keep the smaller |eps|
    if abs(abs(rep.q_mean) - 0.5) < 1e-9:
        alt = rep.shifted(1 if rep.q_mean > 0 else -1)
        if abs(alt.epsilon) < abs(rep.epsilon):
            w, v = _eigs_near(sm, alt.epsilon, 6)
            j = int(np.argmax(np.abs(v.T @ alt.vector)))
            rep = _make_state(sm, w[j], v[:, j])
    rep.meta.update(overlap=float(ov.max()))
    return rep


def solve_floquet(sm: SambeMatrix, n_states: int = 1, sigma: Optional[float] = None,
                  nev: int = 24, edge_tol: float = EDGE_TOL) -> list:
    """Physical representatives of the ``n_states`` lowest-<H> Floquet families.

    A partial shift-invert spectrum is taken around ``sigma`` (default: the
    cycle-averaged instantaneous ground energy, a lower bound on <H> for every
    physical family).  Candidates with <H> below that bound are truncation
    artefacts.  Replicas of one family are merged by their overlap after
    shifting to <q> ~ 0, and within a family the replica minimizing <q^2>
    (|<q>| <= 1/2) is re-solved and returned.

    Raises EdgeLeakageError when a selected state has more than ``edge_tol``
    weight on the k or q boundary, or when a leaking candidate could hide a
    lower family (``axis`` tells which cutoff to enlarge).
    """
    p = sm.params
    b = sm.basis
    om = abs(p.omega)
    if sigma is None:
        sigma = cycle_average_ground_energy(p, MomentumBasis(b.k_max), 512)
    floor = sigma - 0.25 * om if om > 0 else sigma - 1e-9
    w, v = _eigs_window(sm, sigma, nev)
    cands = sorted((_make_state(sm, w[j], v[:, j]) for j in range(len(w))),
                   key=lambda s: s.average_energy)
    cands = [c for c in cands if c.average_energy >= floor]
    families = []  # (candidate, shifted vector)
    for c in cands:
        leak = max(c.q_edge, c.k_edge)
        if leak >= LOOSE_TOL:
            if len(families) < n_states:
                axis = "q" if c.q_edge >= c.k_edge else "k"
                raise EdgeLeakageError(f"leaking candidate (edge weight {leak:.3g}) with "
                                       f"<H>={c.average_energy:.6g} could hide a lower "
                                       "family", axis=axis, weight=leak)
            continue
        sv = c.shifted(-int(round(c.q_mean))).vector
        if any(abs(np.dot(sv, f[1])) > 0.5 for f in families):
            continue
        families.append((c, sv))
        if len(families) == n_states:
            break
    if len(families) < n_states:
        raise EdgeLeakageError(f"only {len(families)} clean Floquet families near "
                               f"sigma={sigma:.6g}; enlarge the q cutoff", axis="q",
                               weight=1.0)
    reps = []
    for c, _ in families:
        rep = _representative(sm, c)
        if rep.k_edge >= edge_tol:
            raise EdgeLeakageError(f"k-edge weight {rep.k_edge:.3g} >= {edge_tol:g}",
                                   axis="k", weight=rep.k_edge)
        if rep.q_edge >= edge_tol:
            raise EdgeLeakageError(f"q-edge weight {rep.q_edge:.3g} >= {edge_tol:g}",
                                   axis="q", weight=rep.q_edge)
        rep.meta.update(k_max=b.k_max, q_max=b.q_max, sigma=sigma)
        reps.append(rep)
    return sorted(reps, key=lambda s: s.average_energy)


def default_q_max(omega: float) -> int:
    """Starting harmonic cutoff: 64 at omega = 1e-3, scaled as 1/omega."""
    if omega == 0.0:
        return 1
    return int(max(16, math.ceil(0.064 / abs(omega))))


def floquet_states(p: ModelParams, n_states: int = 1, k_max: int = DEFAULT_K_MAX,
                   q_max: Optional[int] = None, q_cap: int = Q_CAP) -> list:
    """Build, solve and select, doubling ``q_max`` until the q edge is clean."""
    q = default_q_max(p.omega) if q_max is None else q_max
    sigma = cycle_average_ground_energy(p, MomentumBasis(k_max), 512)
    while True:
        sm = build_sambe_matrix(p, SambeBasis(k_max, q))
        try:
            return solve_floquet(sm, n_states, sigma=sigma)
        except EdgeLeakageError as exc:
            if exc.axis != "q" or 2 * q > q_cap:
                raise
            q *= 2


# ------------------------------------------------------------------ observables

def floquet_winding(state: FloquetState, p: Optional[ModelParams] = None) -> WindingResult:
    """Phase advance per cycle / 2 pi = <v> T / 2 pi with T = 2 pi / |omega|."""
    p = state.params if p is None else p
    if p.omega == 0.0:
        raise ValueError("winding requires omega != 0")
    v = state.k_mean / p.m_e
    chi = v / abs(p.omega)
    return WindingResult(chi=float(chi), method="floquet", cycles_used=1,
                         convergence_estimate=float(max(state.k_edge, state.q_edge)),
                         meta={"epsilon": state.epsilon, "k_max": state.basis.k_max,
                               "q_max": state.basis.q_max})


def average_energy_direct(state: FloquetState) -> float:
    """Cycle average of <chi(theta)|H(theta)|chi(theta)> on an exact theta grid."""
    b = state.basis
    n = 4 * b.q_max + 4
    thetas = TWO_PI * np.arange(n) / n
    chis = state.at_theta(thetas)
    mb = MomentumBasis(b.k_max)
    tot = 0.0
    for th, c in zip(thetas, chis):
        h = build_hamiltonian(state.params, th, mb).entries
        tot += np.real(np.vdot(c, h @ c))
    return float(tot / n)


def winding_vs_omega(p: ModelParams, omega_list: Sequence[float],
                     k_max: int = DEFAULT_K_MAX) -> list:
    """chi(omega) table; failing points carry an ``error`` entry instead."""
    rows = []
    for om in omega_list:
        q = p.replace(omega=float(om))
        row = {"omega": float(om)}
        try:
            st = floquet_states(q, 1, k_max=k_max)[0]
            w = floquet_winding(st)
            row.update(chi=w.chi, epsilon=st.epsilon, average_energy=st.average_energy,
                       k_edge=st.k_edge, q_edge=st.q_edge, k_max=st.basis.k_max,
                       q_max=st.basis.q_max, error="")
        except EdgeLeakageError as exc:
            row.update(chi=math.nan, error=str(exc))
        rows.append(row)
    return rows


# ------------------------------------------------------------------ PT

def pt_check(state) -> PtCheckResult:
    """PT in component space is complex conjugation: find |lam| = 1 minimizing
    ||c* - lam c||.  A vector e^{ia} x with x real gives lam = e^{-2ia}."""
    c = state.vector if isinstance(state, FloquetState) else np.asarray(state).ravel()
    c = c / np.linalg.norm(c)
    s = np.sum(np.conj(c) ** 2)
    lam = s / abs(s) if abs(s) > 0 else 1.0 + 0j
    res = float(np.linalg.norm(np.conj(c) - lam * c))
    return PtCheckResult(lam=complex(lam), residual=res)


def fix_global_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate by the square root of the PT eigenvalue so the vector is real,
    then make the largest component positive."""
    vec = np.asarray(vec, dtype=complex)
    lam = pt_check(vec).lam
    out = vec * np.sqrt(lam)
    i = int(np.argmax(np.abs(out)))
    if out[i].real < 0:
        out = -out
    return out


# ------------------------------------------------------------------ superposition

def superposition_trajectory(states: Sequence[FloquetState], weights: Sequence[complex],
                             p: ModelParams, direction: Optional[str] = None,
                             n_cycles: float = 1.0,
                             samples_per_cycle: int = 512) -> PumpCurve:
    """Expected phase ``int <psi(t)|v|psi(t)> dt`` for a Floquet superposition.

    ``psi(t) = sum_n c_n e^{-i eps_n t} |chi_n(omega t)>`` with the states'
    own omega; ``direction`` only asserts the sweep sign.
    """
    if direction is not None and direction != p.direction:
        raise ValueError(f"direction {direction!r} disagrees with omega={p.omega}")
    if len(states) != len(weights):
        raise ValueError("one weight per state")
    c = np.asarray(weights, dtype=complex)
    c = c / np.linalg.norm(c)
    om = p.omega
    period = TWO_PI / abs(om)
    n = int(round(samples_per_cycle * n_cycles))
    t = np.linspace(0.0, n_cycles * period, n + 1)
    theta = om * t
    ks = states[0].basis.ks / p.m_e
    psi = np.zeros((len(t), states[0].basis.nk), dtype=complex)
    for cn, st in zip(c, states):
        if cn == 0:
            continue
        psi += (cn * np.exp(-1j * st.epsilon * t))[:, None] * st.at_theta(theta)
    vel = (np.abs(psi) ** 2) @ ks
    phase = np.concatenate([[0.0], np.cumsum(0.5 * (vel[1:] + vel[:-1]) * np.diff(t))])
    return PumpCurve(theta=theta, phase=phase, chi=float(phase[-1] / (TWO_PI * n_cycles)),
                     meta={"t": t, "velocity": vel, "weights": c.tolist()})


def well_probability(vec_k: np.ndarray, center: float, half_width: float = math.pi / 2,
                     grid: int = 512) -> float:
    """Probability of |phi - center| < half_width for a momentum-space state."""
    psi = wavefunction_on_grid(vec_k, grid)
    phi = TWO_PI * np.arange(grid) / grid
    d = np.abs((phi - center + math.pi) % TWO_PI - math.pi)
    w = np.abs(psi) ** 2
    return float(np.sum(w[d < half_width]) / np.sum(w))


def localizing_phase(states: Sequence[FloquetState], p: ModelParams,
                     n_beta: int = 64) -> tuple:
    """Relative phase beta making (|0> + e^{i beta}|1>)/sqrt 2 most localized in
    one potential well at theta = 0.  Returns (beta, well phase, probability)."""
    wells = [fp.phi0 for fp in find_fixed_points(p.replace(delta=0.0), 0.0)
             if fp.stability == "attractive"]
    a, b = states[0].at_theta(0.0), states[1].at_theta(0.0)
    best = (0.0, wells[0] if wells else 0.0, -1.0)
    for beta in TWO_PI * np.arange(n_beta) / n_beta:
        v = (a + np.exp(1j * beta) * b) / math.sqrt(2.0)
        for wc in wells:
            pr = well_probability(v, wc)
            if pr > best[2] + 1e-12:
                best = (float(beta), float(wc), pr)
    return best


def velocity_expectation(vec_k: np.ndarray, p: ModelParams) -> float:
    mb = MomentumBasis((len(vec_k) - 1) // 2)
    return float(np.real(np.vdot(vec_k, velocity_matrix(p, mb) @ vec_k)))


@dataclass
class SuperpositionHysteresis:
    r: float
    forward: PumpCurve
    backward: PumpCurve
    difference: np.ndarray  # backward minus retraced forward, on the forward grid
    delta_eps: float  # |eps_1 - eps_0| of the forward pair
    frequency: float  # mean angular frequency of the interference term
    meta: dict = field(default_factory=dict)

    @property
    def max_difference(self) -> float:
        return float(np.max(np.abs(self.difference)))

    @property
    def frequency_ratio(self) -> float:
        return self.frequency / self.delta_eps if self.delta_eps > 0 else math.inf


def interference_frequency(states: Sequence[FloquetState], p: ModelParams,
                           n_cycles: int = 40, samples_per_cycle: int = 512) -> float:
    """Mean angular frequency of the cross term of a two-state superposition.

    The velocity of ``c0 psi0 + c1 psi1`` contains
    ``2 Re[c0* c1 e^{i(eps0 - eps1) t} <chi0|v|chi1>(omega t)]``.  The complex
    amplitude is unwrapped and its phase fitted linearly in t; the slope
    magnitude is returned.
    """
    a_st, b_st = states[0], states[1]
    period = TWO_PI / abs(p.omega)
    n = n_cycles * samples_per_cycle
    t = np.arange(n) * (n_cycles * period / n)
    ks = a_st.basis.ks / p.m_e
    m = np.sum(np.conj(a_st.at_theta(p.omega * t)) * ks * b_st.at_theta(p.omega * t), axis=1)
    z = np.exp(1j * (a_st.epsilon - b_st.epsilon) * t) * m
    return float(abs(np.polyfit(t, np.unwrap(np.angle(z)), 1)[0]))


def hysteresis_superposition(r: float, m_e: float = 10.0, omega: float = 0.005,
                             mu: float = 1.0, k_max: int = DEFAULT_K_MAX,
                             samples_per_cycle: int = 2048,
                             n_cycles_freq: int = 40) -> SuperpositionHysteresis:
    """Forward and backward one-cycle trajectories of a well-localized
    superposition of the two lowest Floquet families.

    For each sweep direction the relative phase is chosen to localize the
    state in one well at theta = 0.  ``difference[j]`` compares the backward
    phase at theta = -s_j with the forward trajectory retraced from its end,
    ``phi_f(2pi - s_j) - phi_f(2pi)``; it vanishes for a reversible pump.
    """
    curves, pairs, betas = {}, {}, {}
    for sgn in (1.0, -1.0):
        p = ModelParams(r=r, mu=mu, m_e=m_e, omega=sgn * abs(omega))
        st = floquet_states(p, 2, k_max=k_max)
        beta, _, prob = localizing_phase(st, p)
        w = [1.0 / math.sqrt(2.0), np.exp(1j * beta) / math.sqrt(2.0)]
        curves[sgn] = superposition_trajectory(st, w, p, samples_per_cycle=samples_per_cycle)
        pairs[sgn], betas[sgn] = st, (beta, prob)
    fwd, bwd = curves[1.0], curves[-1.0]
    diff = bwd.phase - (fwd.phase[::-1] - fwd.phase[-1])
    st = pairs[1.0]
    p_f = ModelParams(r=r, mu=mu, m_e=m_e, omega=abs(omega))
    freq = interference_frequency(st, p_f, n_cycles=n_cycles_freq)
    meta = {"epsilon": [s.epsilon for s in st], "beta": betas[1.0][0],
            "well_probability": betas[1.0][1], "beta_backward": betas[-1.0][0]}
    return SuperpositionHysteresis(r=float(r), forward=fwd, backward=bwd, difference=diff,
                                   delta_eps=abs(st[1].epsilon - st[0].epsilon),
                                   frequency=freq, meta=meta)


def locate_hysteresis_r(candidates: Sequence[float] = (0.55, 0.6, 0.65),
                        min_difference: float = 0.5, **kw) -> SuperpositionHysteresis:
    """First candidate r whose forward/backward trajectories differ by more
    than ``min_difference`` rad somewhere along the cycle."""
    last = None
    for r in candidates:
        last = hysteresis_superposition(r, **kw)
        if last.max_difference > min_difference:
            return last
    raise ValueError(f"no candidate r in {list(candidates)} shows hysteresis "
                     f"(last max difference {last.max_difference if last else math.nan:.3g})")
