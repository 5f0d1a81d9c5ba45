"""Phase-particle Hamiltonian in the truncated momentum basis |k>, |k| <= k_max.

    H(theta) = k^2/(2 m_e) - A1 cos(phi - theta) - A2 cos(2 phi)

``e^{i phi}`` raises k by one, so the fundamental coupling puts
``-(A1/2) e^{-i theta}`` on ``<k+1|H|k>`` and the overtone puts ``-A2/2`` on
``<k+-2|H|k>``.  The detuning does not enter: a linear ``-phi delta`` term has
no periodic representation on the ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .model import ModelParams

DEGENERACY_TOL = 1e-10


@dataclass(frozen=True)
class MomentumBasis:
    k_max: int

    def __post_init__(self):
        if self.k_max < 2:
            raise ValueError(f"k_max must be >= 2, got {self.k_max}")

    @property
    def dim(self) -> int:
        return 2 * self.k_max + 1

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.k_max, self.k_max + 1)

    def index(self, k: int) -> int:
        if abs(k) > self.k_max:
            raise IndexError(f"|k|={abs(k)} exceeds k_max={self.k_max}")
        return k + self.k_max

    def basis_vector(self, k: int) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(k)] = 1.0
        return v


@dataclass(frozen=True)
class HamiltonianMatrix:
    basis: MomentumBasis
    entries: np.ndarray
    theta: float
    params: ModelParams

    def hermiticity_residual(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))


@dataclass
class EigenDecomposition:
    energies: np.ndarray
    vectors: np.ndarray  # columns
    theta: float
    basis: Optional[MomentumBasis] = None

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])

    def state(self, n: int) -> np.ndarray:
        return self.vectors[:, n]


def _band_entries(p: ModelParams, theta: float, k_max: int):
    ks = np.arange(-k_max, k_max + 1)
    diag = ks.astype(float) ** 2 / (2.0 * p.m_e)
    first = -0.5 * p.a1 * np.exp(-1j * theta)  # <k+1|H|k>
    second = -0.5 * p.a2  # <k+-2|H|k>
    return diag, first, second


def build_hamiltonian(p: ModelParams, theta: float, basis: MomentumBasis) -> HamiltonianMatrix:
    n = basis.dim
    diag, first, second = _band_entries(p, theta, basis.k_max)
    h = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    h[idx, idx] = diag
    h[idx[1:], idx[:-1]] = first
    h[idx[:-1], idx[1:]] = np.conj(first)
    h[idx[2:], idx[:-2]] = second
    h[idx[:-2], idx[2:]] = second
    return HamiltonianMatrix(basis=basis, entries=h, theta=float(theta), params=p)


def velocity_matrix(p: ModelParams, basis: MomentumBasis) -> np.ndarray:
    """``<k|v|k'> = (k/m_e) delta_kk'``."""
    return np.diag(basis.ks / p.m_e).astype(complex)


def shift_matrix(basis: MomentumBasis) -> np.ndarray:
    """Truncated ``e^{i phi}``: |k> -> |k+1>, with |k_max> sent to zero."""
    return np.eye(basis.dim, k=-1, dtype=complex)


def velocity_matrix_commutator(p: ModelParams, basis: MomentumBasis,
                               theta: float = 0.0) -> np.ndarray:
    """Velocity from ``(1/2)[e^{-i phi} H e^{i phi} - e^{i phi} H e^{-i phi}]``.

    The conjugations are carried out on a basis one level wider and then cut
    back to ``basis``, so the truncation never touches the returned block.
    """
    wide = MomentumBasis(basis.k_max + 1)
    h = build_hamiltonian(p, theta, wide).entries
    s = shift_matrix(wide)
    sd = s.conj().T
    full = 0.5 * (sd @ h @ s - s @ h @ sd)
    return full[1:-1, 1:-1]


def _pivot(v: np.ndarray) -> int:
    # first component within a relative 1e-9 of the largest magnitude, so
    # that ties from symmetric states are broken deterministically
    a = np.abs(v)
    return int(np.argmax(a >= a.max() * (1.0 - 1e-9)))


def _fix_phase(v: np.ndarray) -> np.ndarray:
    i = _pivot(v)
    v = v * (abs(v[i]) / v[i])
    v[i] = abs(v[i])
    return v


def eigensolve(h: HamiltonianMatrix, n_states: Optional[int] = None) -> EigenDecomposition:
    """Lowest ``n_states`` eigenpairs of a dense Hermitian ``H``.

    Each eigenvector's largest component is made real positive.  Degenerate
    clusters are rotated to diagonalize momentum inside the cluster and
    ordered by decreasing <k> (so +k comes before -k).  Non-convergence of
    LAPACK surfaces as ``scipy.linalg.LinAlgError``.
    """
    n = h.basis.dim
    if n_states is None:
        n_states = n
    if not 1 <= n_states <= n:
        raise ValueError(f"n_states must be in [1, {n}], got {n_states}")
    # request one extra level so a degenerate pair is never split at the edge
    hi = min(n_states, n - 1)
    w, v = linalg.eigh(h.entries, subset_by_index=[0, hi])
    ks = h.basis.ks.astype(float)
    scale = max(1.0, float(np.max(np.abs(w))))
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[i] < DEGENERACY_TOL * scale:
            j += 1
        if j - i > 1:
            block = v[:, i:j]
            kk = block.conj().T @ (ks[:, None] * block)
            kw, kv = np.linalg.eigh(kk)
            order = np.argsort(-kw, kind="stable")
            v[:, i:j] = block @ kv[:, order]
        i = j
    w, v = w[:n_states], v[:, :n_states]
    for c in range(v.shape[1]):
        v[:, c] = _fix_phase(v[:, c])
    return EigenDecomposition(energies=w, vectors=v, theta=h.theta, basis=h.basis)


def ground_state(p: ModelParams, theta: float, basis: MomentumBasis, n_states: int = 1):
    return eigensolve(build_hamiltonian(p, theta, basis), n_states)


def wavefunction_on_grid(vec, grid_size: int) -> np.ndarray:
    """``psi(phi_j) = sum_k c_k e^{i k phi_j} / sqrt(2 pi)`` on ``phi_j = 2 pi j / N``."""
    vec = np.asarray(vec, dtype=complex)
    k_max = (len(vec) - 1) // 2
    if len(vec) != 2 * k_max + 1:
        raise ValueError("coefficient vector must have odd length 2*k_max+1")
    if grid_size < 4 * k_max:
        raise ValueError(f"grid_size {grid_size} below 4*k_max = {4 * k_max}")
    buf = np.zeros(grid_size, dtype=complex)
    ks = np.arange(-k_max, k_max + 1)
    np.add.at(buf, ks % grid_size, vec)
    return np.fft.ifft(buf) * grid_size / math.sqrt(2.0 * math.pi)


def grid_phases(grid_size: int) -> np.ndarray:
    return 2.0 * math.pi * np.arange(grid_size) / grid_size
