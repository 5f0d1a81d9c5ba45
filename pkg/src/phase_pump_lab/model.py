"""Two-tone washboard potential and force field of the generalized Adler equation.

The phase particle obeys ``dphi/dt = force(phi, theta)`` with

    V(phi, theta) = -phi*delta - A1*cos(phi - theta) - A2*cos(2*phi)
    A1 = mu*r,  A2 = mu*(1 - r)/2

All quantities are dimensionless (mu = 1 fixes the classical time unit,
hbar = 1 the quantum one).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Immutable parameter record shared by every module.

    ``omega`` is signed: a negative value is the backward sweep
    ``theta(t) = -|omega| t``.  ``m_e`` is only read by the quantum modules.
    """

    r: float
    mu: float = 1.0
    delta: float = 0.0
    omega: float = 0.0
    m_e: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r out of [0,1]: {self.r}")
        if not self.mu >= 0.0:
            raise ValueError(f"mu must be non-negative: {self.mu}")
        if not self.m_e > 0.0:
            raise ValueError(f"m_e must be positive: {self.m_e}")

    @property
    def a1(self) -> float:
        return self.mu * self.r

    @property
    def a2(self) -> float:
        return self.mu * (1.0 - self.r) / 2.0

    @property
    def direction(self) -> str:
        return "backward" if self.omega < 0 else "forward"

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def reversed(self) -> "ModelParams":
        """Same record with the sweep direction flipped."""
        return replace(self, omega=-self.omega)


@dataclass(frozen=True)
class PhasePoint:
    phi: float
    theta: float


def potential(p: ModelParams, phi, theta):
    return (-phi * p.delta - p.a1 * np.cos(phi - theta)
            - p.a2 * np.cos(2.0 * phi))


def force(p: ModelParams, phi, theta):
    """``-dV/dphi``; accepts scalars or broadcastable arrays."""
    return p.delta - p.a1 * np.sin(phi - theta) - 2.0 * p.a2 * np.sin(2.0 * phi)


def force_dphi(p: ModelParams, phi, theta):
    return -p.a1 * np.cos(phi - theta) - 4.0 * p.a2 * np.cos(2.0 * phi)


def force_scalar(p: ModelParams, phi: float, theta: float) -> float:
    # math-only fast path for the ODE right-hand side
    return (p.delta - p.a1 * math.sin(phi - theta)
            - 2.0 * p.a2 * math.sin(2.0 * phi))
