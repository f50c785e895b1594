"""Qubit states, admissible uncertainty sets and the sliding-mode monitors.

States live on (or inside) the Bloch ball as real 3-vectors ``(x, y, z)``
with ``rho = (I + r . sigma) / 2``.  The excited state ``|0>`` sits at
``z = +1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np

# Absolute tolerance on |r|^2 - 1 before a state counts as unphysical.
PHYSICAL_TOL = 1e-9
# Slack used when comparing a monitor against a domain boundary.
BOUNDARY_TOL = 1e-12


class UnphysicalStateError(ValueError):
    """Raised when a Bloch vector leaves the unit ball by more than PHYSICAL_TOL."""


class Decoherence(str, Enum):
    CLOSED = "closed"
    AMPLITUDE_DAMPING = "amplitude_damping"
    PHASE_DAMPING = "phase_damping"
    DEPOLARIZING = "depolarizing"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]


_KIND_CODES = {
    Decoherence.CLOSED: 0,
    Decoherence.AMPLITUDE_DAMPING: 1,
    Decoherence.PHASE_DAMPING: 2,
    Decoherence.DEPOLARIZING: 3,
}


@dataclass(frozen=True)
class BlochState:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x * self.x + self.y * self.y + self.z * self.z
        if not math.isfinite(n2) or n2 > 1.0 + PHYSICAL_TOL:
            raise UnphysicalStateError(f"|r|^2 = {n2!r} exceeds 1 + {PHYSICAL_TOL}")

    @classmethod
    def from_array(cls, r) -> "BlochState":
        x, y, z = (float(v) for v in r)
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @property
    def norm2(self) -> float:
        return self.x * self.x + self.y * self.y + self.z * self.z

    @property
    def is_pure(self) -> bool:
        return abs(self.norm2 - 1.0) <= PHYSICAL_TOL

    def density_matrix(self) -> np.ndarray:
        """Return ``(I + r . sigma) / 2``; for inspection only."""
        return 0.5 * np.array(
            [[1 + self.z, self.x - 1j * self.y], [self.x + 1j * self.y, 1 - self.z]]
        )


GROUND = BlochState(0.0, 0.0, -1.0)
EXCITED = BlochState(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class PureState:
    """``cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>``."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")

    def to_bloch(self) -> BlochState:
        st = math.sin(self.theta)
        return BlochState(st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta))

    @classmethod
    def from_bloch(cls, s: BlochState) -> "PureState":
        """Polar angles of the direction of ``s``; the origin maps to ``|0>``.

        At the poles the azimuth defaults to 0, which is also what a
        collapse onto ``|1>`` produces.
        """
        n = math.sqrt(s.norm2)
        if n == 0.0:
            return cls(0.0, 0.0)
        theta = math.acos(max(-1.0, min(1.0, s.z / n)))
        phi = math.atan2(s.y, s.x) % (2 * math.pi)
        return cls(theta, phi)

    def ket(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta / 2), np.exp(1j * self.phi) * math.sin(self.theta / 2)]
        )


@dataclass(frozen=True)
class UncertaintyBounds:
    """Admissible set for the Hamiltonian and coupling uncertainties.

    ``hamiltonian=False`` describes the ``H_delta == 0`` scenarios, in which
    ``omega`` and ``epsilon`` are ignored by every generator.
    """

    omega: float = 0.0
    epsilon: float = 0.2
    gamma0: float = 0.0
    gamma: float = 0.0
    hamiltonian: bool = True

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega bound must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon bound must be > 0")
        if self.gamma < 0 or self.gamma0 < 0:
            raise ValueError("coupling rates must be >= 0")
        if self.gamma0 < self.gamma:
            raise ValueError(f"need gamma0 >= gamma, got gamma0={self.gamma0}, gamma={self.gamma}")

    @property
    def gamma_max(self) -> float:
        return self.gamma0 + self.gamma

    def check_kind(self, kind: Decoherence) -> None:
        if kind is Decoherence.CLOSED and (self.gamma0 != 0 or self.gamma != 0):
            raise ValueError("closed dynamics forbid nonzero gamma0/gamma")


@dataclass(frozen=True)
class FailureProb:
    p0: float

    def __post_init__(self):
        if not 0 < self.p0 < 1:
            raise ValueError(f"p0 must lie in (0, 1), got {self.p0}")


@dataclass(frozen=True)
class Coherence:
    cbar: float

    def __post_init__(self):
        if not 0 < self.cbar <= 1:
            raise ValueError(f"cbar must lie in (0, 1], got {self.cbar}")


@dataclass(frozen=True)
class Purity:
    pbar: float

    def __post_init__(self):
        if not 0.5 < self.pbar <= 1:
            raise ValueError(f"pbar must lie in (0.5, 1], got {self.pbar}")


SlidingModeTarget = Union[FailureProb, Coherence, Purity]


def failure_probability(s: BlochState) -> float:
    """Probability that a sigma_z measurement returns |1>."""
    return (1.0 - s.z) / 2.0


def coherence(s: BlochState) -> float:
    return s.x * s.x + s.y * s.y


def purity(s: BlochState) -> float:
    return (1.0 + s.norm2) / 2.0


def in_domain(s: BlochState, target: SlidingModeTarget) -> bool:
    if isinstance(target, FailureProb):
        return (1.0 + s.z) / 2.0 >= 1.0 - target.p0 - BOUNDARY_TOL
    if isinstance(target, Coherence):
        return coherence(s) >= target.cbar - BOUNDARY_TOL
    if isinstance(target, Purity):
        return purity(s) >= target.pbar - BOUNDARY_TOL
    raise TypeError(f"unknown target {target!r}")


def monitor_arrays(states: np.ndarray) -> dict[str, np.ndarray]:
    """Vectorised monitors for an ``(n, 3)`` array of Bloch vectors."""
    states = np.asarray(states, dtype=float)
    c = states[:, 0] ** 2 + states[:, 1] ** 2
    return {
        "p_fail": (1.0 - states[:, 2]) / 2.0,
        "coherence": c,
        "purity": (1.0 + c + states[:, 2] ** 2) / 2.0,
    }


def in_domain_array(states: np.ndarray, target: SlidingModeTarget) -> np.ndarray:
    m = monitor_arrays(states)
    if isinstance(target, FailureProb):
        return (1.0 - m["p_fail"]) >= 1.0 - target.p0 - BOUNDARY_TOL
    if isinstance(target, Coherence):
        return m["coherence"] >= target.cbar - BOUNDARY_TOL
    if isinstance(target, Purity):
        return m["purity"] >= target.pbar - BOUNDARY_TOL
    raise TypeError(f"unknown target {target!r}")


def target_value(target: SlidingModeTarget) -> float:
    if isinstance(target, FailureProb):
        return target.p0
    if isinstance(target, Coherence):
        return target.cbar
    return target.pbar
