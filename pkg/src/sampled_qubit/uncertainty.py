"""Admissible uncertainty realizations and a brute-force worst-case search.

A realization carries four step signals: the detuning ``omega(t)``, the
magnitude and phase of the transverse error field and the coupling offset
``dgamma(t)``.  The transverse components are

    eps_x = eps_mag sin(phase),   eps_y = eps_mag cos(phase)

where ``phase(t) = eps_phase(t) + phase_rate * t``.  ``phase_rate = -1``
makes the error field co-rotate with the free precession, i.e. a resonant
drive; this is how the worst cases below are expressed in the lab frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

import numpy as np
from scipy.linalg import expm

from .bloch import BlochState, Decoherence, UncertaintyBounds
from .dynamics import ZERO, ControlSignal, PiecewiseConstant

TWO_PI = 2.0 * math.pi
# Lab-frame phase rate that co-rotates with the unit free precession.
RESONANT_RATE = -1.0
_TOL = 1e-12


class InadmissibleRealization(ValueError):
    pass


class SearchBudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"search needs {required} evaluations, budget is {budget}")
        self.required = required
        self.budget = budget


@dataclass(frozen=True)
class Realization:
    bounds: UncertaintyBounds
    omega: PiecewiseConstant = ZERO
    eps_mag: PiecewiseConstant = ZERO
    eps_phase: PiecewiseConstant = ZERO
    dgamma: PiecewiseConstant = ZERO
    phase_rate: float = 0.0
    _bps: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        b = self.bounds
        w = b.omega if b.hamiltonian else 0.0
        e = b.epsilon if b.hamiltonian else 0.0
        if not self.omega.bounded_by(-w, w):
            raise InadmissibleRealization(f"omega(t) leaves [-{w}, {w}]")
        if not self.eps_mag.bounded_by(0.0, e):
            raise InadmissibleRealization(f"eps_mag(t) leaves [0, {e}]")
        ph = self.eps_phase._v
        if np.any(ph < 0) or np.any(ph >= TWO_PI):
            raise InadmissibleRealization("eps_phase(t) leaves [0, 2pi)")
        if not self.dgamma.bounded_by(-b.gamma, b.gamma):
            raise InadmissibleRealization(f"dgamma(t) leaves [-{b.gamma}, {b.gamma}]")
        bps = np.union1d(self.omega.breakpoints, self.eps_mag.breakpoints)
        bps = np.union1d(bps, np.union1d(self.eps_phase.breakpoints, self.dgamma.breakpoints))
        object.__setattr__(self, "_bps", bps)

    @property
    def breakpoints(self) -> np.ndarray:
        return self._bps

    def fields_at(self, t: float) -> tuple[float, float, float, float]:
        """``(omega, eps_x, eps_y, dgamma)`` at time t."""
        mag = self.eps_mag(t)
        ph = self.eps_phase(t) + self.phase_rate * t
        return self.omega(t), mag * math.sin(ph), mag * math.cos(ph), self.dgamma(t)

    def check_at(self, t: float) -> None:
        b = self.bounds
        omega, ex, ey, dg = self.fields_at(t)
        w = b.omega if b.hamiltonian else 0.0
        e = b.epsilon if b.hamiltonian else 0.0
        if abs(omega) > w + _TOL or math.hypot(ex, ey) > e + _TOL or abs(dg) > b.gamma + _TOL:
            raise InadmissibleRealization(f"realization violates its bounds at t={t}")

    def step_values(self, times: np.ndarray):
        """Segment values at each time in ``times`` (phase without the rate term)."""
        times = np.asarray(times, dtype=float)
        return (
            np.atleast_1d(self.omega(times)).astype(float),
            np.atleast_1d(self.eps_mag(times)).astype(float),
            np.atleast_1d(self.eps_phase(times)).astype(float),
            np.atleast_1d(self.dgamma(times)).astype(float),
        )

    def to_dict(self) -> dict:
        return {
            "omega": self.omega.to_dict(),
            "eps_mag": self.eps_mag.to_dict(),
            "eps_phase": self.eps_phase.to_dict(),
            "dgamma": self.dgamma.to_dict(),
            "phase_rate": self.phase_rate,
        }

    @classmethod
    def from_dict(cls, bounds: UncertaintyBounds, d: dict) -> "Realization":
        unknown = set(d) - {"omega", "eps_mag", "eps_phase", "dgamma", "phase_rate"}
        if unknown:
            raise ValueError(f"unknown realization keys: {sorted(unknown)}")
        sig = {k: PiecewiseConstant.from_dict(d[k]) for k in ("omega", "eps_mag", "eps_phase", "dgamma") if k in d}
        return cls(bounds, phase_rate=float(d.get("phase_rate", 0.0)), **sig)


def nominal(bounds: UncertaintyBounds) -> Realization:
    return Realization(bounds)


def worst_case_structured(bounds: UncertaintyBounds, kind: Decoherence) -> Realization:
    """Bang-bang guess: detuning at -omega, full resonant error field, coupling at +gamma.

    The error field sits at phase pi/2 in the frame rotating with the free
    precession, so with ``omega = 0`` the rotating-frame Hamiltonian is
    exactly ``eps I_x`` and ``z(t) = cos(eps t)`` from |0>.
    """
    kw = {}
    if bounds.hamiltonian:
        kw.update(
            omega=PiecewiseConstant.constant(-bounds.omega),
            eps_mag=PiecewiseConstant.constant(bounds.epsilon),
            eps_phase=PiecewiseConstant.constant(math.pi / 2),
            phase_rate=RESONANT_RATE,
        )
    if kind is not Decoherence.CLOSED:
        kw["dgamma"] = PiecewiseConstant.constant(bounds.gamma)
    return Realization(bounds, **kw)


def random_uniform(
    bounds: UncertaintyBounds,
    segment_len: float,
    seed,
    horizon: float,
    drive: str = "disk",
) -> Realization:
    """Independent uniform draws on segments of length ``segment_len``.

    ``drive`` selects the error-field law: ``"disk"`` is uniform on the disk
    of radius epsilon; ``"x"`` / ``"y"`` put a uniform ``[-eps, eps]``
    amplitude on a single axis.
    """
    if not segment_len > 0:
        raise ValueError("segment_len must be > 0")
    rng = np.random.default_rng(seed)
    n = max(1, math.ceil(horizon / segment_len - 1e-9))
    w = bounds.omega if bounds.hamiltonian else 0.0
    e = bounds.epsilon if bounds.hamiltonian else 0.0
    omega = rng.uniform(-w, w, n)
    u1 = rng.random(n)
    u2 = rng.random(n)
    dg = rng.uniform(-bounds.gamma, bounds.gamma, n)
    if drive == "disk":
        mag = e * np.sqrt(u1)
        phase = TWO_PI * u2
    elif drive in ("x", "y"):
        amp = e * (2.0 * u1 - 1.0)
        mag = np.abs(amp)
        pos, neg = (math.pi / 2, 3 * math.pi / 2) if drive == "x" else (0.0, math.pi)
        phase = np.where(amp >= 0, pos, neg)
    else:
        raise ValueError(f"unknown drive law {drive!r}")
    mag = np.minimum(mag, e)
    phase = np.mod(phase, TWO_PI)

    def sig(v):
        return PiecewiseConstant.from_segments(segment_len, v)

    return Realization(bounds, sig(omega), sig(mag), sig(phase), sig(dg))


# ---------------------------------------------------------------------------
# adversarial search

OBJECTIVES = ("failure", "coherence", "purity")


def _objective(states: np.ndarray, objective: str) -> np.ndarray:
    x, y, z = states[..., 0], states[..., 1], states[..., 2]
    if objective == "failure":
        return 0.5 * (1.0 - z)
    if objective == "coherence":
        return 1.0 - (x * x + y * y)
    if objective == "purity":
        return 0.5 * (1.0 - (x * x + y * y + z * z))
    raise ValueError(f"objective must be one of {OBJECTIVES}")


def _affine_generator(bx: float, by: float, bz: float, g: float, kind: Decoherence) -> np.ndarray:
    G = np.zeros((4, 4))
    G[:3, :3] = [[0.0, -bz, by], [bz, 0.0, -bx], [-by, bx, 0.0]]
    if kind is Decoherence.AMPLITUDE_DAMPING:
        G[0, 0] = G[1, 1] = -0.5 * g
        G[2, 2] = -g
        G[2, 3] = -g
    elif kind is Decoherence.PHASE_DAMPING:
        G[0, 0] = G[1, 1] = -2.0 * g
    elif kind is Decoherence.DEPOLARIZING:
        G[0, 0] = G[1, 1] = G[2, 2] = -4.0 * g
    return G


def _search_axes(bounds: UncertaintyBounds, kind: Decoherence, levels: int):
    if bounds.hamiltonian and bounds.omega > 0:
        omegas = [-bounds.omega, bounds.omega]
    else:
        omegas = [0.0]
    if kind is not Decoherence.CLOSED and bounds.gamma > 0:
        dgs = [-bounds.gamma, bounds.gamma]
    else:
        dgs = [0.0]
    if bounds.hamiltonian:
        drives = [(bounds.epsilon, TWO_PI * k / levels) for k in range(levels)] + [(0.0, 0.0)]
    else:
        drives = [(0.0, 0.0)]
    return omegas, dgs, drives


def search_space_size(bounds: UncertaintyBounds, kind: Decoherence, grid: int = 8, levels: int = 8) -> int:
    omegas, dgs, drives = _search_axes(bounds, kind, levels)
    return len(drives) * (len(omegas) * len(dgs)) ** grid


def adversarial_search(
    bounds: UncertaintyBounds,
    kind: Decoherence,
    ctrl: Optional[ControlSignal],
    s0: BlochState,
    horizon: float,
    objective: str = "failure",
    grid: int = 8,
    levels: int = 8,
    max_evaluations: int = 1_000_000,
) -> tuple[Realization, float]:
    """Exhaustively maximise a monitor loss at ``horizon`` over a bang-bang grid.

    Search space: on each of ``grid`` equal segments the detuning and the
    coupling offset independently take their extreme values; the error
    field has full magnitude and one of ``levels`` phases held fixed in the
    frame co-rotating with the free precession, or is switched off.  Each
    candidate is propagated exactly with matrix exponentials of the
    (constant) rotating-frame generators, so the search shares no code with
    the RK4 integrator.  The returned realization is the lab-frame
    equivalent of the maximiser; among equal values the first candidate in
    lexicographic order of (drive, segment choices) wins.
    """
    bounds.check_kind(kind)
    if grid < 1 or levels < 2:
        raise ValueError("need grid >= 1 and levels >= 2")
    if ctrl is not None and (ctrl.breakpoints.size or np.any(ctrl.values_at(0.0) != 0.0)):
        raise ValueError("adversarial_search supports free evolution only")
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    omegas, dgs, drives = _search_axes(bounds, kind, levels)
    choices = list(product(omegas, dgs))
    required = len(drives) * len(choices) ** grid
    if required > max_evaluations:
        raise SearchBudgetExceeded(required, int(max_evaluations))

    h = horizon / grid
    D, C = len(drives), len(choices)
    P = np.empty((D, C, 4, 4))
    for d, (mag, ph) in enumerate(drives):
        for c, (w, dg) in enumerate(choices):
            G = _affine_generator(mag * math.sin(ph), mag * math.cos(ph), w, bounds.gamma0 + dg, kind)
            P[d, c] = expm(G * h)

    S = np.broadcast_to(np.append(s0.as_array(), 1.0), (D, 1, 4)).copy()
    for _ in range(grid):
        S = np.einsum("dcij,dnj->dnci", P, S).reshape(D, -1, 4)
    vals = _objective(S[..., :3], objective)
    flat = int(np.argmax(vals))
    d, idx = divmod(flat, vals.shape[1])
    value = float(vals[d, idx])

    digits = []
    for _ in range(grid):
        idx, c = divmod(idx, C)
        digits.append(c)
    digits.reverse()
    mag, ph = drives[d]
    seg = lambda v: PiecewiseConstant.from_segments(h, v)  # noqa: E731
    real = Realization(
        bounds,
        omega=seg([choices[c][0] for c in digits]),
        eps_mag=PiecewiseConstant.constant(mag),
        eps_phase=PiecewiseConstant.constant(ph),
        dgamma=seg([choices[c][1] for c in digits]),
        phase_rate=RESONANT_RATE if mag > 0 else 0.0,
    )
    return real, value
