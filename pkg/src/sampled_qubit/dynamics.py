"""Bloch-vector equations of motion, a fixed-step RK4 propagator and closed forms.

The total field acting on the Bloch vector is

    b(t) = (eps_x(t) + u_x, eps_y(t) + u_y, 1 + omega(t) + u_z)

and every case shares the precession ``r' = b x r``.  The decoherence
channels add, with ``g = gamma0 + dgamma(t)``:

    amplitude damping   (-g/2 x, -g/2 y, -g (z + 1))
    phase damping       (-2g x,  -2g y,  0)
    depolarizing        (-4g x,  -4g y, -4g z)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence

import numba
import numpy as np

from .bloch import (
    PHYSICAL_TOL,
    BlochState,
    Decoherence,
    UnphysicalStateError,
    monitor_arrays,
)

if TYPE_CHECKING:
    from .uncertainty import Realization

DEFAULT_DT = 1e-4


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step signal; the last value holds forever."""

    starts: tuple[float, ...] = (0.0,)
    values: tuple[float, ...] = (0.0,)
    _s: np.ndarray = field(default=None, init=False, repr=False, compare=False)
    _v: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        st = np.asarray(self.starts, dtype=float)
        va = np.asarray(self.values, dtype=float)
        if st.shape != va.shape or st.ndim != 1 or st.size == 0:
            raise ValueError("starts and values must be non-empty and of equal length")
        if np.any(np.diff(st) <= 0):
            raise ValueError("segment starts must be strictly increasing")
        object.__setattr__(self, "_s", st)
        object.__setattr__(self, "_v", va)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseConstant":
        return cls((0.0,), (float(value),))

    @classmethod
    def from_segments(cls, length: float, values: Sequence[float], t0: float = 0.0):
        v = np.asarray(values, dtype=float)
        starts = t0 + length * np.arange(v.size)
        return cls(tuple(starts.tolist()), tuple(v.tolist()))

    def __call__(self, t):
        idx = np.searchsorted(self._s, t, side="right") - 1
        vals = self._v[np.clip(idx, 0, None)]
        return float(vals) if np.ndim(vals) == 0 else vals

    @property
    def breakpoints(self) -> np.ndarray:
        return self._s[1:]

    def bounded_by(self, lo: float, hi: float, tol: float = 1e-12) -> bool:
        return bool(np.all(self._v >= lo - tol) and np.all(self._v <= hi + tol))

    def to_dict(self) -> dict:
        return {"starts": list(self.starts), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseConstant":
        if set(d) != {"starts", "values"}:
            raise ValueError("a signal needs exactly the keys 'starts' and 'values'")
        return cls(tuple(float(v) for v in d["starts"]), tuple(float(v) for v in d["values"]))


ZERO = PiecewiseConstant.constant(0.0)


@dataclass(frozen=True)
class ControlSignal:
    u_x: PiecewiseConstant = ZERO
    u_y: PiecewiseConstant = ZERO
    u_z: PiecewiseConstant = ZERO

    @property
    def breakpoints(self) -> np.ndarray:
        return np.union1d(np.union1d(self.u_x.breakpoints, self.u_y.breakpoints), self.u_z.breakpoints)

    def values_at(self, t) -> np.ndarray:
        return np.stack([np.atleast_1d(self.u_x(t)), np.atleast_1d(self.u_y(t)), np.atleast_1d(self.u_z(t))], axis=-1)


NO_CONTROL = ControlSignal()


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    _monitors: Optional[dict] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> BlochState:
        return BlochState.from_array(self.states[i])

    @property
    def final(self) -> BlochState:
        return self.state(-1)

    @property
    def monitors(self) -> dict[str, np.ndarray]:
        if self._monitors is None:
            self._monitors = monitor_arrays(self.states)
        return self._monitors

    @property
    def p_fail(self) -> np.ndarray:
        return self.monitors["p_fail"]

    @property
    def coherence(self) -> np.ndarray:
        return self.monitors["coherence"]

    @property
    def purity(self) -> np.ndarray:
        return self.monitors["purity"]


# ---------------------------------------------------------------------------
# reference right-hand side


def _dissipator(r: np.ndarray, g: float, kind: Decoherence) -> np.ndarray:
    x, y, z = r
    if kind is Decoherence.CLOSED:
        return np.zeros(3)
    if kind is Decoherence.AMPLITUDE_DAMPING:
        return np.array([-0.5 * g * x, -0.5 * g * y, -g * (z + 1.0)])
    if kind is Decoherence.PHASE_DAMPING:
        return np.array([-2.0 * g * x, -2.0 * g * y, 0.0])
    return -4.0 * g * np.asarray(r, dtype=float)


def bloch_rhs(
    s: BlochState,
    t: float,
    ctrl: Optional[ControlSignal],
    real: "Realization",
    kind: Decoherence,
) -> np.ndarray:
    """Time derivative of the Bloch vector at ``(s, t)``."""
    real.check_at(t)
    real.bounds.check_kind(kind)
    ctrl = ctrl or NO_CONTROL
    ux, uy, uz = ctrl.values_at(t)[0]
    omega, ex, ey, dg = real.fields_at(t)
    b = np.array([ex + ux, ey + uy, 1.0 + omega + uz])
    r = s.as_array()
    return np.cross(b, r) + _dissipator(r, real.bounds.gamma0 + dg, kind)


# ---------------------------------------------------------------------------
# compiled RK4 kernel


@numba.njit(cache=True, inline="always")
def _deriv(x, y, z, bx, by, bz, g, kind):
    dx = by * z - bz * y
    dy = bz * x - bx * z
    dz = bx * y - by * x
    if kind == 1:
        dx -= 0.5 * g * x
        dy -= 0.5 * g * y
        dz -= g * (z + 1.0)
    elif kind == 2:
        dx -= 2.0 * g * x
        dy -= 2.0 * g * y
    elif kind == 3:
        dx -= 4.0 * g * x
        dy -= 4.0 * g * y
        dz -= 4.0 * g * z
    return dx, dy, dz


@numba.njit(cache=True)
def _sweep(r0, times, omega, emag, phase, rate, dgam, gamma0, kind, u, gains, feedback, threshold, out):
    """Classical RK4 over ``times``; writes states to ``out`` and returns the step count.

    With ``feedback`` the control is the identity-shaped Lyapunov law held
    over each step.  A non-negative ``threshold`` stops the sweep as soon as
    the failure probability drops to it.
    """
    n = times.shape[0] - 1
    x = r0[0]
    y = r0[1]
    z = r0[2]
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = z
    if threshold >= 0.0 and 0.5 * (1.0 - z) <= threshold:
        return 0
    for i in range(n):
        t = times[i]
        h = times[i + 1] - t
        if feedback:
            nr = math.sqrt(x * x + y * y + z * z)
            ux = 0.0
            uy = 0.0
            if nr > 0.0:
                ct = min(1.0, max(-1.0, z / nr))
                sh = math.sqrt(0.5 * (1.0 - ct))
                rho = math.sqrt(x * x + y * y)
                if rho > 0.0:
                    cp = x / rho
                    sp = y / rho
                else:
                    cp = 1.0
                    sp = 0.0
                ux = gains[0] * 0.5 * sh * sp
                uy = -gains[1] * 0.5 * sh * cp
            uz = 0.0
        else:
            ux = u[i, 0]
            uy = u[i, 1]
            uz = u[i, 2]
        bz = 1.0 + omega[i] + uz
        g = gamma0 + dgam[i]
        em = emag[i]
        ph0 = phase[i] + rate * t
        ph1 = ph0 + rate * 0.5 * h
        ph2 = ph0 + rate * h
        bx0 = em * math.sin(ph0) + ux
        by0 = em * math.cos(ph0) + uy
        bx1 = em * math.sin(ph1) + ux
        by1 = em * math.cos(ph1) + uy
        bx2 = em * math.sin(ph2) + ux
        by2 = em * math.cos(ph2) + uy
        k1x, k1y, k1z = _deriv(x, y, z, bx0, by0, bz, g, kind)
        k2x, k2y, k2z = _deriv(x + 0.5 * h * k1x, y + 0.5 * h * k1y, z + 0.5 * h * k1z, bx1, by1, bz, g, kind)
        k3x, k3y, k3z = _deriv(x + 0.5 * h * k2x, y + 0.5 * h * k2y, z + 0.5 * h * k2z, bx1, by1, bz, g, kind)
        k4x, k4y, k4z = _deriv(x + h * k3x, y + h * k3y, z + h * k3z, bx2, by2, bz, g, kind)
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = z
        if threshold >= 0.0 and 0.5 * (1.0 - z) <= threshold:
            return i + 1
    return n


def step_grid(t0: float, t1: float, dt: float, breakpoints: Sequence[float] = ()) -> np.ndarray:
    """Sample times from t0 to t1 with spacing dt, snapped to every breakpoint.

    Each interval between consecutive breakpoints ends with a short step if
    dt does not divide it.
    """
    if t1 <= t0:
        return np.array([t0])
    bp = np.unique(np.asarray(breakpoints, dtype=float))
    edges = np.concatenate(([t0], bp[(bp > t0) & (bp < t1)], [t1]))
    a = edges[:-1]
    n = np.maximum(1, np.ceil(np.diff(edges) / dt - 1e-9)).astype(np.int64)
    first = np.cumsum(n) - n
    k = np.arange(n.sum()) - np.repeat(first, n)
    return np.concatenate((np.repeat(a, n) + dt * k, [t1]))


def _check_physical(states: np.ndarray, times: np.ndarray) -> None:
    n2 = np.einsum("ij,ij->i", states, states)
    bad = np.flatnonzero(~(n2 <= 1.0 + PHYSICAL_TOL))
    if bad.size:
        i = bad[0]
        raise UnphysicalStateError(
            f"Bloch vector left the unit ball at t={times[i]:.9g} (|r|^2={n2[i]!r}); "
            "reduce dt"
        )


def propagate(
    s0: BlochState,
    real: "Realization",
    kind: Decoherence,
    t0: float,
    t1: float,
    dt: float,
    ctrl: Optional[ControlSignal] = None,
    feedback_gains: Optional[Sequence[float]] = None,
    threshold: float = -1.0,
) -> Trajectory:
    """Integrate from ``t0`` to ``t1``; the workhorse behind `integrate`."""
    real.bounds.check_kind(kind)
    bps = real.breakpoints
    if ctrl is not None:
        bps = np.union1d(bps, ctrl.breakpoints)
    times = step_grid(t0, t1, dt, bps)
    starts = times[:-1]
    omega, emag, phase, dgam = real.step_values(starts)
    if ctrl is not None:
        u = ctrl.values_at(starts) if starts.size else np.zeros((0, 3))
    else:
        u = np.zeros((starts.size, 3))
    gains = np.zeros(3) if feedback_gains is None else np.asarray(feedback_gains, dtype=float)
    out = np.empty((times.size, 3))
    n = _sweep(
        s0.as_array(), times, omega, emag, phase, float(real.phase_rate), dgam,
        float(real.bounds.gamma0), kind.code, np.ascontiguousarray(u), gains,
        feedback_gains is not None, float(threshold), out,
    )
    traj = Trajectory(times[: n + 1].copy(), out[: n + 1].copy())
    _check_physical(traj.states, traj.times)
    return traj


def integrate(
    s0: BlochState,
    ctrl: Optional[ControlSignal],
    real: "Realization",
    kind: Decoherence,
    horizon: float,
    dt: float = DEFAULT_DT,
    t0: float = 0.0,
) -> Trajectory:
    """Fixed-step RK4 from ``t0`` over ``horizon``, sampling every step."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    if horizon > 0 and dt > horizon:
        raise ValueError(f"dt={dt} exceeds horizon={horizon}")
    return propagate(s0, real, kind, t0, t0 + horizon, dt, ctrl=ctrl)


# ---------------------------------------------------------------------------
# closed forms


def propagate_constant_closed(omega_bar: float, eps: float, phi0: float, t: float) -> BlochState:
    """Exact closed-system solution from |0> under a constant field.

    Field: ``(1 + omega_bar) I_z + eps cos(phi0) I_y + eps sin(phi0) I_x``.
    """
    w = 1.0 + omega_bar
    v2 = w * w + eps * eps
    v = math.sqrt(v2)
    s, c = math.sin(v * t), math.cos(v * t)
    sp, cp = math.sin(phi0), math.cos(phi0)
    x = eps * cp / v * s - w * eps * sp / v2 * c + w * eps * sp / v2
    y = -eps * sp / v * s - w * eps * cp / v2 * c + w * eps * cp / v2
    z = eps * eps / v2 * c + w * w / v2
    return BlochState(x, y, z)


def decay_oracle(kind: Decoherence, gamma_const: float, t: float) -> float:
    """Free decay with ``H_delta == 0`` and constant coupling.

    Amplitude damping from |0>: z(t).  Phase damping from an equatorial pure
    state: coherence C(t).  Depolarizing from any pure state: |r(t)|^2.
    """
    if kind is Decoherence.AMPLITUDE_DAMPING:
        return 2.0 * math.exp(-gamma_const * t) - 1.0
    if kind is Decoherence.PHASE_DAMPING:
        return math.exp(-4.0 * gamma_const * t)
    if kind is Decoherence.DEPOLARIZING:
        return math.exp(-8.0 * gamma_const * t)
    raise ValueError("decay_oracle has no closed-system law")

