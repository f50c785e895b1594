"""Recovery control: the Lyapunov feedback law, constant pulses and the terminal test.

With ``|psi> = cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>`` the phase of
``<psi|0>`` is always zero, and the Lyapunov law reduces to

    u_x = K_x f( sin(theta/2) sin(phi) / 2)
    u_y = K_y f(-sin(theta/2) cos(phi) / 2)
    u_z = K_z f(0) = 0

Gains multiply ``I_k = sigma_k / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .bloch import BlochState, Decoherence, PureState, UncertaintyBounds, failure_probability
from .design import SamplingPlan
from .dynamics import DEFAULT_DT, ControlSignal, PiecewiseConstant, Trajectory, ZERO, propagate
from .uncertainty import Realization, nominal

SHAPINGS: dict[str, Callable[[float], float]] = {
    "identity": lambda v: v,
    "tanh": math.tanh,
    "atan": math.atan,
}


@dataclass(frozen=True)
class LyapunovGains:
    k_x: float = 0.0
    k_y: float = 0.0
    k_z: float = 0.0
    shaping: str = "identity"

    def __post_init__(self):
        if min(self.k_x, self.k_y, self.k_z) < 0:
            raise ValueError("Lyapunov gains must be >= 0")
        if self.shaping not in SHAPINGS:
            raise ValueError(f"unknown shaping {self.shaping!r}; choose from {sorted(SHAPINGS)}")

    @property
    def f(self) -> Callable[[float], float]:
        return SHAPINGS[self.shaping]

    def as_array(self) -> np.ndarray:
        return np.array([self.k_x, self.k_y, self.k_z])


def lyapunov_control(psi: PureState, gains: LyapunovGains) -> tuple[float, float, float]:
    sh = math.sin(psi.theta / 2.0)
    f = gains.f
    ux = gains.k_x * f(0.5 * sh * math.sin(psi.phi))
    uy = gains.k_y * f(-0.5 * sh * math.cos(psi.phi))
    uz = gains.k_z * f(0.0)
    return ux, uy, uz


def terminal_reached(state: Union[PureState, BlochState], plan: SamplingPlan) -> bool:
    """True iff the failure probability is at most eta * alpha * p0."""
    if isinstance(state, PureState):
        p = math.sin(state.theta / 2.0) ** 2
    else:
        p = failure_probability(state)
    return p <= plan.terminal_threshold


def constant_control(u: float, axis: str) -> ControlSignal:
    axis = axis.lower()
    if axis not in ("x", "y", "z"):
        raise ValueError(f"axis must be x, y or z, got {axis!r}")
    sig = PiecewiseConstant.constant(u)
    return ControlSignal(**{f"u_{a}": (sig if a == axis else ZERO) for a in "xyz"})


@dataclass(frozen=True)
class Lyapunov:
    gains: LyapunovGains


@dataclass(frozen=True)
class Constant:
    u: float
    axis: str = "y"


ControlLaw = Union[Lyapunov, Constant]


@dataclass
class DriveResult:
    trajectory: Trajectory
    reached: bool
    time_used: float

    def __iter__(self):
        return iter((self.trajectory, self.reached, self.time_used))


def _shaped_feedback(s0, gains, plan, kind, real, t0, t1, dt) -> Trajectory:
    # Python loop for non-identity shaping: one held control per step.
    times = [t0]
    states = [s0.as_array()]
    s = s0
    t = t0
    thr = plan.terminal_threshold
    while t < t1 - 1e-15 and failure_probability(s) > thr:
        h = min(dt, t1 - t)
        u = lyapunov_control(PureState.from_bloch(s), gains)
        ctrl = ControlSignal(*(PiecewiseConstant.constant(v) for v in u))
        seg = propagate(s, real, kind, t, t + h, h, ctrl=ctrl)
        t = float(seg.times[-1])
        s = seg.final
        times.append(t)
        states.append(seg.states[-1])
    return Trajectory(np.array(times), np.array(states))


def drive_to_subset(
    s0: BlochState,
    law: ControlLaw,
    plan: SamplingPlan,
    kind: Decoherence,
    bounds: UncertaintyBounds,
    realization: Optional[Realization] = None,
    dt: float = DEFAULT_DT,
    t0: float = 0.0,
) -> DriveResult:
    """Run the recovery law for at most ``beta * T``, stopping at the terminal set."""
    real = realization if realization is not None else nominal(bounds)
    t1 = t0 + plan.recovery_time
    thr = plan.terminal_threshold
    if isinstance(law, Lyapunov):
        if kind is not Decoherence.CLOSED:
            raise ValueError("the Lyapunov law is defined for closed dynamics only")
        if law.gains.shaping == "identity":
            traj = propagate(s0, real, kind, t0, t1, dt, feedback_gains=law.gains.as_array(), threshold=thr)
        else:
            traj = _shaped_feedback(s0, law.gains, plan, kind, real, t0, t1, dt)
    elif isinstance(law, Constant):
        traj = propagate(s0, real, kind, t0, t1, dt, ctrl=constant_control(law.u, law.axis), threshold=thr)
    else:
        raise TypeError(f"unknown control law {law!r}")
    reached = failure_probability(traj.final) <= thr
    return DriveResult(traj, reached, float(traj.times[-1] - t0))
