"""Projective measurement along z or x with a classical readout-flip model."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bloch import BlochState


class Axis(str, Enum):
    Z = "z"
    X = "x"


class Outcome(str, Enum):
    """``ZERO`` is the good outcome: |0> for z, the +x eigenstate for x."""

    ZERO = "zero"
    ONE = "one"


_EIGEN = {
    (Axis.Z, Outcome.ZERO): BlochState(0.0, 0.0, 1.0),
    (Axis.Z, Outcome.ONE): BlochState(0.0, 0.0, -1.0),
    (Axis.X, Outcome.ZERO): BlochState(1.0, 0.0, 0.0),
    (Axis.X, Outcome.ONE): BlochState(-1.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class MeasurementModel:
    axis: Axis = Axis.Z
    p01: float = 0.0
    p10: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "axis", Axis(self.axis))
        for name in ("p01", "p10"):
            v = getattr(self, name)
            # 1 is allowed so a flip can be forced deterministically
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def prob_one(self, s: BlochState) -> float:
        """Born probability of the true outcome ONE."""
        c = s.z if self.axis is Axis.Z else s.x
        return min(1.0, max(0.0, 0.5 * (1.0 - c)))


IDEAL_Z = MeasurementModel(Axis.Z)
IDEAL_X = MeasurementModel(Axis.X)


@dataclass(frozen=True)
class MeasurementRecord:
    true_outcome: Outcome
    reported_outcome: Outcome
    post_state: BlochState
    time: float

    @property
    def bad(self) -> bool:
        return self.reported_outcome is Outcome.ONE

    def to_dict(self) -> dict:
        s = self.post_state
        return {"time": self.time, "true": self.true_outcome.value, "reported": self.reported_outcome.value,
                "post_state": [s.x, s.y, s.z]}


def measure(s: BlochState, model: MeasurementModel, rng: np.random.Generator, time: float = 0.0) -> MeasurementRecord:
    """Sample one projective measurement.

    Two uniforms are drawn on every call (outcome, then readout flip) so the
    stream position never depends on the outcome.  The collapse always
    follows the true outcome; only the reported label can be wrong.
    """
    u_out, u_flip = rng.random(2)
    true = Outcome.ONE if u_out < model.prob_one(s) else Outcome.ZERO
    flip = model.p01 if true is Outcome.ZERO else model.p10
    reported = true
    if u_flip < flip:
        reported = Outcome.ONE if true is Outcome.ZERO else Outcome.ZERO
    return MeasurementRecord(true, reported, _EIGEN[(model.axis, true)], float(time))
