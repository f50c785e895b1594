"""The sampled-data protocol, its Monte Carlo harness and adversarial certification.

One period starting at ``nT``: measure; on a bad report run the recovery
law for at most ``beta T`` (stopping early once the terminal set is
reached); then evolve freely until ``(n+1)T``.  Monitors inside
``[nT, nT + beta T]`` after a bad report are recorded but exempt.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .bloch import (
    EXCITED,
    BlochState,
    Coherence,
    Decoherence,
    FailureProb,
    Purity,
    UncertaintyBounds,
    in_domain_array,
    monitor_arrays,
)
from .control import ControlLaw, Lyapunov, drive_to_subset
from .design import SamplingPlan
from .dynamics import Trajectory, propagate
from .measurement import Axis, MeasurementModel, MeasurementRecord, measure
from .uncertainty import (
    Realization,
    adversarial_search,
    nominal,
    random_uniform,
    worst_case_structured,
)

WORKERS_ENV = "SAMPLED_QUBIT_WORKERS"
CERTIFY_SLACK = 1e-4

_FAMILY_KIND = {
    "closed": Decoherence.CLOSED,
    "amplitude": Decoherence.AMPLITUDE_DAMPING,
    "phase": Decoherence.PHASE_DAMPING,
    "depolarizing": Decoherence.DEPOLARIZING,
}


@dataclass(frozen=True)
class Nominal:
    def build(self, bounds, kind, horizon, seed) -> Realization:
        return nominal(bounds)


@dataclass(frozen=True)
class StructuredWorst:
    def build(self, bounds, kind, horizon, seed) -> Realization:
        return worst_case_structured(bounds, kind)


@dataclass(frozen=True)
class Random:
    segment_len: float = 1e-3
    drive: str = "disk"

    def build(self, bounds, kind, horizon, seed) -> Realization:
        return random_uniform(bounds, self.segment_len, seed, max(horizon, self.segment_len), self.drive)


@dataclass(frozen=True)
class Fixed:
    realization: Realization

    def build(self, bounds, kind, horizon, seed) -> Realization:
        return self.realization


RealizationSource = Union[Nominal, StructuredWorst, Random, Fixed]


@dataclass(frozen=True)
class Scenario:
    kind: Decoherence
    bounds: UncertaintyBounds
    plan: SamplingPlan
    measurement: MeasurementModel = MeasurementModel()
    recovery: Optional[ControlLaw] = None
    source: RealizationSource = Nominal()
    n_periods: int = 1
    dt: float = 1e-4
    initial: BlochState = EXCITED
    recovery_dt: Optional[float] = None
    # Witness replays start mid-period, so the first measurement can be skipped.
    measure_at_start: bool = True

    def __post_init__(self):
        kind = Decoherence(self.kind)
        object.__setattr__(self, "kind", kind)
        self.bounds.check_kind(kind)
        expected = _FAMILY_KIND[self.plan.formula_id.family]
        if kind is not expected:
            raise ValueError(f"{self.plan.formula_id.value} designs {expected.value}, scenario is {kind.value}")
        needs = kind in (Decoherence.CLOSED, Decoherence.AMPLITUDE_DAMPING)
        if needs and self.recovery is None:
            raise ValueError(f"{kind.value} scenarios need a recovery law")
        if not needs and self.recovery is not None:
            raise ValueError(f"{kind.value} scenarios use measurement only; drop the recovery law")
        if needs and not self.plan.beta > 0:
            raise ValueError("a recovery law needs plan.beta > 0")
        if isinstance(self.recovery, Lyapunov) and kind is not Decoherence.CLOSED:
            raise ValueError("the Lyapunov law is defined for closed dynamics only")
        if isinstance(self.plan.target, FailureProb) and self.measurement.axis is not Axis.Z:
            raise ValueError("failure-probability targets need sigma_z measurement")
        if self.n_periods < 0:
            raise ValueError("n_periods must be >= 0")
        if not self.dt > 0 or (self.recovery_dt is not None and not self.recovery_dt > 0):
            raise ValueError("time steps must be > 0")

    @property
    def horizon(self) -> float:
        return self.n_periods * self.plan.period


# ---------------------------------------------------------------------------
# seeds


def _as_seq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def _child(ss: np.random.SeedSequence, i: int) -> np.random.SeedSequence:
    # Built explicitly rather than via spawn() so callers' sequences are never mutated.
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (i,))


def trial_seed(seed, i: int) -> np.random.SeedSequence:
    """Seed of trial ``i`` under master ``seed``."""
    return _child(_as_seq(seed), i)


# ---------------------------------------------------------------------------
# protocol


@dataclass
class PeriodRecord:
    index: int
    start: float
    measurement: Optional[MeasurementRecord]
    recovered: bool
    reached: Optional[bool]
    recovery_time: float
    n_samples: int
    violations: int
    max_p_fail: float
    min_coherence: float
    min_purity: float
    end_state: BlochState
    end_in_domain: bool
    segments: list = field(default_factory=list, repr=False)


@dataclass
class RunReport:
    periods: list
    target: object

    def __len__(self) -> int:
        return len(self.periods)

    @property
    def n_recoveries(self) -> int:
        return sum(p.recovered for p in self.periods)

    @property
    def n_recovery_failures(self) -> int:
        return sum(p.reached is False for p in self.periods)

    @property
    def n_bad_reports(self) -> int:
        return sum(p.measurement is not None and p.measurement.bad for p in self.periods)

    @property
    def sampling_instants(self) -> np.ndarray:
        """Pre-measurement states at T, 2T, ..., nT."""
        return np.array([[p.end_state.x, p.end_state.y, p.end_state.z] for p in self.periods]).reshape(-1, 3)

    @property
    def instant_violations(self) -> int:
        return sum(not p.end_in_domain for p in self.periods)

    @property
    def window_violations(self) -> int:
        """Integrator samples outside the domain, excluding exempt recovery windows."""
        return sum(p.violations for p in self.periods)

    def instant_monitors(self) -> dict:
        return monitor_arrays(self.sampling_instants)

    def summary(self) -> dict:
        m = self.instant_monitors()
        empty = not self.periods
        return {
            "periods": len(self.periods),
            "max_p_fail": None if empty else float(m["p_fail"].max()),
            "min_coherence": None if empty else float(m["coherence"].min()),
            "min_purity": None if empty else float(m["purity"].min()),
            "recoveries": self.n_recoveries,
            "recovery_failures": self.n_recovery_failures,
            "bad_reports": self.n_bad_reports,
            "instant_violations": self.instant_violations,
            "window_violations": self.window_violations,
        }


def run_protocol(sc: Scenario, seed=0, keep_trajectories: bool = False) -> RunReport:
    ss = _as_seq(seed)
    rng = np.random.default_rng(_child(ss, 0))
    plan, T = sc.plan, sc.plan.period
    real = sc.source.build(sc.bounds, sc.kind, sc.horizon, _child(ss, 1))
    rec_dt = sc.recovery_dt or sc.dt
    s = sc.initial
    periods = []
    for n in range(sc.n_periods):
        t0, t1 = n * T, (n + 1) * T
        rec = None
        if n > 0 or sc.measure_at_start:
            rec = measure(s, sc.measurement, rng, t0)
            s = rec.post_state
        segs = []
        recovered, reached, used = False, None, 0.0
        if rec is not None and rec.bad and sc.recovery is not None:
            dr = drive_to_subset(s, sc.recovery, plan, sc.kind, sc.bounds, real, dt=rec_dt, t0=t0)
            recovered, reached, used = True, dr.reached, dr.time_used
            segs.append(("recovery", dr.trajectory))
            s = dr.trajectory.final
        free = propagate(s, real, sc.kind, t0 + used, t1, sc.dt)
        segs.append(("free", free))
        s = free.final
        periods.append(_period_record(n, t0, rec, recovered, reached, used, segs, plan, keep_trajectories))
    return RunReport(periods, plan.target)


def _period_record(n, t0, rec, recovered, reached, used, segs, plan, keep) -> PeriodRecord:
    states = np.concatenate([tr.states for _, tr in segs])
    times = np.concatenate([tr.times for _, tr in segs])
    ok = in_domain_array(states, plan.target)
    exempt = np.zeros_like(ok)
    if recovered:
        exempt = times <= t0 + plan.recovery_time
    m = monitor_arrays(states)
    end = segs[-1][1].final
    return PeriodRecord(
        index=n,
        start=t0,
        measurement=rec,
        recovered=recovered,
        reached=reached,
        recovery_time=used,
        n_samples=int(times.size),
        violations=int(np.count_nonzero(~ok & ~exempt)),
        max_p_fail=float(m["p_fail"].max()),
        min_coherence=float(m["coherence"].min()),
        min_purity=float(m["purity"].min()),
        end_state=end,
        end_in_domain=bool(ok[-1]),
        segments=segs if keep else [],
    )


# ---------------------------------------------------------------------------
# Monte Carlo


def _trial(args) -> dict:
    sc, ss = args
    return run_protocol(sc, ss).summary()


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _dist(values) -> dict:
    v = np.array([x for x in values if x is not None], dtype=float)
    if v.size == 0:
        return {"min": None, "mean": None, "median": None, "max": None}
    return {"min": float(v.min()), "mean": float(v.mean()), "median": float(np.median(v)), "max": float(v.max())}


def monte_carlo(sc: Scenario, trials: int, seed=0, workers: Optional[int] = None) -> dict:
    """Independent protocol runs with trial seeds derived from ``seed``.

    The aggregate is built in trial order, so it does not depend on
    ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    workers = default_workers() if workers is None else max(1, int(workers))
    jobs = [(sc, trial_seed(seed, i)) for i in range(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        results = [_trial(j) for j in jobs]
    periods = trials * sc.n_periods
    inst = sum(r["instant_violations"] for r in results)
    rec = sum(r["recoveries"] for r in results)
    bad = sum(r["bad_reports"] for r in results)
    return {
        "trials": trials,
        "periods_per_trial": sc.n_periods,
        "max_p_fail": _dist(r["max_p_fail"] for r in results),
        "min_coherence": _dist(r["min_coherence"] for r in results),
        "min_purity": _dist(r["min_purity"] for r in results),
        "recoveries": rec,
        "recovery_rate": rec / periods if periods else 0.0,
        "recovery_failures": sum(r["recovery_failures"] for r in results),
        "bad_report_fraction": bad / periods if periods else 0.0,
        "instant_violations": inst,
        "window_violations": sum(r["window_violations"] for r in results),
        "trials_with_violation": sum(r["instant_violations"] > 0 for r in results),
    }


# ---------------------------------------------------------------------------
# certification


@dataclass
class Certificate:
    passed: bool
    worst: float
    target: float
    objective: str
    horizon: float
    initial: BlochState
    realization: Realization
    checks: list

    def witness(self, sc: Scenario) -> Scenario:
        """A one-period scenario that replays the worst realization found."""
        plan = replace(sc.plan, period=self.horizon)
        meas = MeasurementModel(sc.measurement.axis)
        return replace(sc, plan=plan, measurement=meas, source=Fixed(self.realization), n_periods=1,
                       initial=self.initial, measure_at_start=False)


def _check(sc, s0, horizon, objective, grid, levels, max_evaluations) -> dict:
    real, loss = adversarial_search(sc.bounds, sc.kind, None, s0, horizon, objective, grid, levels, max_evaluations)
    t = sc.plan.target
    if isinstance(t, FailureProb):
        worst, bound, ok = loss, t.p0, loss <= t.p0 + CERTIFY_SLACK
    elif isinstance(t, Coherence):
        worst, bound = 1.0 - loss, t.cbar
        ok = worst >= t.cbar - CERTIFY_SLACK
    else:
        worst, bound = 1.0 - loss, t.pbar
        ok = worst >= t.pbar - CERTIFY_SLACK
    return {"passed": bool(ok), "worst": float(worst), "target": bound, "objective": objective,
            "horizon": horizon, "initial": s0, "realization": real}


def certify_bound(sc: Scenario, grid: int = 8, levels: int = 8, max_evaluations: int = 1_000_000) -> Certificate:
    """Search one period for the worst admissible realization.

    Starts from the least favourable in-domain state: |0> for failure
    targets, an equatorial pure state for coherence, and a pure state for
    purity.  Plans with a recovery fraction also get a tail check: from
    the boundary of the terminal set over the remaining ``(1 - beta) T``.
    The scenario fails on the worse of the two.
    """
    t, T = sc.plan.target, sc.plan.period
    if isinstance(t, FailureProb):
        checks = [_check(sc, EXCITED, T, "failure", grid, levels, max_evaluations)]
        if sc.plan.beta > 0 and sc.plan.alpha > 0:
            pe = sc.plan.alpha * t.p0
            s0 = BlochState(2.0 * math.sqrt(pe * (1.0 - pe)), 0.0, 1.0 - 2.0 * pe)
            checks.append(_check(sc, s0, (1.0 - sc.plan.beta) * T, "failure", grid, levels, max_evaluations))
    elif isinstance(t, Coherence):
        checks = [_check(sc, BlochState(1.0, 0.0, 0.0), T, "coherence", grid, levels, max_evaluations)]
    elif isinstance(t, Purity):
        checks = [_check(sc, EXCITED, T, "purity", grid, levels, max_evaluations)]
    else:
        raise TypeError(f"unknown target {t!r}")
    failing = [c for c in checks if not c["passed"]]
    key = checks[0] if not failing else failing[0]
    return Certificate(
        passed=not failing,
        worst=key["worst"],
        target=key["target"],
        objective=key["objective"],
        horizon=key["horizon"],
        initial=key["initial"],
        realization=key["realization"],
        checks=[{k: c[k] for k in ("passed", "worst", "target", "horizon")} for c in checks],
    )
