"""Scenario files: YAML documents mapped onto `Scenario` and back.

Example::

    kind: closed
    bounds: {omega: 0.1, epsilon: 0.2}
    target: {failure_prob: 0.01}
    plan: {formula: Tc, beta: 0.05, alpha: 2.5e-3, eta: 0.8}
    recovery: {lyapunov: {k_y: 1000}}
    realization: {random: {segment_len: 1.0e-3}}
    n_periods: 10
    dt: 1.0e-4
    recovery_dt: 1.0e-6

``plan.formula`` designs the period from the bounds and target; an
explicit ``plan.period`` overrides it.  ``plan.scale`` multiplies the
period.  Unknown keys are errors at every level.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import yaml

from .bloch import BlochState, Coherence, Decoherence, FailureProb, Purity, UncertaintyBounds
from .control import Constant, Lyapunov, LyapunovGains
from .design import FormulaId, SamplingPlan, evaluate, to_physical
from .measurement import MeasurementModel
from .sampled_loop import Fixed, Nominal, Random, Scenario, StructuredWorst
from .uncertainty import Realization


class ConfigError(ValueError):
    pass


_TOP = {"kind", "bounds", "target", "plan", "measurement", "recovery", "realization", "n_periods", "dt",
        "recovery_dt", "initial", "measure_at_start", "output", "physical_unit_rad_per_s"}
_RATES = {"eps", "gamma0", "gamma"}


def _keys(d: Any, allowed: set, where: str, required: set = frozenset()) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(d).__name__}")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")
    return d


def _one_of(d: Any, allowed: set, where: str) -> tuple[str, Any]:
    if isinstance(d, str):
        d = {d: None}
    _keys(d, allowed, where)
    if len(d) != 1:
        raise ConfigError(f"{where}: give exactly one of {sorted(allowed)}")
    return next(iter(d.items()))


def _target(d) -> object:
    name, v = _one_of(d, {"failure_prob", "coherence", "purity"}, "target")
    return {"failure_prob": FailureProb, "coherence": Coherence, "purity": Purity}[name](float(v))


def _target_kw(target) -> dict:
    if isinstance(target, FailureProb):
        return {"p0": target.p0}
    if isinstance(target, Coherence):
        return {"cbar": target.cbar}
    return {"pbar": target.pbar}


def _plan(d, target, bounds: UncertaintyBounds) -> SamplingPlan:
    _keys(d, {"formula", "period", "scale", "beta", "alpha", "eta"}, "plan", {"formula"})
    fid = FormulaId(d["formula"])
    if "period" in d:
        period = float(d["period"])
    else:
        period = evaluate(fid, eps=bounds.epsilon, gamma0=bounds.gamma0, gamma=bounds.gamma, **_target_kw(target))
    period *= float(d.get("scale", 1.0))
    return SamplingPlan(period, target, fid, float(d.get("beta", 0.0)), float(d.get("alpha", 0.0)),
                        float(d.get("eta", 1.0)))


def _recovery(d):
    if d is None:
        return None
    name, v = _one_of(d, {"lyapunov", "constant"}, "recovery")
    if name == "lyapunov":
        _keys(v, {"k_x", "k_y", "k_z", "shaping"}, "recovery.lyapunov")
        return Lyapunov(LyapunovGains(float(v.get("k_x", 0)), float(v.get("k_y", 0)), float(v.get("k_z", 0)),
                                      v.get("shaping", "identity")))
    _keys(v, {"u", "axis"}, "recovery.constant", {"u"})
    return Constant(float(v["u"]), str(v.get("axis", "y")))


def _source(d, bounds):
    name, v = _one_of(d, {"nominal", "structured_worst", "random", "fixed"}, "realization")
    if name == "nominal":
        return Nominal()
    if name == "structured_worst":
        return StructuredWorst()
    if name == "random":
        v = _keys(v or {}, {"segment_len", "drive"}, "realization.random")
        return Random(float(v.get("segment_len", 1e-3)), str(v.get("drive", "disk")))
    return Fixed(Realization.from_dict(bounds, v))


def scenario_from_dict(d: dict) -> Scenario:
    _keys(d, _TOP, "scenario", {"kind", "bounds", "target", "plan"})
    b = _keys(d["bounds"], {"omega", "epsilon", "gamma0", "gamma", "hamiltonian"}, "bounds")
    bounds = UncertaintyBounds(float(b.get("omega", 0)), float(b.get("epsilon", 0.2)), float(b.get("gamma0", 0)),
                               float(b.get("gamma", 0)), bool(b.get("hamiltonian", True)))
    target = _target(d["target"])
    plan = _plan(d["plan"], target, bounds)
    m = _keys(d.get("measurement", {}), {"axis", "p01", "p10"}, "measurement")
    meas = MeasurementModel(m.get("axis", "z"), float(m.get("p01", 0)), float(m.get("p10", 0)))
    initial = d.get("initial", [0.0, 0.0, 1.0])
    if not isinstance(initial, (list, tuple)) or len(initial) != 3:
        raise ConfigError("initial: expected [x, y, z]")
    _keys(d.get("output", {}), {"trajectory", "report"}, "output")
    if "physical_unit_rad_per_s" in d:
        _keys(d["physical_unit_rad_per_s"], _RATES, "physical_unit_rad_per_s")
    rdt = d.get("recovery_dt")
    return Scenario(
        kind=Decoherence(d["kind"]),
        bounds=bounds,
        plan=plan,
        measurement=meas,
        recovery=_recovery(d.get("recovery")),
        source=_source(d.get("realization", "nominal"), bounds),
        n_periods=int(d.get("n_periods", 1)),
        dt=float(d.get("dt", 1e-4)),
        initial=BlochState.from_array(initial),
        recovery_dt=None if rdt is None else float(rdt),
        measure_at_start=bool(d.get("measure_at_start", True)),
    )


def load_document(path) -> dict:
    try:
        with open(path) as fh:
            d = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return d


def load_scenario(path) -> tuple[Scenario, dict]:
    """Parse a scenario file; returns the scenario and the raw document."""
    d = load_document(path)
    try:
        return scenario_from_dict(d), d
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def physical_period(doc: dict, sc: Scenario) -> Optional[float]:
    """Designed period in seconds when the document carries physical rates."""
    rates = doc.get("physical_unit_rad_per_s")
    if not rates:
        return None
    return to_physical(sc.plan.formula_id, **_target_kw(sc.plan.target), **rates)


def scenario_to_dict(sc: Scenario) -> dict:
    """Inverse of `scenario_from_dict`; floats are kept at full precision."""
    b = sc.bounds
    t = sc.plan.target
    tkey = {FailureProb: "failure_prob", Coherence: "coherence", Purity: "purity"}[type(t)]
    d = {
        "kind": sc.kind.value,
        "bounds": {"omega": b.omega, "epsilon": b.epsilon, "gamma0": b.gamma0, "gamma": b.gamma,
                   "hamiltonian": b.hamiltonian},
        "target": {tkey: next(iter(_target_kw(t).values()))},
        "plan": {"formula": sc.plan.formula_id.value, "period": sc.plan.period, "beta": sc.plan.beta,
                 "alpha": sc.plan.alpha, "eta": sc.plan.eta},
        "measurement": {"axis": sc.measurement.axis.value, "p01": sc.measurement.p01, "p10": sc.measurement.p10},
        "n_periods": sc.n_periods,
        "dt": sc.dt,
        "initial": [sc.initial.x, sc.initial.y, sc.initial.z],
        "measure_at_start": sc.measure_at_start,
    }
    if sc.recovery_dt is not None:
        d["recovery_dt"] = sc.recovery_dt
    r = sc.recovery
    if isinstance(r, Lyapunov):
        g = r.gains
        d["recovery"] = {"lyapunov": {"k_x": g.k_x, "k_y": g.k_y, "k_z": g.k_z, "shaping": g.shaping}}
    elif isinstance(r, Constant):
        d["recovery"] = {"constant": {"u": r.u, "axis": r.axis}}
    src = sc.source
    if isinstance(src, Nominal):
        d["realization"] = "nominal"
    elif isinstance(src, StructuredWorst):
        d["realization"] = "structured_worst"
    elif isinstance(src, Random):
        d["realization"] = {"random": {"segment_len": src.segment_len, "drive": src.drive}}
    else:
        d["realization"] = {"fixed": src.realization.to_dict()}
    return d


def dump_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(sc), sort_keys=False))
