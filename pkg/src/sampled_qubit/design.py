"""Sampling-period formulas, the alpha/beta sufficient conditions and unit conversion.

Every period formula is homogeneous of degree -1 in the rates, so the same
functions evaluate dimensionless periods (rates in units of the qubit
frequency) or physical periods in seconds (rates in rad/s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .bloch import Coherence, FailureProb, Purity, SlidingModeTarget

_SQRT2 = math.sqrt(2.0)
_TOL = 1e-12


class DesignError(ValueError):
    pass


class FormulaId(str, Enum):
    TC = "Tc"
    TA = "Ta"
    TA_PRIME = "TaPrime"
    TA_DOUBLE_PRIME = "TaDoublePrime"
    TP = "Tp"
    TP_PRIME = "TpPrime"
    TP_DOUBLE_PRIME = "TpDoublePrime"
    TD = "Td"

    @property
    def family(self) -> str:
        return {"Tc": "closed", "Td": "depolarizing"}.get(self.value, "amplitude" if self.value.startswith("Ta") else "phase")

    @property
    def needs_free_hamiltonian(self) -> bool:
        """True for the formulas that only hold when ``H_delta == 0``."""
        return self in (FormulaId.TA_DOUBLE_PRIME, FormulaId.TP_DOUBLE_PRIME)


def _p0(p0: float) -> None:
    if not 0 < p0 < 1:
        raise DesignError(f"p0 must lie in (0, 1), got {p0}")


def _cbar(cbar: float) -> None:
    if not 0 < cbar <= 1:
        raise DesignError(f"cbar must lie in (0, 1], got {cbar}")


def _eps(eps: float) -> None:
    if not eps > 0:
        raise DesignError(f"eps must be > 0, got {eps}")


def _coupling(gamma0: float, gamma: float, positive: bool = False) -> float:
    if gamma < 0 or gamma0 < gamma:
        raise DesignError(f"need gamma0 >= gamma >= 0, got gamma0={gamma0}, gamma={gamma}")
    g = gamma0 + gamma
    if positive and not g > 0:
        raise DesignError("gamma0 + gamma must be > 0")
    return g


def design_Tc(p0: float, eps: float) -> float:
    _p0(p0)
    _eps(eps)
    return math.acos(1.0 - 2.0 * p0) / eps


def design_Ta(p0: float, eps: float, gamma0: float, gamma: float) -> float:
    _p0(p0)
    _eps(eps)
    g = _coupling(gamma0, gamma)
    return 2.0 * p0 / (math.sqrt(4.0 * eps * eps + g * g) + g)


def ta_prime_threshold(eps: float, gamma0: float, gamma: float) -> float:
    """Largest p0 for which the refined amplitude-damping period is valid."""
    _eps(eps)
    g = _coupling(gamma0, gamma)
    return 0.5 - g / (2.0 * math.sqrt(4.0 * eps * eps + g * g))


def design_Ta_prime(p0: float, eps: float, gamma0: float, gamma: float) -> float:
    _p0(p0)
    f = ta_prime_threshold(eps, gamma0, gamma)
    if p0 > f:
        raise DesignError(f"TaPrime needs p0 <= f = {f:.9g}, got p0 = {p0}")
    g = gamma0 + gamma
    return 2.0 * p0 / (4.0 * eps * math.sqrt(p0 - p0 * p0) + 2.0 * g * (1.0 - p0))


def design_Ta_doubleprime(p0: float, gamma0: float, gamma: float) -> float:
    _p0(p0)
    g = _coupling(gamma0, gamma, positive=True)
    return -math.log1p(-p0) / g


def design_Tp(cbar: float, eps: float, gamma0: float, gamma: float) -> float:
    _cbar(cbar)
    _eps(eps)
    g = _coupling(gamma0, gamma)
    if 4.0 * g * g >= eps * eps:
        return (1.0 - cbar) / (4.0 * _SQRT2 * g)
    return (1.0 - cbar) * math.sqrt(eps * eps - 2.0 * g * g) / (2.0 * eps * eps)


def design_Tp_prime(cbar: float, gamma0: float, gamma: float) -> float:
    """Refined phase-damping period; only valid on the slice eps^2 = 2 (gamma0+gamma)^2."""
    _cbar(cbar)
    g = _coupling(gamma0, gamma, positive=True)
    return (1.0 - math.sqrt(cbar)) / (2.0 * _SQRT2 * g)


def design_Tp_doubleprime(cbar: float, gamma0: float, gamma: float) -> float:
    _cbar(cbar)
    g = _coupling(gamma0, gamma, positive=True)
    return -math.log(cbar) / (4.0 * g)


def design_Td(pbar: float, gamma0: float, gamma: float) -> float:
    if not 0.5 + _TOL <= pbar <= 1:
        raise DesignError(f"pbar must lie in [0.5 + 1e-12, 1], got {pbar}")
    g = _coupling(gamma0, gamma, positive=True)
    return -math.log(2.0 * pbar - 1.0) / (8.0 * g)


def on_tp_prime_slice(eps: float, gamma0: float, gamma: float, rtol: float = 1e-9) -> bool:
    g = gamma0 + gamma
    return abs(eps * eps - 2.0 * g * g) <= rtol * max(eps * eps, 2.0 * g * g)


def best_Ta(p0: float, eps: float, gamma0: float, gamma: float, free_hamiltonian: bool = False) -> tuple[float, FormulaId]:
    """Largest valid amplitude-damping period and the formula that produced it."""
    best = (design_Ta(p0, eps, gamma0, gamma), FormulaId.TA)
    if p0 <= ta_prime_threshold(eps, gamma0, gamma):
        best = max(best, (design_Ta_prime(p0, eps, gamma0, gamma), FormulaId.TA_PRIME), key=lambda c: c[0])
    if free_hamiltonian and gamma0 + gamma > 0:
        best = max(best, (design_Ta_doubleprime(p0, gamma0, gamma), FormulaId.TA_DOUBLE_PRIME), key=lambda c: c[0])
    return best


def alpha_bound_closed(p0: float, beta: float) -> float:
    _p0(p0)
    if not 0 <= beta < 1:
        raise DesignError(f"beta must lie in [0, 1), got {beta}")
    return (1.0 - math.cos(beta * math.acos(1.0 - 2.0 * p0))) / (2.0 * p0)


def alpha_bound_amplitude(beta: float) -> float:
    if not 0 < beta <= 1:
        raise DesignError(f"beta must lie in (0, 1], got {beta}")
    return beta


_TARGET_TYPE = {"closed": FailureProb, "amplitude": FailureProb, "phase": Coherence, "depolarizing": Purity}


@dataclass(frozen=True)
class SamplingPlan:
    period: float
    target: SlidingModeTarget
    formula_id: FormulaId
    beta: float = 0.0
    alpha: float = 0.0
    eta: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "formula_id", FormulaId(self.formula_id))
        if not self.period > 0:
            raise DesignError("period must be > 0")
        if not 0 <= self.beta < 1:
            raise DesignError(f"beta must lie in [0, 1), got {self.beta}")
        if not 0 <= self.alpha <= 1:
            raise DesignError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not 0 < self.eta <= 1:
            raise DesignError(f"eta must lie in (0, 1], got {self.eta}")
        family = self.formula_id.family
        if not isinstance(self.target, _TARGET_TYPE[family]):
            raise DesignError(f"{self.formula_id.value} needs a {_TARGET_TYPE[family].__name__} target")
        if family == "closed":
            bound = alpha_bound_closed(self.target.p0, self.beta)
            if self.alpha > bound + _TOL:
                raise DesignError(f"alpha={self.alpha} exceeds the closed-case bound {bound:.9g}")
        elif family == "amplitude":
            if self.alpha > self.beta + _TOL:
                raise DesignError(f"alpha={self.alpha} exceeds beta={self.beta}")

    @property
    def recovery_time(self) -> float:
        return self.beta * self.period

    @property
    def terminal_threshold(self) -> float:
        """Failure probability that ends a recovery: eta * alpha * p0."""
        if not isinstance(self.target, FailureProb):
            raise DesignError("terminal threshold needs a FailureProb target")
        return self.eta * self.alpha * self.target.p0


def evaluate(formula_id, *, p0=None, cbar=None, pbar=None, eps=None, gamma0=0.0, gamma=0.0) -> float:
    """Evaluate one formula by id with keyword parameters."""
    fid = FormulaId(formula_id)
    try:
        if fid is FormulaId.TC:
            return design_Tc(p0, eps)
        if fid is FormulaId.TA:
            return design_Ta(p0, eps, gamma0, gamma)
        if fid is FormulaId.TA_PRIME:
            return design_Ta_prime(p0, eps, gamma0, gamma)
        if fid is FormulaId.TA_DOUBLE_PRIME:
            return design_Ta_doubleprime(p0, gamma0, gamma)
        if fid is FormulaId.TP:
            return design_Tp(cbar, eps, gamma0, gamma)
        if fid is FormulaId.TP_PRIME:
            return design_Tp_prime(cbar, gamma0, gamma)
        if fid is FormulaId.TP_DOUBLE_PRIME:
            return design_Tp_doubleprime(cbar, gamma0, gamma)
        return design_Td(pbar, gamma0, gamma)
    except TypeError as exc:
        raise DesignError(f"{fid.value}: missing parameter") from exc


def to_physical(formula_id, **params) -> float:
    """Period in seconds from angular rates in rad/s.

    Rate keywords are ``eps``, ``gamma0`` and ``gamma``; targets pass through.
    """
    for k in ("eps", "gamma0", "gamma"):
        if params.get(k) is not None and params[k] < 0:
            raise DesignError(f"{k} must be >= 0")
    return evaluate(formula_id, **params)


def make_plan(formula_id, target: SlidingModeTarget, *, eps=None, gamma0=0.0, gamma=0.0,
              beta: float = 0.0, alpha: float = 0.0, eta: float = 1.0, scale: float = 1.0) -> SamplingPlan:
    """Design a period with ``formula_id`` for ``target`` and wrap it in a plan.

    ``scale`` multiplies the designed period (used to build deliberately bad plans).
    """
    kw = {"p0": None, "cbar": None, "pbar": None}
    if isinstance(target, FailureProb):
        kw["p0"] = target.p0
    elif isinstance(target, Coherence):
        kw["cbar"] = target.cbar
    else:
        kw["pbar"] = target.pbar
    period = evaluate(formula_id, eps=eps, gamma0=gamma0, gamma=gamma, **kw)
    return SamplingPlan(scale * period, target, FormulaId(formula_id), beta, alpha, eta)


@dataclass(frozen=True)
class DesignRow:
    formula_id: FormulaId
    period: Optional[float]
    note: str = ""
    seconds: Optional[float] = None


def design_table(p0: float, eps: float, gamma0: float, gamma: float, cbar: float, pbar: float,
                 beta: Optional[float] = None, physical: Optional[dict] = None) -> dict:
    """All applicable periods for one parameter set, with diagnostics.

    ``physical`` maps ``eps``, ``gamma0``, ``gamma`` to angular rates in
    rad/s; when given each row also carries the period in seconds.
    """
    _eps(eps)
    _coupling(gamma0, gamma)
    g = gamma0 + gamma
    rows = []

    def add(fid, fn, note=""):
        try:
            val = fn()
        except DesignError as exc:
            rows.append(DesignRow(fid, None, str(exc)))
            return
        sec = None
        if physical:
            sec = to_physical(fid, p0=p0, cbar=cbar, pbar=pbar, **physical)
        rows.append(DesignRow(fid, val, note, sec))

    add(FormulaId.TC, lambda: design_Tc(p0, eps))
    add(FormulaId.TA, lambda: design_Ta(p0, eps, gamma0, gamma))
    f = ta_prime_threshold(eps, gamma0, gamma)
    add(FormulaId.TA_PRIME, lambda: design_Ta_prime(p0, eps, gamma0, gamma), f"p0 <= f = {f:.9g}")
    add(FormulaId.TA_DOUBLE_PRIME, lambda: design_Ta_doubleprime(p0, gamma0, gamma), "H_delta == 0 only")
    branch = 1 if 4.0 * g * g >= eps * eps else 2
    add(FormulaId.TP, lambda: design_Tp(cbar, eps, gamma0, gamma), f"branch {branch}")
    if on_tp_prime_slice(eps, gamma0, gamma):
        add(FormulaId.TP_PRIME, lambda: design_Tp_prime(cbar, gamma0, gamma), "eps^2 = 2 g^2")
    else:
        rows.append(DesignRow(FormulaId.TP_PRIME, None, "needs eps^2 = 2 (gamma0+gamma)^2"))
    add(FormulaId.TP_DOUBLE_PRIME, lambda: design_Tp_doubleprime(cbar, gamma0, gamma), "H_delta == 0 only")
    add(FormulaId.TD, lambda: design_Td(pbar, gamma0, gamma))
    out = {"parameters": {"p0": p0, "eps": eps, "gamma0": gamma0, "gamma": gamma, "cbar": cbar, "pbar": pbar},
           "periods": rows}
    if beta is not None:
        out["alpha_bounds"] = {"closed": alpha_bound_closed(p0, beta), "amplitude": alpha_bound_amplitude(beta)}
    return out
