"""Robust sampled-data control of a single qubit under bounded uncertainties."""

from .bloch import (
    EXCITED,
    GROUND,
    BlochState,
    Coherence,
    Decoherence,
    FailureProb,
    PureState,
    Purity,
    UncertaintyBounds,
    UnphysicalStateError,
    coherence,
    failure_probability,
    in_domain,
    purity,
)
from .control import Constant, Lyapunov, LyapunovGains, constant_control, drive_to_subset, lyapunov_control, terminal_reached
from .design import (
    DesignError,
    FormulaId,
    SamplingPlan,
    alpha_bound_amplitude,
    alpha_bound_closed,
    best_Ta,
    design_Ta,
    design_Ta_doubleprime,
    design_Ta_prime,
    design_Tc,
    design_Td,
    design_Tp,
    design_Tp_doubleprime,
    design_Tp_prime,
    make_plan,
    to_physical,
)
from .dynamics import ControlSignal, PiecewiseConstant, Trajectory, bloch_rhs, decay_oracle, integrate, propagate_constant_closed
from .measurement import Axis, MeasurementModel, MeasurementRecord, Outcome, measure
from .sampled_loop import Fixed, Nominal, Random, Scenario, StructuredWorst, certify_bound, monte_carlo, run_protocol
from .uncertainty import Realization, SearchBudgetExceeded, adversarial_search, nominal, random_uniform, worst_case_structured

__version__ = "0.1.0"
