import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as O
from sampled_qubit.bloch import EXCITED, BlochState, Decoherence, UncertaintyBounds
from sampled_qubit.dynamics import ControlSignal, PiecewiseConstant, integrate
from sampled_qubit.uncertainty import (
    InadmissibleRealization,
    Realization,
    SearchBudgetExceeded,
    adversarial_search,
    nominal,
    random_uniform,
    search_space_size,
    worst_case_structured,
)

BOUNDS = UncertaintyBounds(0.1, 0.2, 0.9, 0.1)


def test_nominal_is_zero():
    r = nominal(BOUNDS)
    assert r.fields_at(3.0) == (0.0, 0.0, 0.0, 0.0)


def test_admissibility_checks():
    with pytest.raises(InadmissibleRealization):
        Realization(BOUNDS, omega=PiecewiseConstant.constant(0.2))
    with pytest.raises(InadmissibleRealization):
        Realization(BOUNDS, eps_mag=PiecewiseConstant.constant(0.3))
    with pytest.raises(InadmissibleRealization):
        Realization(BOUNDS, eps_phase=PiecewiseConstant.constant(2 * math.pi))
    with pytest.raises(InadmissibleRealization):
        Realization(BOUNDS, dgamma=PiecewiseConstant.constant(-0.2))
    free = UncertaintyBounds(0.1, 0.2, 0.9, 0.1, hamiltonian=False)
    with pytest.raises(InadmissibleRealization):
        Realization(free, eps_mag=PiecewiseConstant.constant(0.1))


def test_structured_worst_closed_cos():
    b = UncertaintyBounds(0.0, 0.2)
    tr = integrate(EXCITED, None, worst_case_structured(b, Decoherence.CLOSED), Decoherence.CLOSED, 2.0, 1e-4)
    assert tr.states[:, 2] == pytest.approx(np.cos(0.2 * tr.times), abs=1e-12)


def test_structured_worst_fields():
    r = worst_case_structured(BOUNDS, Decoherence.AMPLITUDE_DAMPING)
    om, ex, ey, dg = r.fields_at(0.0)
    assert (om, dg) == (-0.1, 0.1)
    assert math.hypot(ex, ey) == pytest.approx(0.2)
    assert worst_case_structured(BOUNDS, Decoherence.CLOSED).dgamma(0.0) == 0.0


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["disk", "x", "y"]))
@settings(max_examples=40)
def test_random_uniform_admissible(seed, drive):
    r = random_uniform(BOUNDS, 0.01, seed, 0.1, drive)
    for t in np.linspace(0, 0.12, 37):
        r.check_at(float(t))
    assert len(r.breakpoints) == 9  # interior switches of 10 segments


def test_random_uniform_axis_laws():
    rx = random_uniform(BOUNDS, 0.01, 4, 1.0, "x")
    ry = random_uniform(BOUNDS, 0.01, 4, 1.0, "y")
    ts = np.arange(100) * 0.01 + 0.005
    for t in ts:
        assert abs(rx.fields_at(t)[2]) < 1e-15
        assert abs(ry.fields_at(t)[1]) < 1e-15
    # same draws, different axis
    assert [rx.fields_at(t)[1] for t in ts] == pytest.approx([ry.fields_at(t)[2] for t in ts], abs=1e-15)
    with pytest.raises(ValueError):
        random_uniform(BOUNDS, 0.01, 4, 1.0, "z")


def test_random_uniform_disk_statistics():
    r = random_uniform(UncertaintyBounds(0.1, 1.0), 1e-3, 9, 10.0)
    _, mag, ph, _ = r.step_values(np.arange(10000) * 1e-3)
    # uniform on the unit disk: E|e| = 2/3, E|e|^2 = 1/2
    assert mag.mean() == pytest.approx(2 / 3, abs=0.01)
    assert (mag ** 2).mean() == pytest.approx(0.5, abs=0.01)
    assert ph.mean() == pytest.approx(math.pi, abs=0.05)


def test_random_uniform_deterministic():
    a = random_uniform(BOUNDS, 0.01, 123, 1.0)
    b = random_uniform(BOUNDS, 0.01, 123, 1.0)
    assert a == b
    assert a != random_uniform(BOUNDS, 0.01, 124, 1.0)


def test_dict_round_trip():
    r = random_uniform(BOUNDS, 0.05, 1, 0.2)
    r2 = Realization(BOUNDS, r.omega, r.eps_mag, r.eps_phase, r.dgamma, -1.0)
    assert Realization.from_dict(BOUNDS, r2.to_dict()) == r2
    with pytest.raises(ValueError):
        Realization.from_dict(BOUNDS, {"bogus": 1})


def test_search_space_size():
    assert search_space_size(BOUNDS, Decoherence.AMPLITUDE_DAMPING) == 9 * 4 ** 8
    assert search_space_size(BOUNDS, Decoherence.CLOSED) == 9 * 2 ** 8
    free = UncertaintyBounds(0.1, 0.2, 0.9, 0.1, hamiltonian=False)
    assert search_space_size(free, Decoherence.PHASE_DAMPING) == 2 ** 8


def test_budget_exceeded():
    with pytest.raises(SearchBudgetExceeded) as info:
        adversarial_search(BOUNDS, Decoherence.AMPLITUDE_DAMPING, None, EXCITED, 0.01, grid=10)
    assert info.value.required == 9 * 4 ** 10


def test_rejects_control():
    ctrl = ControlSignal(PiecewiseConstant.constant(1.0), PiecewiseConstant.constant(0.0), PiecewiseConstant.constant(0.0))
    with pytest.raises(ValueError):
        adversarial_search(BOUNDS, Decoherence.AMPLITUDE_DAMPING, ctrl, EXCITED, 0.01)


def _loss(r, objective):
    x, y, z = r
    return {"failure": (1 - z) / 2, "coherence": 1 - x * x - y * y, "purity": (1 - x * x - y * y - z * z) / 2}[objective]


@pytest.mark.parametrize("kind,objective,s0", [
    (Decoherence.CLOSED, "failure", (0, 0, 1)),
    (Decoherence.AMPLITUDE_DAMPING, "failure", (0, 0, 1)),
    (Decoherence.PHASE_DAMPING, "coherence", (1, 0, 0)),
    (Decoherence.DEPOLARIZING, "purity", (0, 0, 1)),
])
def test_search_matches_brute_force_oracle(kind, objective, s0):
    b = UncertaintyBounds(0.3, 0.8, 0.5, 0.3) if kind is not Decoherence.CLOSED else UncertaintyBounds(0.3, 0.8)
    s0 = BlochState(*s0)
    horizon, grid, levels = 0.6, 2, 3
    real, value = adversarial_search(b, kind, None, s0, horizon, objective, grid, levels)
    # the returned witness reproduces the value under an independent Lindblad solve
    assert _loss(O.solve_density(s0.as_array(), real, kind.value, horizon), objective) == pytest.approx(value, abs=1e-10)
    # exhaustive enumeration of the same space with the oracle
    omegas = [-0.3, 0.3]
    dgs = [-0.3, 0.3] if kind is not Decoherence.CLOSED else [0.0]
    drives = [(0.8, 2 * math.pi * k / levels) for k in range(levels)] + [(0.0, 0.0)]
    best = -1.0
    h = horizon / grid
    for (mag, ph), segs in itertools.product(drives, itertools.product(itertools.product(omegas, dgs), repeat=grid)):
        cand = Realization(
            b,
            omega=PiecewiseConstant.from_segments(h, [s[0] for s in segs]),
            eps_mag=PiecewiseConstant.constant(mag),
            eps_phase=PiecewiseConstant.constant(ph),
            dgamma=PiecewiseConstant.from_segments(h, [s[1] for s in segs]),
            phase_rate=-1.0 if mag else 0.0,
        )
        best = max(best, _loss(O.solve_density(s0.as_array(), cand, kind.value, horizon), objective))
    assert value == pytest.approx(best, abs=1e-10)


def test_search_witness_replays_through_rk4():
    real, value = adversarial_search(BOUNDS, Decoherence.AMPLITUDE_DAMPING, None, EXCITED, 0.0096, grid=4, levels=4)
    tr = integrate(EXCITED, None, real, Decoherence.AMPLITUDE_DAMPING, 0.0096, 1e-5)
    assert (1 - tr.final.z) / 2 == pytest.approx(value, abs=1e-12)
    # maximiser pushes the coupling up on every segment
    assert all(v == pytest.approx(0.1) for v in real.dgamma._v)


def test_search_dominates_random_realizations():
    b = UncertaintyBounds(0.1, 0.2)
    T = 1.0017
    _, value = adversarial_search(b, Decoherence.CLOSED, None, EXCITED, T)
    worst_random = 0.0
    for seed in range(50):
        tr = integrate(EXCITED, None, random_uniform(b, T / 8, seed, T), Decoherence.CLOSED, T, 1e-3)
        worst_random = max(worst_random, (1 - tr.final.z) / 2)
    assert worst_random <= value


def test_search_free_hamiltonian_zero_is_pure_decay():
    free = UncertaintyBounds(0.1, 0.2, 0.9, 0.1, hamiltonian=False)
    real, value = adversarial_search(free, Decoherence.PHASE_DAMPING, None, BlochState(1, 0, 0), 0.0128, "coherence")
    assert value == pytest.approx(1 - math.exp(-4 * 1.0 * 0.0128), abs=1e-12)
    assert real.eps_mag(0.0) == 0.0


@pytest.mark.parametrize("eps,T", [(0.2, 0.0096), (math.sqrt(2), 0.0075), (1.0, 0.05)])
def test_search_respects_comparison_bound(eps, T):
    b = UncertaintyBounds(0.1, eps, 0.9, 0.1)
    _, value = adversarial_search(b, Decoherence.AMPLITUDE_DAMPING, None, EXCITED, T, grid=6, levels=6)
    ub = O.ad_failure_upper_bound(eps, 1.0, 0.0, T)
    # decay alone at the top coupling is a lower bound
    assert 1 - math.exp(-T) - 1e-12 <= value <= ub
