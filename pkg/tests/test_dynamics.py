import math

import numpy as np
import pytest

import oracles as O
from sampled_qubit.bloch import EXCITED, BlochState, Decoherence, UncertaintyBounds, UnphysicalStateError
from sampled_qubit.dynamics import (
    ControlSignal,
    PiecewiseConstant,
    bloch_rhs,
    decay_oracle,
    integrate,
    propagate_constant_closed,
    step_grid,
)
from sampled_qubit.uncertainty import InadmissibleRealization, Realization, nominal, random_uniform, worst_case_structured

FREE = UncertaintyBounds(epsilon=0.2)


def resonant_x(eps):
    # eps I_x in the frame co-rotating with the free precession
    return worst_case_structured(UncertaintyBounds(0.0, eps), Decoherence.CLOSED)


def lab_constant(omega_bar, eps, phi0):
    b = UncertaintyBounds(abs(omega_bar), eps)
    return Realization(b, PiecewiseConstant.constant(omega_bar), PiecewiseConstant.constant(eps),
                       PiecewiseConstant.constant(phi0))


def test_rhs_examples():
    # drive eps_x = 0.2 only: the field is (0.2, 0, 1) in the lab at t = 0
    real = lab_constant(0.0, 0.2, math.pi / 2)
    assert bloch_rhs(EXCITED, 0.0, None, real, Decoherence.CLOSED) == pytest.approx([0, -0.2, 0], abs=1e-15)
    ad = UncertaintyBounds(epsilon=0.2, gamma0=1.0)
    assert bloch_rhs(EXCITED, 0.0, None, nominal(ad), Decoherence.AMPLITUDE_DAMPING) == pytest.approx([0, 0, -2])
    assert bloch_rhs(BlochState(1, 0, 0), 0.0, None, nominal(ad), Decoherence.DEPOLARIZING) == pytest.approx([-4, 1, 0])


@pytest.mark.parametrize("kind", list(Decoherence))
def test_rhs_matches_lindblad(kind):
    rng = np.random.default_rng(kind.code)
    b = UncertaintyBounds(0.3, 0.7) if kind is Decoherence.CLOSED else UncertaintyBounds(0.3, 0.7, 1.2, 0.4)
    for i in range(20):
        real = random_uniform(b, 0.1, i, 1.0)
        v = rng.normal(size=3)
        v *= rng.random() / np.linalg.norm(v)
        s = BlochState(*v)
        u = rng.normal(size=3)
        ctrl = ControlSignal(*(PiecewiseConstant.constant(c) for c in u))
        t = rng.uniform(0, 1)
        om, ex, ey, dg = real.fields_at(t)
        want = O.bloch_derivative(v, (ex + u[0], ey + u[1], 1 + om + u[2]), kind.value, b.gamma0 + dg)
        assert bloch_rhs(s, t, ctrl, real, kind) == pytest.approx(want, abs=1e-13)


def test_rhs_rejects_inadmissible():
    real = lab_constant(0.0, 0.2, 0.0)
    object.__setattr__(real, "eps_mag", PiecewiseConstant.constant(0.3))
    with pytest.raises(InadmissibleRealization):
        bloch_rhs(EXCITED, 0.0, None, real, Decoherence.CLOSED)


def test_integrate_closed_resonant_cos():
    tr = integrate(EXCITED, None, resonant_x(0.2), Decoherence.CLOSED, 1.00168, 1e-4)
    assert tr.times[-1] == 1.00168
    # z = cos(eps t) exactly for the resonant drive
    assert tr.final.z == pytest.approx(math.cos(0.2 * 1.00168), abs=1e-12)
    assert tr.final.z == pytest.approx(0.98, abs=1e-8 + 1.4e-6)


def test_integrate_amplitude_decay():
    b = UncertaintyBounds(epsilon=0.2, gamma0=1.0, hamiltonian=False)
    tr = integrate(EXCITED, None, nominal(b), Decoherence.AMPLITUDE_DAMPING, 0.0100503, 1e-6)
    assert tr.final.z == pytest.approx(2 * math.exp(-0.0100503) - 1, abs=1e-12)
    assert tr.final.z == pytest.approx(0.98, abs=1e-6)


def test_integrate_zero_horizon():
    tr = integrate(EXCITED, None, nominal(FREE), Decoherence.CLOSED, 0.0)
    assert len(tr) == 1 and tr.final == EXCITED


def test_integrate_argument_checks():
    with pytest.raises(ValueError):
        integrate(EXCITED, None, nominal(FREE), Decoherence.CLOSED, 1.0, dt=0.0)
    with pytest.raises(ValueError):
        integrate(EXCITED, None, nominal(FREE), Decoherence.CLOSED, 1.0, dt=2.0)
    with pytest.raises(ValueError):
        integrate(EXCITED, None, nominal(FREE), Decoherence.CLOSED, -1.0)


def test_integrate_short_final_step_and_snapping():
    real = random_uniform(UncertaintyBounds(0.1, 0.2), 0.03, 5, 0.1)
    tr = integrate(EXCITED, None, real, Decoherence.CLOSED, 0.1, 0.007)
    assert np.all(np.diff(tr.times) > 0)
    assert tr.times[-1] == 0.1
    for bp in (0.03, 0.06, 0.09):
        assert np.min(np.abs(tr.times - bp)) < 1e-15


def test_step_grid():
    g = step_grid(0.0, 1.0, 0.3, [0.5])
    assert g == pytest.approx([0.0, 0.3, 0.5, 0.8, 1.0])
    assert step_grid(1.0, 1.0, 0.1).tolist() == [1.0]


def test_unphysical_aborts():
    # a huge step blows RK4 out of the ball
    with pytest.raises(UnphysicalStateError, match="reduce dt"):
        integrate(EXCITED, None, lab_constant(0.0, 0.2, 0.0), Decoherence.CLOSED, 10.0, dt=5.0)


@pytest.mark.parametrize("kind", [Decoherence.AMPLITUDE_DAMPING, Decoherence.PHASE_DAMPING, Decoherence.DEPOLARIZING])
def test_integrate_matches_density_oracle(kind):
    b = UncertaintyBounds(0.2, 0.5, 1.0, 0.5)
    base = random_uniform(b, 0.125, 11, 1.0)
    real = Realization(b, base.omega, base.eps_mag, base.eps_phase, base.dgamma, phase_rate=-1.0)
    s0 = BlochState(0.3, 0.6, -0.7)
    tr = integrate(s0, None, real, kind, 1.0, 1e-4)
    assert tr.final.as_array() == pytest.approx(O.solve_density(s0.as_array(), real, kind.value, 1.0), abs=1e-10)


def test_closed_form_examples():
    assert propagate_constant_closed(0.0, 0.2, math.pi / 2, 0.0).as_array() == pytest.approx([0, 0, 1])
    v = math.sqrt(0.9 ** 2 + 0.2 ** 2)
    assert propagate_constant_closed(-0.1, 0.2, math.pi / 2, math.pi / v).z == pytest.approx((0.81 - 0.04) / 0.85, abs=1e-12)
    assert (0.81 - 0.04) / 0.85 == pytest.approx(0.905882, abs=1e-6)


def test_closed_form_matches_rodrigues_and_liouvillian():
    rng = np.random.default_rng(8)
    for _ in range(20):
        w, e, p, t = rng.uniform(-0.5, 0.5), rng.uniform(0.05, 2), rng.uniform(0, 2 * math.pi), rng.uniform(0, 5)
        got = propagate_constant_closed(w, e, p, t).as_array()
        assert got == pytest.approx(O.rodrigues_closed(w, e, p, [t])[0], abs=1e-13)
        b = (e * math.sin(p), e * math.cos(p), 1 + w)
        assert got == pytest.approx(O.constant_field_state([0, 0, 1], b, "closed", 0.0, t), abs=1e-12)


def test_integrate_matches_closed_form():
    rng = np.random.default_rng(2)
    for _ in range(5):
        w, e, p = rng.uniform(-0.5, 0.5), rng.uniform(0.05, 2), rng.uniform(0, 2 * math.pi)
        tr = integrate(EXCITED, None, lab_constant(w, e, p), Decoherence.CLOSED, 1.0, 1e-5)
        ref = O.rodrigues_closed(w, e, p, tr.times)
        assert np.max(np.abs(tr.states - ref)) <= 1e-8


def test_fourth_order_convergence():
    w, e, p = 0.3, 1.5, 0.7
    real = lab_constant(w, e, p)
    errs = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        tr = integrate(EXCITED, None, real, Decoherence.CLOSED, 1.0, dt)
        errs.append(np.max(np.abs(tr.states - O.rodrigues_closed(w, e, p, tr.times))))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert min(ratios) >= 8.0


def test_closed_norm_conserved():
    real = random_uniform(UncertaintyBounds(0.1, 0.2), 0.5, 3, 10.0)
    s0 = BlochState(0.6, 0.0, 0.8)
    tr = integrate(s0, None, real, Decoherence.CLOSED, 10.0, 1e-4)
    assert np.max(np.abs(np.linalg.norm(tr.states, axis=1) - 1.0)) <= 1e-9


def test_decay_oracle_examples():
    assert decay_oracle(Decoherence.AMPLITUDE_DAMPING, 1.0, 0.0) == 1.0
    assert decay_oracle(Decoherence.PHASE_DAMPING, 1.0, math.log(2) / 4) == pytest.approx(0.5)
    assert decay_oracle(Decoherence.DEPOLARIZING, 1.0, 0.0131713) == pytest.approx(0.9, abs=2e-5)
    with pytest.raises(ValueError):
        decay_oracle(Decoherence.CLOSED, 1.0, 1.0)


@pytest.mark.parametrize("g", [0.1, 1.0, 2.0])
def test_decay_oracles_match_integrate(g):
    b = UncertaintyBounds(epsilon=0.2, gamma0=g, hamiltonian=False)
    times = None
    tr = integrate(EXCITED, None, nominal(b), Decoherence.AMPLITUDE_DAMPING, 1.0, 1e-5)
    times = tr.times[::1000]
    assert tr.states[::1000, 2] == pytest.approx([decay_oracle(Decoherence.AMPLITUDE_DAMPING, g, t) for t in times], abs=1e-8)
    eq = BlochState(0.6, 0.8, 0.0)
    tr = integrate(eq, None, nominal(b), Decoherence.PHASE_DAMPING, 1.0, 1e-5)
    assert tr.coherence[::1000] == pytest.approx([decay_oracle(Decoherence.PHASE_DAMPING, g, t) for t in times], abs=1e-8)
    tr = integrate(eq, None, nominal(b), Decoherence.DEPOLARIZING, 1.0, 1e-5)
    r2 = np.sum(tr.states[::1000] ** 2, axis=1)
    assert r2 == pytest.approx([decay_oracle(Decoherence.DEPOLARIZING, g, t) for t in times], abs=1e-8)


def test_monotone_comparison_against_resonant_reference():
    # z under any admissible realization never drops below z under the worst case eps I_x
    eps = 0.2
    b = UncertaintyBounds(0.1, eps)
    horizon = 0.95 * math.pi / eps
    ref = integrate(EXCITED, None, resonant_x(eps), Decoherence.CLOSED, horizon, 1e-3)
    for seed in range(200):
        real = random_uniform(b, 0.5, seed, horizon)
        tr = integrate(EXCITED, None, real, Decoherence.CLOSED, horizon, 1e-3)
        zref = np.cos(eps * tr.times)
        assert np.all(tr.states[:, 2] >= zref - 1e-6)
    assert ref.final.z == pytest.approx(math.cos(eps * horizon), abs=1e-9)


def test_piecewise_constant():
    pc = PiecewiseConstant((0.0, 1.0, 2.0), (5.0, 6.0, 7.0))
    assert pc(0.5) == 5.0 and pc(1.0) == 6.0 and pc(10.0) == 7.0
    assert list(pc(np.array([0.0, 1.5, 2.5]))) == [5.0, 6.0, 7.0]
    assert PiecewiseConstant.from_dict(pc.to_dict()) == pc
    with pytest.raises(ValueError):
        PiecewiseConstant((0.0, 0.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        PiecewiseConstant((0.0,), (1.0, 2.0))


def test_trajectory_monitors():
    tr = integrate(BlochState(1, 0, 0), None, nominal(UncertaintyBounds(epsilon=0.2, gamma0=1.0)),
                   Decoherence.PHASE_DAMPING, 0.1, 0.01)
    assert tr.coherence[0] == 1.0
    assert np.all(np.diff(tr.coherence) < 0)
    assert tr.purity == pytest.approx((1 + tr.coherence + tr.states[:, 2] ** 2) / 2)
