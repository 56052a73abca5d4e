import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcrnorm.odeint import IntegrationError, IntegratorConfig, integrate


def decay(t, y):
    return -y


def test_exponential_decay_tight():
    t = np.linspace(0, 2, 11)
    for method, tol in (("RK45", 1e-12), ("RK89", 1e-14)):
        sol = integrate(decay, [1.0], t, IntegratorConfig(method, abs_tol=1e-14, rel_tol=1e-12))
        assert np.max(np.abs(sol.states[:, 0] - np.exp(-t))) < tol
        assert np.array_equal(sol.times, t)


def test_harmonic_oscillator_energy():
    def rhs(t, y):
        return np.array([y[1], -y[0]])

    t = np.linspace(0, 20, 5)
    sol = integrate(rhs, [1.0, 0.0], t, IntegratorConfig("RK89", abs_tol=1e-13, rel_tol=1e-12))
    assert np.allclose(sol.states[:, 0], np.cos(t), atol=1e-9)


def test_linear_invariant_is_preserved():
    # y1 + y2 + y3 is conserved by the right-hand side
    def rhs(t, y):
        r1, r2 = 0.04 * y[0], 3.0 * y[1] ** 2
        return np.array([-r1, r1 - r2, r2])

    sol = integrate(rhs, [1.0, 0.0, 0.0], np.linspace(0, 5, 21), IntegratorConfig("RK45"))
    assert np.max(np.abs(sol.states.sum(axis=1) - 1.0)) < 1e-14


def test_record_steps_returns_solver_steps():
    sol = integrate(decay, [1.0], [0.0, 5.0], IntegratorConfig("RK45"), record_steps=True)
    assert sol.times.size == sol.steps_accepted + 1
    assert sol.times[0] == 0.0 and sol.times[-1] == 5.0


def test_fixed_step_lands_on_grid():
    sol = integrate(decay, [1.0], [0.0, 0.35, 1.0], IntegratorConfig("RK45", fixed_step=0.1))
    assert sol.steps_rejected == 0
    assert np.allclose(sol.states[:, 0], np.exp(-sol.times), atol=1e-6)


def test_nan_rhs_raises_with_partial_solution():
    def rhs(t, y):
        return np.array([np.nan]) if t > 0.5 else -y

    with pytest.raises(IntegrationError) as info:
        integrate(rhs, [1.0], np.linspace(0, 1, 11), IntegratorConfig("RK45", fixed_step=0.05))
    assert info.value.partial is not None


def test_max_steps_exceeded():
    with pytest.raises(IntegrationError, match="steps"):
        integrate(decay, [1.0], [0.0, 10.0], IntegratorConfig("RK45", abs_tol=1e-14, rel_tol=1e-13, max_steps=5))


@pytest.mark.parametrize("kw", [dict(method="RK23"), dict(abs_tol=-1.0), dict(rel_tol=0.0), dict(max_steps=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_grid_must_increase():
    with pytest.raises(ValueError):
        integrate(decay, [1.0], [0.0, 1.0, 0.5])


def test_tightening_tolerance_does_not_blow_up_error():
    from mcrnorm.kinetics import bimolecular_closed_form, bimolecular_system, mass_action_rhs

    rhs = mass_action_rhs(bimolecular_system())
    exact = bimolecular_closed_form(12.0, 1.0, 0.7, 0.2, [3.5])[0]
    errs = []
    for e in range(3, 12):
        cfg = IntegratorConfig("RK45", abs_tol=10.0 ** -(e + 3), rel_tol=10.0 ** -e)
        sol = integrate(rhs, [1.0, 0.7, 0.2], [0.0, 3.5], cfg)
        errs.append(max(np.max(np.abs(sol.states[-1] - exact)), 1e-16))
    for coarse, fine in zip(errs, errs[1:]):
        assert fine <= 10 * coarse


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 50), st.floats(0.01, 5), st.floats(0.1, 2), st.floats(0.1, 2), st.sampled_from(["RK45", "RK89"]))
def test_linear_invariant_property(k1, k2, a0, b0, method):
    # A + B <=> C: A + C and B + C are both conserved
    def rhs(t, y):
        r1, r2 = k1 * y[0] * y[1], k2 * y[2]
        return np.array([-r1 + r2, -r1 + r2, r1 - r2])

    cfg = IntegratorConfig(method)
    sol = integrate(rhs, [a0, b0, 0.0], np.linspace(0, 3, 13), cfg)
    bound = 100 * (cfg.abs_tol + cfg.rel_tol * np.max(np.abs(sol.states), axis=1))
    assert np.all(np.abs(sol.states[:, 0] + sol.states[:, 2] - a0) <= bound)
    assert np.all(np.abs(sol.states[:, 1] + sol.states[:, 2] - b0) <= bound)
