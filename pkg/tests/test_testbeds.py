import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from autocontrol_lab.errors import ConfigurationError, DomainError
from autocontrol_lab.lattice import hs_norm
from autocontrol_lab.testbeds import (
    ScalarOdeConfig, ShellConfig, complex_step_derivative, estimate_blowup_time, integrate_kp,
    integrate_ode, kp_hs_norm, kp_rhs, kp_to_lattice, ode_analytic, ode_scaled_analytic,
    ode_transformed_analytic, scaled_config, scaled_residual, transformed_residual,
)


def test_ode_solution_one_over_one_minus_t():
    cfg = ScalarOdeConfig()
    ts, xs = integrate_ode(cfg, 0.9, 1e-4)
    np.testing.assert_allclose(xs, 1 / (1 - ts), rtol=1e-8)
    assert ode_analytic(cfg, 0.5) == 2.0
    with pytest.raises(DomainError):
        ode_analytic(cfg, 1.0)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_blowup_time_formula(x0, lam):
    cfg = ScalarOdeConfig(x0, lam)
    assert cfg.blowup_time == pytest.approx(1 / (lam * x0))


def test_blowup_estimate_near_analytic():
    est = estimate_blowup_time(ScalarOdeConfig(), dt=1e-4)
    # the threshold 1e4 is reached at t = 1 - 1e-4
    assert est["estimate"] == pytest.approx(1 - 1e-4, abs=1e-6)


def test_negative_data_never_blows_up():
    assert ScalarOdeConfig(-1.0).blowup_time == math.inf
    with pytest.raises(ConfigurationError):
        ScalarOdeConfig(0.0)


def test_transformed_solution_is_one_plus_s_squared():
    s = np.linspace(0, 5, 101)
    np.testing.assert_allclose(ode_transformed_analytic(ScalarOdeConfig(), s), 1 + s * s, rtol=1e-12)


@given(st.floats(0.0, 3.0))
def test_transformed_residual_small_for_any_t0(t0):
    cfg = ScalarOdeConfig(x0=1.0 / (1.0 + 2 * t0), lam_ode=0.5, t0=t0)
    assert transformed_residual(cfg, np.linspace(0, 5, 51)) < 1e-8


def test_complex_step_derivative():
    assert complex_step_derivative(np.sin, np.array([0.3]))[0] == pytest.approx(math.cos(0.3), rel=1e-15)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_scaled_family(lam):
    s = np.linspace(0, 5, 51)
    assert scaled_residual(lam, s, power=2) < 1e-8
    cfg = scaled_config(lam)
    np.testing.assert_allclose(ode_transformed_analytic(cfg, s), ode_scaled_analytic(lam, s), rtol=1e-12)


def test_scaled_family_linear_coefficient_fails_off_unity():
    s = np.linspace(0, 5, 51)
    assert scaled_residual(1.0, s, power=1) < 1e-8
    assert scaled_residual(0.5, s, power=1) > 1e-2


def test_kp_rhs_hand_computed():
    cfg = ShellConfig(m_max=2, K0=(1.0, 2.0, 3.0))
    K = cfg.initial()
    # m=0: -1;  m=1: -2 + 1·1 - 2·2·1;  m=2: -3 + 2·4 - 4·3·2
    np.testing.assert_allclose(kp_rhs(K, cfg), [-1.0, -5.0, -19.0])


def test_kp_norm_and_lattice_embedding():
    cfg = ShellConfig(m_max=3, K0=(1.0, -0.5, 0.25))
    K = cfg.initial()
    v = kp_to_lattice(K, cfg)
    assert v.M == 8 and v.amplitude(0, (2,)) == -0.5
    for s in (0.0, 1.0, 5.0):
        assert kp_hs_norm(K, cfg, s) == pytest.approx(hs_norm(v, s), rel=1e-14)


def test_shell_config_validation():
    with pytest.raises(ConfigurationError):
        ShellConfig(s_visc=0)
    with pytest.raises(ConfigurationError):
        ShellConfig(m_max=1, K0=(1, 2, 3))
    with pytest.raises(ConfigurationError):
        kp_to_lattice(np.zeros(3), ShellConfig(mu_kp=1.5, m_max=2))


def test_kp_negative_data_blows_up_positive_decays():
    run = integrate_kp(ShellConfig(), t_end=5.0, dt=1e-3)
    assert run.event is not None and run.event.reason == "threshold"
    calm = integrate_kp(ShellConfig(K0=(1.0,)), t_end=5.0, dt=1e-3)
    assert calm.event is None
    assert calm.series.l2()[-1] < calm.series.l2()[0]
