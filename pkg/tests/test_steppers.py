import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from autocontrol_lab.dilatation import SIGMA_HALF, DilatationChart
from autocontrol_lab.dynamics import FluidParams, burgers_nonlinear, heat_multiplier, ns_nonlinear
from autocontrol_lab.errors import ConfigurationError, NoAdmissibleStepError, NumericBlowup
from autocontrol_lab.lattice import ModeField, envelope_field, max_divergence
from autocontrol_lab.steppers import (
    ContractionConstants, QuadratureSpec, StepPlan, estimate_constants, euler_matrix, euler_step,
    gaussian_grad_constant, gaussian_grad_constant_closed, laplace_kernel_constant,
    laplace_kernel_constant_closed, make_stepper, product_constant, rk4_step, step_size_bound,
    trotter_step,
)


def _decay_rhs(v, t):
    return v.replace(-v.amps * (1.0 + np.cos(t)))


def _decay_exact(v0, t):
    return v0.amps * np.exp(-(t + np.sin(t)))


def _order(stepper, h0=0.1, T=1.0):
    v0 = ModeField(np.array([[1.0 + 0.5j, -2.0, 0.25j]]))
    errs = []
    for h in (h0, h0 / 2):
        v, t = v0, 0.0
        for k in range(int(round(T / h))):
            v = stepper(v, _decay_rhs, h, t, k)
            t += h
        errs.append(np.max(np.abs(v.amps - _decay_exact(v0, T))))
    return math.log2(errs[0] / errs[1])


def test_euler_first_order():
    assert _order(euler_step, 0.01) == pytest.approx(1.0, abs=0.05)


def test_rk4_fourth_order():
    assert _order(rk4_step, 0.1) == pytest.approx(4.0, abs=0.15)


def test_nonfinite_raises_with_step_index():
    v = ModeField(np.array([[1.0]]))
    bad = lambda u, t: u.replace(np.array([[np.inf]]))
    with pytest.raises(NumericBlowup) as ei:
        rk4_step(v, bad, 0.1, 0.0, step=7)
    assert ei.value.step == 7


def test_step_plan_validation():
    assert StepPlan(0.5, 4).horizon == 2.0
    for kw in ({"dt": 0.0, "steps": 1}, {"dt": 0.1, "steps": 0}, {"dt": 0.1, "steps": 1, "scheme": "x"}):
        with pytest.raises(ConfigurationError):
            StepPlan(**kw)


@pytest.mark.parametrize("model,n", [("ns", 2), ("ns", 3), ("burgers", 2)])
def test_euler_matrix_reproduces_nonlinear_term(model, n):
    v = envelope_field(n, 1, 1.0, 1.0, np.random.default_rng(3), solenoidal=model == "ns")
    E = euler_matrix(v, model)
    got = (E @ v.amps.reshape(-1)).reshape(v.amps.shape)
    ref = ns_nonlinear(v).amps if model == "ns" else burgers_nonlinear(v)
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_pure_heat_product_matches_multiplier():
    p = FluidParams(0.1, 1.0, 3)
    v0 = envelope_field(3, 2, 1.0, 2.0, np.random.default_rng(0))
    v, dt, k = v0, 0.01, 25
    for j in range(k):
        v = trotter_step(v, p, dt, nonlinear=False, step=j)
    ref = heat_multiplier(3, 2, 0.1, k * dt) * v0.amps
    np.testing.assert_allclose(v.amps, ref, rtol=1e-12)


def test_trotter_variants_agree_to_second_order():
    p = FluidParams(0.05, 1.0, 2)
    v = envelope_field(2, 1, 0.5, 1.0, np.random.default_rng(1))
    gaps = []
    for dt in (0.02, 0.01):
        a = trotter_step(v, p, dt, "first_order")
        b = trotter_step(v, p, dt, "exact_exp")
        gaps.append(np.max(np.abs(a.amps - b.amps)))
    assert math.log2(gaps[0] / gaps[1]) == pytest.approx(2.0, abs=0.1)


def test_trotter_keeps_structure():
    p = FluidParams(0.1, 1.0, 3)
    v = envelope_field(3, 2, 1.0, 3.0, np.random.default_rng(2))
    for k in range(20):
        v = trotter_step(v, p, 0.01, step=k)
    assert max_divergence(v) <= 1e-10 * v.norm()
    assert v.reality_defect() <= 1e-12


def test_trotter_exact_cap_and_variant_errors():
    p = FluidParams(0.1, 1.0, 3)
    v = ModeField.zeros(3, 3)  # 3 * 7^3 rows, above the dense cap
    with pytest.raises(ConfigurationError):
        trotter_step(v, p, 0.01, "exact_exp")
    with pytest.raises(ConfigurationError):
        trotter_step(v, p, 0.01, "second_order")


def test_trotter_with_chart_damps_zero_mode():
    p = FluidParams(0.1, 1.0, 2)
    v = ModeField.zeros(2, 1).with_entry(0, (0, 0), 1.0)
    ch = DilatationChart(rho=0.5)
    out = trotter_step(v, p, 0.1, chart=ch, sigma=0.0)
    assert out.amplitude(0, (0, 0)).real == pytest.approx(math.exp(-0.1))


def test_make_stepper_dispatch():
    p = FluidParams(0.1, 1.0, 2)
    v = envelope_field(2, 1, 1.0, 1.0, np.random.default_rng(0))
    step = make_stepper("trotter_first_order", p=p)
    np.testing.assert_array_equal(step(v, 0.0, 0.01, 0).amps, trotter_step(v, p, 0.01).amps)
    with pytest.raises(ConfigurationError):
        make_stepper("leapfrog")


# -- constants --------------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 4, 5])
def test_laplace_constant_quadrature_vs_closed(n):
    assert laplace_kernel_constant(n) == pytest.approx(laplace_kernel_constant_closed(n), rel=1e-10)


def test_laplace_constant_n3_value():
    # E|ω_1| on S² is 1/2 and ∫_{|x|>1} |x|^{-4}/(4π)² dx = 1/(4π)
    assert laplace_kernel_constant(3) == pytest.approx(0.5 + 1 / math.sqrt(12 * math.pi), rel=1e-12)


@given(st.floats(0.05, 2.0), st.floats(0.55, 0.95))
def test_gaussian_grad_constant_vs_adaptive_quadrature(Delta, delta_k):
    # ∫_{R^n} |∂_1 G(t, x)| dx = E|X_1|/(2t) with X_1 ~ N(0, 2t)
    inner = lambda t: math.sqrt(2 * t) * math.sqrt(2 / math.pi) / (2 * t)
    val, _ = integrate.quad(inner, 0.0, Delta)
    ref = val / Delta ** (1 - delta_k)
    assert gaussian_grad_constant(Delta, delta_k) == pytest.approx(ref, rel=1e-8)
    assert gaussian_grad_constant_closed(Delta, delta_k) == pytest.approx(ref, rel=1e-8)


def test_product_constant_deterministic_and_positive():
    a = product_constant(2, 2, samples=8, seed=3)
    assert a == product_constant(2, 2, samples=8, seed=3)
    assert a > 0


def _constants(**kw):
    base = dict(C=1.0, Delta=SIGMA_HALF, alpha_h=1.0, delta_k=0.75, c_mu=0.4, c_sup_mu=1.5,
                C_G=0.8, C_K=0.66, C_m=2.0)
    base.update(kw)
    return ContractionConstants(**base)


def test_step_size_bound_formula():
    k = _constants()
    num = 0.4 * SIGMA_HALF**0.75 * 1.0 / 2 - 1e-3
    den = 1.5 * 3 * 0.8 * 2.0 * (1 + 3 * 0.66) * 1.0
    assert step_size_bound(k, 3, 1e-3) == pytest.approx(num / den, rel=1e-14)


@given(st.floats(0.1, 10.0), st.floats(0.01, 0.5))
def test_step_size_bound_shrinks_with_C(C, frac):
    lo = step_size_bound(_constants(C=C), 3, 1e-6)
    hi = step_size_bound(_constants(C=2 * C), 3, 1e-6)
    assert hi < lo


def test_step_size_bound_rejects():
    with pytest.raises(NoAdmissibleStepError):
        step_size_bound(_constants(), 3, 10.0)
    with pytest.raises(ConfigurationError):
        step_size_bound(_constants(), 3, 0.0)
    with pytest.raises(ConfigurationError):
        _constants(c_mu=2.0)
    with pytest.raises(ConfigurationError):
        _constants(alpha_h=0.4)


def test_estimate_constants_end_to_end():
    k = estimate_constants(3, 2, QuadratureSpec(samples=8), C=2.0)
    assert k.c_mu == pytest.approx(3 * math.sqrt(3) / 12)
    assert k.c_sup_mu == 1.5
    assert k.C_K == pytest.approx(laplace_kernel_constant_closed(3), rel=1e-10)
    assert k.policy["C_m_samples"] == 8 and k.policy["norm"] == "h^2"
    assert 0 < step_size_bound(k, 3, 1e-3) < 1
