import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize

from autocontrol_lab.dilatation import (
    GLOBAL, LOCALIZED, SIGMA_HALF, DilatationChart, dsigma_dtau, from_comparison, mu_at,
    mu_extrema, mu_inf_closed, mu_series, mu_tau2_sup_closed, sigma_of_tau, tau_of_sigma,
    to_comparison,
)
from autocontrol_lab.errors import ConfigurationError, DomainError
from autocontrol_lab.lattice import ModeField


def test_sigma_at_half_unit_interval():
    ch = DilatationChart(t0=0.0)
    assert abs(sigma_of_tau(ch, 0.5) - 1 / math.sqrt(3)) <= 1e-15
    assert sigma_of_tau(ch, 0.0) == 0.0


@given(st.floats(0.0, 10.0), st.floats(0.0, 0.999))
def test_roundtrip(t0, tl):
    ch = DilatationChart(t0=t0)
    assert abs(tau_of_sigma(ch, sigma_of_tau(ch, t0 + tl)) - (t0 + tl)) <= 1e-12 * (1 + t0)


@given(st.floats(0.0, 1e6))
def test_tau_stays_in_chart(sigma):
    ch = DilatationChart(t0=2.0)
    assert 2.0 <= tau_of_sigma(ch, sigma) <= 3.0


def test_domain_errors():
    ch = DilatationChart(t0=1.0)
    with pytest.raises(DomainError):
        sigma_of_tau(ch, 2.0)
    with pytest.raises(DomainError):
        sigma_of_tau(ch, 0.5)
    with pytest.raises(DomainError):
        tau_of_sigma(ch, -0.1)


@pytest.mark.parametrize("kw", [{"mode": "other"}, {"rho": 1.5}, {"rho": -0.1}, {"lam": 0.0},
                                {"t0": -1.0}])
def test_invalid_charts(kw):
    with pytest.raises(ConfigurationError):
        DilatationChart(**kw)


def test_dsigma_matches_central_difference_second_order():
    ch = DilatationChart(t0=0.5)
    tau = 0.9
    errs = []
    for h in (1e-3, 5e-4):
        fd = (sigma_of_tau(ch, tau + h) - sigma_of_tau(ch, tau - h)) / (2 * h)
        errs.append(abs(fd - dsigma_dtau(ch, tau)))
    assert math.log2(errs[0] / errs[1]) == pytest.approx(2.0, abs=0.05)


def _mu_direct(t0, tau, mode):
    # coefficients written in τ, independent of the σ-parametrized code
    tl = tau - t0
    w = (1 - tl * tl) ** 1.5
    D = (1 + tau) if mode == GLOBAL else (1 + tl)
    return w / D, w, w * D


@pytest.mark.parametrize("mode", [GLOBAL, LOCALIZED])
@pytest.mark.parametrize("t0", [0.0, 1.0, 5.0])
def test_mu_matches_tau_form(mode, t0):
    ch = DilatationChart(t0=t0, mode=mode)
    for sigma in (0.0, 0.2, SIGMA_HALF, 3.0):
        tau = tau_of_sigma(ch, sigma)
        np.testing.assert_allclose(mu_at(ch, sigma), _mu_direct(t0, tau, mode), rtol=1e-12)
    sig = np.linspace(0, 2, 9)
    np.testing.assert_allclose(mu_series(ch, sig), [mu_at(ch, s) for s in sig], rtol=1e-14)


@pytest.mark.parametrize("t0", [0.0, 1.0, 5.0])
def test_mu_extrema_vs_closed_and_optimizer(t0):
    lo, hi = mu_extrema(t0)
    assert lo >= mu_inf_closed(t0)
    assert hi <= mu_tau2_sup_closed(t0)
    # independent optimizer on the τ form over τ - t0 ∈ [0, 1/2]
    res = optimize.minimize_scalar(lambda x: _mu_direct(t0, t0 + x, GLOBAL)[0], bounds=(0, 0.5),
                                   method="bounded", options={"xatol": 1e-12})
    assert lo == pytest.approx(res.fun, rel=1e-6)
    assert mu_inf_closed(t0) == pytest.approx(_mu_direct(t0, t0 + 0.5, GLOBAL)[0], rel=1e-14)


def test_sigma_half_is_inside_interval():
    assert SIGMA_HALF < 1 / math.sqrt(3)
    assert 1 / math.sqrt(3) - SIGMA_HALF < 1e-15


@given(st.floats(0.0, 5.0), st.floats(0.0, 0.99), st.floats(0.1, 3.0))
def test_comparison_roundtrip(t0, tl, lam):
    ch = DilatationChart(t0=t0, lam=lam, mode=LOCALIZED)
    v = ModeField(np.arange(1, 4, dtype=complex).reshape(1, 3))
    tau = t0 + tl
    u = to_comparison(v, ch, tau)
    back = from_comparison(u, ch, sigma_of_tau(ch, tau))
    np.testing.assert_allclose(back.amps, v.amps, rtol=1e-10)


def test_chart_dict_roundtrip():
    ch = DilatationChart(0.5, 0.25, 2.0, LOCALIZED)
    d = ch.to_dict()
    assert d["lambda"] == 2.0 and "lam" not in d
    assert DilatationChart.from_dict(d) == ch


def test_rho_zero_is_frozen_limit():
    assert DilatationChart(rho=0.0).rho == 0.0
