"""Reference fixtures.  Each function runs one experiment and returns measurements.

The acceptance layer compares these measurements with tolerances; the
orchestrator and the scripts call the same functions.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import dilatation as dil
from .diagnostics import (
    convolution_rule_oracle, envelope_fit, envelope_preserved,
)
from .dilatation import LOCALIZED, SIGMA_HALF, DilatationChart
from .dynamics import (
    FluidParams, ForcingSpec, burgers_rhs, damped_rhs, forced_euler_step, heat_multiplier,
    negative_orthant, positive_orthant,
)
from .kernels import (
    GaussianKernel, antisym_half_ball_check, chart_mu_prime, grad_fd_order,
    gradient_bound_check, levy_term_bound_check, normalization, small_ball_integral,
)
from .lattice import (
    DecayEnvelope, ModeField, envelope_field, hs_norm, hs_weights, leray_project, max_divergence,
)
from .steppers import estimate_constants, euler_step, rk4_step, step_size_bound, trotter_step
from .testbeds import (
    ScalarOdeConfig, ShellConfig, estimate_blowup_time, integrate_kp, integrate_ode, kp_hs_norm,
    kp_to_lattice, ode_analytic, scaled_residual, transformed_residual,
)


class _Timer:
    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t


# 1 -----------------------------------------------------------------------------------
def ode_blowup(dt: float = 1e-5, t_check: float = 0.9) -> dict:
    cfg = ScalarOdeConfig(1.0, 1.0)
    with _Timer() as tm:
        ts, xs = integrate_ode(cfg, t_check, dt)
        rel = float(np.max(np.abs(xs / ode_analytic(cfg, ts) - 1.0)))
        est = estimate_blowup_time(cfg, dt)
    return {"max_rel_err": rel, "blowup_time": est["estimate"], "crossings": est,
            "runtime": tm.elapsed}


# 2 -----------------------------------------------------------------------------------
def transformed_identity(points: int = 1001, lams=(0.5, 1.0)) -> dict:
    s = np.linspace(0.0, 5.0, points)
    with _Timer() as tm:
        base = transformed_residual(ScalarOdeConfig(1.0, 1.0, 0.0), s)
        scaled = {lam: scaled_residual(lam, s, power=2) for lam in lams}
        printed = {lam: scaled_residual(lam, s, power=1) for lam in lams}
    return {"residual": base, "scaled_residual": max(scaled.values()), "scaled": scaled,
            "printed_coefficient_residual": printed, "runtime": tm.elapsed}


# 3 -----------------------------------------------------------------------------------
def chart_checks(points: int = 10_000, t0s=(0.0, 1.0, 5.0)) -> dict:
    rt = 0.0
    for t0 in t0s:
        ch = DilatationChart(t0=t0)
        for tl in np.linspace(0.0, 0.999, points):
            tau = t0 + tl
            rt = max(rt, abs(dil.tau_of_sigma(ch, dil.sigma_of_tau(ch, tau)) - tau))
    ch = DilatationChart()
    half = abs(dil.sigma_of_tau(ch, 0.5) - 1.0 / math.sqrt(3.0))
    orders = []
    for tau in (0.1, 0.3, 0.5, 0.7):
        errs = []
        for h in (1e-3, 5e-4):
            fd = (dil.sigma_of_tau(ch, tau + h) - dil.sigma_of_tau(ch, tau - h)) / (2 * h)
            errs.append(abs(fd - dil.dsigma_dtau(ch, tau)))
        orders.append(math.log2(errs[0] / errs[1]))
    return {"roundtrip": rt, "sigma_half_error": half, "fd_orders": orders,
            "fd_order_min": min(orders)}


# 4 -----------------------------------------------------------------------------------
def mu_extrema_check(t0s=(0.0, 1.0, 5.0), samples: int = 10_000) -> dict:
    out = {}
    with _Timer() as tm:
        for t0 in t0s:
            lo, hi = dil.mu_extrema(t0, SIGMA_HALF, samples)
            out[t0] = {"inf_mu": lo, "bound_inf": dil.mu_inf_closed(t0),
                       "sup_mu_tau2": hi, "bound_sup": dil.mu_tau2_sup_closed(t0)}
    inf_slack = min(v["inf_mu"] - v["bound_inf"] for v in out.values())
    sup_slack = min(v["bound_sup"] - v["sup_mu_tau2"] for v in out.values())
    return {"per_t0": out, "inf_slack": inf_slack, "sup_slack": sup_slack, "runtime": tm.elapsed}


# 5 -----------------------------------------------------------------------------------
def structure_invariants(n=3, M=4, nu=0.1, dt=1e-3, steps=100, seed=0) -> dict:
    rng = np.random.default_rng(seed)
    raw = envelope_field(n, M, 1.0, 2.0, rng, solenoidal=False)
    v = leray_project(raw)
    idem = float(np.max(np.abs(leray_project(v).amps - v.amps)) / v.norm())
    p = FluidParams(nu, 1.0, n)
    for k in range(steps):
        v = trotter_step(v, p, dt, "first_order", step=k)
    return {"divergence_rel": max_divergence(v) / v.norm(), "reality_defect": v.reality_defect(),
            "idempotence": idem, "final_norm": v.norm()}


# 6 -----------------------------------------------------------------------------------
def pure_heat(n=3, M=4, nu=0.1, dt=1e-3, steps=100, seed=0) -> dict:
    rng = np.random.default_rng(seed)
    v0 = envelope_field(n, M, 1.0, 2.0, rng)
    p = FluidParams(nu, 1.0, n)
    target = heat_multiplier(n, M, nu, steps * dt) * v0.amps
    errs = {}
    for variant in ("first_order", "exact_exp"):
        v = v0
        for k in range(steps):
            v = trotter_step(v, p, dt, variant, nonlinear=False, step=k)
        nz = np.abs(target) > 0
        errs[variant] = float(np.max(np.abs(v.amps[nz] - target[nz]) / np.abs(target[nz])))
    return {"rel_err": max(errs.values()), "per_variant": errs}


# 7 -----------------------------------------------------------------------------------
def two_route(n=1, M=8, nu=0.01, rho=0.5, lam=1.0, sigma_end=0.5, Ns=(25, 50, 100, 200),
              ref_steps=4000, seed=3) -> dict:
    rng = np.random.default_rng(seed)
    v0 = envelope_field(n, M, 0.2, 2.0, rng)
    ch = DilatationChart(0.0, rho, lam, LOCALIZED)
    p = FluidParams(nu, 1.0, n)
    tau_end = dil.tau_of_sigma(ch, sigma_end)
    # route A: Burgers in τ (t = ρτ), then the pointwise transform
    F = lambda v, t: v.replace(ch.rho * burgers_rhs(v, p).amps)
    h = (tau_end - ch.t0) / ref_steps
    v = v0
    for j in range(ref_steps):
        v = rk4_step(v, F, h, ch.t0 + j * h, j)
    uA = dil.to_comparison(v, ch, tau_end)
    # route B: Euler on the damped comparison dynamics in σ
    G = lambda u, s: damped_rhs(u, ch, s, p, model="burgers")
    errs = []
    for N in Ns:
        d = sigma_end / N
        u = dil.to_comparison(v0, ch, ch.t0)
        for j in range(N):
            u = euler_step(u, G, d, j * d, j)
        errs.append(float(np.max(np.abs(u.amps - uA.amps))))
    errs = np.array(errs)
    steps = sigma_end / np.array(Ns)
    orders = np.log2(errs[:-1] / errs[1:])
    return {"errors": errs.tolist(), "dsigma": steps.tolist(), "orders": orders.tolist(),
            "order_min": float(orders.min()), "K": float(np.max(errs / steps))}


# 8 / 9 -------------------------------------------------------------------------------
@dataclass(frozen=True)
class PreservationSetup:
    n: int = 3
    M: int = 6
    C_env: float = 1.0
    s_env: float = 5.0
    nu: float = 0.1
    lam: float = 1.0
    eps_frac: float = 1e-3
    steps: int = 64
    seed: int = 1


def admissible_rho(u0: ModeField, n: int, M: int, eps_frac: float = 1e-3):
    """``ρ`` from the bound with estimated constants and ``C = |u0|_{h^2}``."""
    C = hs_norm(u0, 2.0)
    k = estimate_constants(n, M, C=C)
    return step_size_bound(k, n, eps_frac * C), k


def _damped_run(u0, chart, p, steps, sigma_end=SIGMA_HALF, model="ns"):
    h = sigma_end / steps
    u, snaps, times = u0, [u0], [0.0]
    for j in range(steps):
        u = rk4_step(u, lambda w, s: damped_rhs(w, chart, s, p, model), h, j * h, j)
        snaps.append(u)
        times.append((j + 1) * h)
    return snaps, times


def envelope_preservation(setup: PreservationSetup = PreservationSetup(), inflate: float = 100.0) -> dict:
    rng = np.random.default_rng(setup.seed)
    u0 = envelope_field(setup.n, setup.M, setup.C_env, setup.s_env, rng)
    rho, k = admissible_rho(u0, setup.n, setup.M, setup.eps_frac)
    env = DecayEnvelope(setup.C_env, setup.s_env)
    p = FluidParams(setup.nu, 1.0, setup.n)
    out = {"rho": rho, "constants": k.to_dict()}
    for tag, r in (("admissible", rho), ("inflated", min(inflate * rho, 1.0))):
        ch = DilatationChart(0.0, r, setup.lam, LOCALIZED)
        try:
            snaps, times = _damped_run(u0, ch, p, setup.steps)
            rep = envelope_preserved(snaps, env, times)
        except ArithmeticError as exc:
            rep = {"preserved": False, "first_violation_time": None, "worst_margin": 0.0,
                   "error": str(exc)}
        out[tag] = {"rho": r, "preserved": rep["preserved"], "worst_margin": rep["worst_margin"],
                    "first_violation_time": rep["first_violation_time"]}
        if "error" in rep:
            out[tag]["aborted"] = rep["error"]
    return out


def damping_dominance(trials: int = 100, n: int = 3, M: int = 4, nu: float = 0.1, seed: int = 100) -> dict:
    ref = envelope_field(n, M, 1.0, 5.0, np.random.default_rng(0))
    rho, k = admissible_rho(ref, n, M)
    C = k.C
    W = hs_weights(n, M, 2.0)
    p = FluidParams(nu, 1.0, n)
    rates = []
    for trial in range(trials):
        rng = np.random.default_rng(seed + trial)
        u = envelope_field(n, M, 1.0, rng.uniform(3.0, 6.0), rng)
        u = u.replace(u.amps * (C * rng.uniform(0.9, 1.0) / hs_norm(u, 2.0)))
        sigma = rng.uniform(0.0, SIGMA_HALF)
        ch = DilatationChart(0.0, rho, 1.0, LOCALIZED)
        d = damped_rhs(u, ch, sigma, p)
        rates.append(float(np.sum(W * np.real(np.conj(u.amps) * d.amps)) / hs_norm(u, 2.0)))
    rates = np.array(rates)
    return {"negative": int(np.sum(rates < 0)), "trials": trials, "max_rate": float(rates.max()),
            "rho": rho, "C": C}


# 10 ----------------------------------------------------------------------------------
def rule_oracle(n=3, s_a=5.0, s_b=5.0, M=32, weight="gamma", radius=8.0) -> dict:
    with _Timer() as tm:
        res = convolution_rule_oracle(n, s_a, s_b, M, weight)
    ok, bad = res.normalized_nonincreasing(radius)
    return {"c": res.c, "stability": res.stability, "nonincreasing": ok, "bad_shells": bad,
            "s_out": res.s_out, "measured_exponent": res.measured_exponent, "runtime": tm.elapsed}


# 11 ----------------------------------------------------------------------------------
def kernel_suite(n=3, rho=0.01, samples=10_000, seed=0) -> dict:
    with _Timer() as tm:
        k = GaussianKernel(n, rho, 1.0, chart_mu_prime)
        pairs = [(0.3, 0.1), (0.5, 0.2), (0.45, 0.44)]
        norm_err = max(abs(normalization(k, sg, s) - 1.0) for sg, s in pairs)
        rng = np.random.default_rng(seed)
        orders = []
        for sg, s in pairs[:2]:
            scale = math.sqrt(float(k.diffusivity(sg, s)))
            x = rng.normal(size=n) * scale
            orders.append(grad_fd_order(k, sg, x, s, np.zeros(n), 0, h=1e-2 * scale))
        lin = lambda y: 2.5 * y[:, 0] + 0.7
        full, half = antisym_half_ball_check(k, lin, np.zeros(n), 0.2, 0.4, 0.2, 0)
        grad_bound = gradient_bound_check(GaussianKernel(n, rho, 1.0, chart_mu_prime), (0.1, 0.5))
        stated = levy_term_bound_check(k, (0.1, 0.5), samples, form="stated", seed=seed)
        derived = levy_term_bound_check(k, (0.1, 0.5), samples, form="derived", seed=seed)
        f = lambda y: np.sin(y[:, 0]) + np.cos(y[:, 1])
        sweep = [small_ball_integral(f, np.zeros(n), 0.5, 0.1, 0, r, mu_prime=chart_mu_prime)
                 for r in (1e-1, 1e-2, 1e-3)]
    return {
        "normalization_err": norm_err, "fd_order_min": min(orders),
        "antisym_gap": abs(full - half), "antisym_full": full,
        "gradient_bound": grad_bound,
        "levy_stated_violations": stated["violations"], "levy_stated": stated,
        "levy_derived_violations": derived["violations"], "levy_derived": derived,
        "rho_sweep": sweep, "sweep_decreasing": bool(all(a > b for a, b in zip(sweep, sweep[1:]))),
        "runtime": tm.elapsed,
    }


# 12 ----------------------------------------------------------------------------------
def blowup_contrast(kp: ShellConfig = ShellConfig(), ratio: float = 10.0, n=3, M=4, nu=0.1,
                    steps=64, seed=5) -> dict:
    run = integrate_kp(kp, t_end=20.0, dt=1e-3, ratio=ratio, stop_on_blowup=False)
    target = kp_hs_norm(kp.initial(), kp, 5.0)
    # lattice image of the shell run against its own initial envelope
    lat0 = kp_to_lattice(run.states[0], kp)
    fit0 = DecayEnvelope(float(np.max(np.abs(lat0.amps)) * 2.0), 5.0)
    stride = max(1, len(run.states) // 50)
    kp_rep = envelope_preserved([kp_to_lattice(K, kp) for K in run.states[::stride]], fit0,
                                run.times[::stride])
    rng = np.random.default_rng(seed)
    base = envelope_field(n, M, 1.0, 5.0, rng, solenoidal=False)
    scale = target / hs_norm(base, 5.0)
    u0 = base.replace(base.amps * scale)
    rho, _ = admissible_rho(u0, n, M)
    ch = DilatationChart(0.0, rho, 1.0, LOCALIZED)
    snaps, times = _damped_run(u0, ch, FluidParams(nu, 1.0, n), steps, model="burgers")
    rep = envelope_preserved(snaps, DecayEnvelope(scale, 5.0), times)
    return {
        "kp_event": None if run.event is None else run.event.to_dict(),
        "kp_h5_initial": target,
        "kp_lattice_preserved": kp_rep["preserved"],
        "kp_lattice_first_violation": kp_rep["first_violation_time"],
        "burgers_h5_initial": hs_norm(u0, 5.0),
        "burgers_preserved": rep["preserved"], "burgers_worst_margin": rep["worst_margin"],
        "rho": rho,
    }


# 13 ----------------------------------------------------------------------------------
def forced_cascade(n=3, M=6, eps=0.1, dt=0.002, every=10, snapshots=8) -> dict:
    spec = ForcingSpec("dynamic_counterexample", eps)
    p = FluidParams(0.0, 1.0, n)
    v = ModeField.zeros(n, M)
    pos, neg = positive_orthant(n, M), negative_orthant(n, M)
    exps, times, neg_max = [], [], 0.0
    for k in range(1, every * snapshots + 1):
        v = forced_euler_step(v, p, spec, dt, (k - 1) * dt)
        neg_max = max(neg_max, float(np.max(np.abs(v.amps[:, neg]))))
        if k % every == 0:
            exps.append(envelope_fit(v, mask=pos).s)
            times.append(k * dt)
    diffs = np.diff(exps)
    run = longest = 0
    for d in diffs:
        run = run + 1 if d < 0 else 0
        longest = max(longest, run)
    return {"exponents": exps, "times": times, "longest_decreasing_run": longest + 1 if exps else 0,
            "negative_orthant_max": neg_max}


# 14 ----------------------------------------------------------------------------------
def long_run_decay(n=3, M=4, nu=0.5, T=20.0, dt=0.005, seed=0) -> dict:
    rng = np.random.default_rng(seed)
    v = envelope_field(n, M, 1.0, 2.0, rng, zero_mean=True)
    p = FluidParams(nu, 1.0, n)
    steps = int(round(T / dt))
    l2 = [v.norm()]
    sup0 = v.sup()
    with _Timer() as tm:
        for k in range(steps):
            v = trotter_step(v, p, dt, "first_order", step=k)
            l2.append(v.norm())
    l2 = np.array(l2)
    up = np.nonzero(l2[1:] > l2[:-1] * (1 + 1e-12))[0]
    transient = int(up[-1] + 1) if up.size else 0
    return {"sup_ratio": v.sup() / sup0, "transient_index": transient,
            "transient_time": transient * dt, "monotone_after_transient": transient < steps // 10,
            "runtime": tm.elapsed}
