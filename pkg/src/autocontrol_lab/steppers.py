"""Time integrators, the frozen-matrix product step and step-size selection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np
import scipy.linalg
from scipy import special

from .dilatation import (
    DilatationChart, SIGMA_HALF, mu_at, mu_extrema, mu_inf_closed, mu_tau2_sup_closed,
)
from .dynamics import FluidParams, burgers_nonlinear, heat_multiplier, ns_nonlinear
from .errors import ConfigurationError, EstimationError, NoAdmissibleStepError, NumericBlowup
from .lattice import ModeField, convolve, envelope_field, hs_norm, wavevectors

SCHEMES = ("euler", "trotter_first_order", "trotter_exact_exp", "rk4")
EXACT_EXP_CAP = 512

Rhs = Callable[[ModeField, float], ModeField]


@dataclass(frozen=True)
class StepPlan:
    dt: float
    steps: int
    scheme: str = "rk4"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("dt must be positive and finite")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigurationError("steps must be an integer >= 1")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"scheme must be one of {SCHEMES}")

    @property
    def horizon(self) -> float:
        return self.dt * self.steps


def _guard(out: np.ndarray, state: ModeField, step: int, t: float) -> np.ndarray:
    if not np.all(np.isfinite(out)):
        raise NumericBlowup(step, state.norm(), t)
    return out


def euler_step(state: ModeField, rhs: Rhs, dt: float, t: float = 0.0, step: int = 0) -> ModeField:
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    with np.errstate(over="ignore", invalid="ignore"):
        out = state.amps + dt * rhs(state, t).amps
    return state.replace(_guard(out, state, step, t))


def rk4_step(state: ModeField, rhs: Rhs, dt: float, t: float = 0.0, step: int = 0) -> ModeField:
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    y = state.amps
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = rhs(state, t).amps
        k2 = rhs(state.replace(y + 0.5 * dt * k1), t + 0.5 * dt).amps
        k3 = rhs(state.replace(y + 0.5 * dt * k2), t + 0.5 * dt).amps
        k4 = rhs(state.replace(y + dt * k3), t + dt).amps
        out = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return state.replace(_guard(out, state, step, t))


# -- frozen Euler matrix -----------------------------------------------------

def euler_matrix(v: ModeField, model: str = "ns") -> np.ndarray:
    """Dense frozen matrix ``e`` with ``e(v) v`` equal to the nonlinear term.

    Rows and columns are flattened ``(component, lattice index)`` pairs.  For
    ``model="ns"``::

        e[(i,α),(k,γ)] = P_ik(α) · (-Σ_j 2πi γ_j / l · v_{j(α-γ)})

    and for ``model="burgers"`` the projector is the identity and the
    multiplier is the real ``γ_j``.
    """
    n, M = v.n, v.M
    L = (2 * M + 1) ** n
    k = wavevectors(n, M).reshape(n, L)
    diff = k[:, :, None] - k[:, None, :]  # α - γ, shape (n, L, L)
    valid = np.all(np.abs(diff) <= M, axis=0)
    flat = np.ravel_multi_index(tuple(np.clip(diff, -M, M) + M), (2 * M + 1,) * n)
    vflat = v.amps.reshape(v.ncomp, L)
    gathered = np.where(valid[None], vflat[:, flat], 0.0)  # v_{j(α-γ)}, (j, α, γ)
    if model == "ns":
        a = -np.einsum("jag,jg->ag", gathered, (2j * np.pi / v.l) * k.astype(complex))
        kf = k.astype(float)
        k2 = np.sum(kf**2, axis=0)
        inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
        P = np.eye(n)[:, :, None] - kf[:, None, :] * kf[None, :, :] * inv  # (i, k, α)
    elif model == "burgers":
        a = np.einsum("jag,jg->ag", gathered, k.astype(float))
        P = np.broadcast_to(np.eye(v.ncomp)[:, :, None], (v.ncomp, v.ncomp, L))
    else:
        raise ConfigurationError(f"unknown model {model!r}")
    E = P[:, :, :, None] * a[None, None, :, :]  # (i, k, α, γ)
    return E.transpose(0, 2, 1, 3).reshape(v.ncomp * L, v.ncomp * L)


def trotter_step(
    v: ModeField,
    p: FluidParams,
    dt: float,
    variant: str = "first_order",
    chart: DilatationChart | None = None,
    sigma: float = 0.0,
    *,
    nonlinear: bool = True,
    model: str = "ns",
    cap: int = EXACT_EXP_CAP,
    step: int = 0,
) -> ModeField:
    """Heat multiplier times the (first-order or exact) frozen nonlinear flow.

    Without a chart this is ``Diag(exp(-ν4π²|α|²δt/l²)) · E(v, δt) · v``.
    With a chart the coefficients at ``σ`` enter: ``ρ μ_τ1`` on the viscous
    part, ``ρ λ μ_τ2`` on the nonlinear part and ``exp(-μ δt)`` damping.
    """
    if variant not in ("first_order", "exact_exp"):
        raise ConfigurationError(f"unknown trotter variant {variant!r}")
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    if chart is None:
        c_visc, c_nl, damp = 1.0, 1.0, 1.0
    else:
        mu, mu1, mu2 = mu_at(chart, sigma)
        c_visc, c_nl, damp = chart.rho * mu1, chart.rho * chart.lam * mu2, math.exp(-mu * dt)
    with np.errstate(over="ignore", invalid="ignore"):
        w = v.amps
        if nonlinear:
            if variant == "first_order":
                nl = ns_nonlinear(v).amps if model == "ns" else burgers_nonlinear(v)
                w = w + (dt * c_nl) * nl
            else:
                rows = v.ncomp * (2 * v.M + 1) ** v.n
                if rows > cap:
                    raise ConfigurationError(f"exact_exp matrix has {rows} rows, cap is {cap}")
                E = euler_matrix(v, model)
                w = (scipy.linalg.expm((dt * c_nl) * E) @ w.reshape(-1)).reshape(w.shape)
        out = heat_multiplier(v.n, v.M, p.nu * c_visc, dt, v.l) * w * damp
    return v.replace(_guard(out, v, step, sigma), real_valued=v.real_valued, solenoidal=v.solenoidal)


def make_stepper(scheme: str, rhs: Rhs | None = None, p: FluidParams | None = None,
                 model: str = "ns", chart: DilatationChart | None = None):
    """Uniform ``step(v, t, dt, k) -> v`` callable for any scheme."""
    if scheme == "euler":
        return lambda v, t, dt, k: euler_step(v, rhs, dt, t, k)
    if scheme == "rk4":
        return lambda v, t, dt, k: rk4_step(v, rhs, dt, t, k)
    if scheme.startswith("trotter_"):
        variant = scheme[len("trotter_"):]
        return lambda v, t, dt, k: trotter_step(v, p, dt, variant, chart, t, model=model, step=k)
    raise ConfigurationError(f"unknown scheme {scheme!r}")


# -- constants and step-size bound ---------------------------------------------

@dataclass(frozen=True)
class ContractionConstants:
    C: float
    Delta: float
    alpha_h: float
    delta_k: float
    c_mu: float
    c_sup_mu: float
    C_G: float
    C_K: float
    C_m: float
    policy: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("C", "Delta", "c_mu", "c_sup_mu", "C_G", "C_K", "C_m"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"constant {name} must be positive")
        if not 0.5 < self.alpha_h <= 1:
            raise ConfigurationError("alpha_h must lie in (1/2, 1]")
        if not 0.5 < self.delta_k < 1:
            raise ConfigurationError("delta_k must lie in (1/2, 1)")
        if self.c_mu > self.c_sup_mu:
            raise ConfigurationError("c_mu must not exceed c_sup_mu")

    def to_dict(self) -> dict:
        return asdict(self)


def step_size_bound(k: ContractionConstants, n: int, eps: float) -> float:
    """Largest admissible time-scale factor ``ρ`` for the constants ``k``."""
    if not eps > 0:
        raise ConfigurationError("eps must be positive")
    num = k.c_mu * k.Delta ** (k.alpha_h + k.delta_k - 1.0) * k.C / 2.0 - eps
    if num <= 0:
        raise NoAdmissibleStepError(f"numerator {num:.3e} <= 0; no admissible rho")
    den = k.c_sup_mu * n * k.C_G * k.C_m * (1.0 + n * k.C_K) * k.C**2
    return num / den


@dataclass(frozen=True)
class QuadratureSpec:
    nodes: int = 64
    rtol: float = 0.01
    samples: int = 64
    seed: int = 0
    q: float = 2.0


def _ck_parts(n: int, nodes: int) -> tuple[float, float]:
    # Marginal of ω_1 on S^{n-1} has density ∝ (1-t²)^{(n-3)/2}.  By symmetry
    # only t ∈ [0, 1] is needed; t = sin θ removes the endpoint singularity.
    a = (n - 3) / 2.0
    th, wth = special.roots_legendre(nodes)
    th = 0.25 * np.pi * (th + 1.0)
    wth = 0.25 * np.pi * wth
    dens = np.cos(th) ** (2 * a + 1)
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    norm = np.sum(wth * dens)
    mean_abs = np.sum(wth * dens * np.sin(th)) / norm
    mean_sq = np.sum(wth * dens * np.sin(th) ** 2) / norm
    # outer part: ∫_1^∞ r^{1-n} dr, substitute r = 1/x -> ∫_0^1 x^{n-3} dx
    x, wx = special.roots_legendre(nodes)
    x = 0.5 * (x + 1.0)
    radial = 0.5 * np.sum(wx * x ** (n - 3))
    inner = mean_abs  # ∫_{B_1} |ω_1|/(A_n r^{n-1}) dx
    outer = math.sqrt(mean_sq * area * radial / area**2)
    return inner, outer


def laplace_kernel_constant(n: int, nodes: int = 64) -> float:
    """``C_K``: L¹ norm on the unit ball plus L² norm outside it of ``x_1/(A_n |x|^n)``."""
    if n < 3:
        raise ConfigurationError("C_K needs n >= 3")
    inner, outer = _ck_parts(n, nodes)
    return inner + outer


def laplace_kernel_constant_closed(n: int) -> float:
    mean_abs = math.gamma(n / 2) / (math.sqrt(math.pi) * math.gamma((n + 1) / 2))
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    return mean_abs + 1.0 / math.sqrt(n * (n - 2) * area)


def gaussian_grad_constant(Delta: float, delta_k: float, nodes: int = 64) -> float:
    """``C_G``: ``∫_0^Δ ∫ |∂_1 G(t, x)| dx dt / Δ^{1-δ}`` at unit diffusivity."""
    # Spatial part: E|X|/(2t) with X ~ N(0, 2t).  E|Z| = 2∫_0^∞ z φ(z) dz,
    # and y = z²/2 turns it into a Gauss-Laguerre integral.
    y, wy = special.roots_laguerre(nodes)
    e_abs_std = 2.0 * np.sum(wy) / math.sqrt(2.0 * math.pi)
    # ∫_0^Δ E|Z| sqrt(2t)/(2t) dt with t = u²: ∫_0^{√Δ} E|Z| √2 du
    u, wu = special.roots_legendre(nodes)
    u = 0.5 * math.sqrt(Delta) * (u + 1.0)
    time_int = 0.5 * math.sqrt(Delta) * np.sum(wu * e_abs_std * math.sqrt(2.0) * np.ones_like(u))
    return time_int / Delta ** (1.0 - delta_k)


def gaussian_grad_constant_closed(Delta: float, delta_k: float) -> float:
    return 2.0 * math.sqrt(Delta / math.pi) / Delta ** (1.0 - delta_k)


def product_constant(n: int, M: int, q: float = 2.0, samples: int = 64, seed: int = 0) -> float:
    """``C_m``: sampled sup of ``|fg|_q / (|f|_q |g|_q)`` over random lattice fields."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(samples):
        s1, s2 = rng.uniform(0.0, n + 2 * q, size=2)
        f = envelope_field(n, M, 1.0, s1, rng, real=True, solenoidal=False, ncomp=1)
        g = envelope_field(n, M, 1.0, s2, rng, real=True, solenoidal=False, ncomp=1)
        fg = convolve(f, g, method="fft")
        best = max(best, hs_norm(fg, q) / (hs_norm(f, q) * hs_norm(g, q)))
    return best


def estimate_constants(
    n: int,
    M: int,
    quad: QuadratureSpec = QuadratureSpec(),
    *,
    C: float = 1.0,
    Delta: float = SIGMA_HALF,
    alpha_h: float = 1.0,
    delta_k: float = 0.75,
    t0: float = 0.0,
) -> ContractionConstants:
    """Numerically estimate every input of :func:`step_size_bound`."""
    ck = laplace_kernel_constant(n, quad.nodes)
    ck2 = laplace_kernel_constant(n, 2 * quad.nodes)
    cg = gaussian_grad_constant(Delta, delta_k, quad.nodes)
    cg2 = gaussian_grad_constant(Delta, delta_k, 2 * quad.nodes)
    drift = {"C_K": abs(ck2 - ck) / ck2, "C_G": abs(cg2 - cg) / cg2}
    if max(drift.values()) > quad.rtol:
        raise EstimationError("quadrature refinement unstable", diagnostics=drift)
    # closed forms, cross-checked against a sampled scan of the chart
    c_mu, c_sup = mu_inf_closed(t0), mu_tau2_sup_closed(t0)
    lo, hi = mu_extrema(t0, Delta)
    if lo < c_mu or hi > c_sup:
        raise EstimationError("sampled mu extrema outside closed bounds",
                              diagnostics={"inf_mu": lo, "sup_mu_tau2": hi})
    cm = product_constant(n, M, quad.q, quad.samples, quad.seed)
    policy = {
        "C_m_samples": quad.samples, "C_m_seed": quad.seed, "norm": f"h^{quad.q:g}",
        "nodes": quad.nodes, "refinement_drift": drift, "t0": t0,
    }
    policy["refinement_drift"] = {k: float(v) for k, v in drift.items()}
    return ContractionConstants(
        float(C), float(Delta), alpha_h, delta_k, c_mu, c_sup, float(cg2), float(ck2), float(cm), policy
    )
