"""Mode-space right-hand sides.

Conventions (fixed here, used everywhere):

* Navier-Stokes / Euler on a torus of side ``l``::

      dv_iα/dt = -ν 4π²|α|²/l² v_iα + P(α)[A(v)]_iα + f_iα(t)
      A(v)_i   = -Σ_j conv(v_j, (2πi α_j / l) v_i)

  with ``P`` the Leray projector.
* Burgers (literal lattice form, unit torus for the nonlinearity)::

      du_iα/dt = -ν 4π²|α|²/l² u_iα + λ Σ_j conv(u_j, α_j u_i)

  The multiplier ``α_j`` is real and carries no ``2πi``; a field supported
  on ``α = 0`` therefore has zero nonlinear term.
* Damped comparison dynamics in the chart coordinate ``σ``::

      du/dσ = ρ μ_τ1 L u + ρ λ μ_τ2 N(u) - μ u
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from .dilatation import DilatationChart, mu_at
from .errors import ConfigurationError
from .lattice import (
    ModeField,
    convolve,
    fft_crop,
    fft_pad,
    leray_project,
    mode_norm,
    mode_norm_sq,
    wavevectors,
)

FORCING_KINDS = ("none", "static_orthant", "dynamic_counterexample")
MODELS = ("ns", "burgers")


@dataclass(frozen=True)
class FluidParams:
    nu: float = 0.0
    l: float = 1.0
    n: int = 3

    def __post_init__(self):
        if self.nu < 0 or not self.l > 0 or self.n < 1:
            raise ConfigurationError(f"invalid fluid parameters {self}")


@dataclass(frozen=True)
class Coefficient:
    """Time profile ``c(t)``: ``constant``, ``sinusoid`` or ``table`` (linear interp)."""

    kind: str = "constant"
    value: float = 1.0
    amplitude: float = 0.0
    frequency: float = 0.0
    phase: float = 0.0
    times: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "sinusoid", "table"):
            raise ConfigurationError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "table" and (len(self.times) < 2 or len(self.times) != len(self.values)):
            raise ConfigurationError("table coefficient needs matching times/values, length >= 2")

    def __call__(self, t: float) -> float:
        if self.kind == "constant":
            return self.value
        if self.kind == "sinusoid":
            return self.value + self.amplitude * np.sin(2 * np.pi * self.frequency * t + self.phase)
        return float(np.interp(t, self.times, self.values))


@dataclass(frozen=True)
class ForcingSpec:
    kind: str = "none"
    eps: float = 0.1
    coefficients: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ConfigurationError(f"forcing kind must be one of {FORCING_KINDS}")
        if self.kind != "none" and not self.eps > 0:
            raise ConfigurationError("forcing eps must be positive")
        coeffs = tuple(c if isinstance(c, Coefficient) else Coefficient(**c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)

    def coeff_values(self, ncomp: int, t: float) -> np.ndarray:
        if not self.coefficients:
            return np.ones(ncomp)
        if len(self.coefficients) == 1:
            return np.full(ncomp, self.coefficients[0](t))
        if len(self.coefficients) != ncomp:
            raise ConfigurationError("need one coefficient per component (or a single shared one)")
        return np.array([c(t) for c in self.coefficients])

    def to_dict(self) -> dict:
        return asdict(self)


def positive_orthant(n: int, M: int) -> np.ndarray:
    return np.all(wavevectors(n, M) >= 0, axis=0)


def negative_orthant(n: int, M: int) -> np.ndarray:
    return np.all(wavevectors(n, M) < 0, axis=0)


def orthant_forcing(spec: ForcingSpec, n: int, M: int, ncomp: int, t: float) -> np.ndarray:
    """``c_i(t) / (1 + |α|^{(3+ε)/2})`` on the closed positive orthant, zero elsewhere."""
    out = np.zeros((ncomp,) + (2 * M + 1,) * n, dtype=complex)
    if spec.kind == "none":
        return out
    profile = 1.0 / (1.0 + mode_norm(n, M) ** ((3.0 + spec.eps) / 2.0))
    mask = positive_orthant(n, M)
    c = spec.coeff_values(ncomp, t)
    out[:, mask] = c[:, None] * profile[mask][None, :]
    return out


def viscous_diag(n: int, M: int, nu: float, l: float = 1.0) -> np.ndarray:
    """Diagonal ``-ν 4π²|α|²/l²``."""
    return -nu * 4.0 * np.pi**2 * mode_norm_sq(n, M) / l**2


def heat_multiplier(n: int, M: int, nu: float, dt: float, l: float = 1.0) -> np.ndarray:
    return np.exp(viscous_diag(n, M, nu, l) * dt)


def _bilinear(v_amps: np.ndarray, dv: np.ndarray, n: int, M: int, method: str) -> np.ndarray:
    """``out_i = Σ_j conv(v_j, dv[j, i])``."""
    ncomp = dv.shape[1]
    if method == "fft":
        vh = fft_pad(v_amps, n)
        dh = fft_pad(dv, n)
        return fft_crop(np.einsum("j...,ji...->i...", vh, dh), n, M)
    out = np.zeros((ncomp,) + v_amps.shape[1:], dtype=complex)
    for i in range(ncomp):
        for j in range(v_amps.shape[0]):
            out[i] += convolve(v_amps[j], dv[j, i], method=method)
    return out


def advection(v: ModeField, method: str = "fft") -> np.ndarray:
    """Unprojected quadratic term ``-Σ_j conv(v_j, (2πi α_j/l) v_i)``."""
    k = wavevectors(v.n, v.M)
    dv = (2j * np.pi / v.l) * k[:, None] * v.amps[None, :]
    return -_bilinear(v.amps, dv, v.n, v.M, method)


def ns_nonlinear(v: ModeField, method: str = "fft") -> ModeField:
    return leray_project(v.replace(advection(v, method)))


def burgers_nonlinear(u: ModeField, method: str = "fft") -> np.ndarray:
    k = wavevectors(u.n, u.M).astype(float)
    if u.ncomp != u.n:
        raise ConfigurationError("Burgers field needs n components")
    dv = k[:, None] * u.amps[None, :]
    return _bilinear(u.amps, dv, u.n, u.M, method)


def _check(v: ModeField, p: FluidParams):
    if v.n != p.n or v.l != p.l:
        raise ConfigurationError(f"lattice mismatch: field (n={v.n}, l={v.l}) vs params (n={p.n}, l={p.l})")


def ns_rhs(v: ModeField, p: FluidParams, f: ForcingSpec | None = None, t: float = 0.0,
           method: str = "fft") -> ModeField:
    _check(v, p)
    out = viscous_diag(v.n, v.M, p.nu, v.l) * v.amps + ns_nonlinear(v, method).amps
    if f is not None and f.kind == "static_orthant":
        out = out + orthant_forcing(f, v.n, v.M, v.ncomp, t)
    return v.replace(out, solenoidal=v.solenoidal and (f is None or f.kind == "none"))


def burgers_rhs(u: ModeField, p: FluidParams, lam: float = 1.0, method: str = "fft") -> ModeField:
    _check(u, p)
    out = viscous_diag(u.n, u.M, p.nu, u.l) * u.amps + lam * burgers_nonlinear(u, method)
    return u.replace(out, real_valued=False, solenoidal=False)


def damped_rhs(u: ModeField, chart: DilatationChart, sigma: float, p: FluidParams,
               model: str = "ns", method: str = "fft") -> ModeField:
    """Comparison-function dynamics in ``σ`` for the chart's ``(ρ, λ)``."""
    if model not in MODELS:
        raise ConfigurationError(f"model must be one of {MODELS}")
    _check(u, p)
    mu, mu1, mu2 = mu_at(chart, sigma)
    lin = chart.rho * mu1 * viscous_diag(u.n, u.M, p.nu, u.l) - mu
    out = lin * u.amps
    if chart.rho != 0.0:
        if model == "ns":
            nl = ns_nonlinear(u, method).amps
        else:
            nl = burgers_nonlinear(u, method)
        out = out + (chart.rho * chart.lam * mu2) * nl
    return u.replace(out)


def dynamic_forcing_update(v: ModeField, rhs_parts: ModeField, spec: ForcingSpec,
                           dt: float, t: float = 0.0) -> ModeField:
    """Forcing for one Euler step of the counterexample construction.

    On the open negative orthant the forcing cancels the step exactly, so a
    zero mode stays zero.  On the closed positive orthant it is the fixed
    profile; elsewhere it is zero.
    """
    if spec.kind != "dynamic_counterexample":
        raise ConfigurationError("dynamic_forcing_update needs kind='dynamic_counterexample'")
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    out = orthant_forcing(spec, v.n, v.M, v.ncomp, t)
    neg = negative_orthant(v.n, v.M)
    out[:, neg] = -v.amps[:, neg] / dt - rhs_parts.amps[:, neg]
    return v.replace(out, real_valued=False, solenoidal=False)


def forced_euler_step(v: ModeField, p: FluidParams, spec: ForcingSpec, dt: float, t: float,
                      method: str = "fft") -> ModeField:
    """One Euler step of unforced NS dynamics plus the dynamic forcing."""
    parts = ns_rhs(v, p, None, t, method)
    f = dynamic_forcing_update(v, parts, spec, dt, t)
    return v.replace(v.amps + dt * (parts.amps + f.amps), solenoidal=False, real_valued=False)


def make_rhs(model: str, p: FluidParams, forcing: ForcingSpec | None = None, lam: float = 1.0,
             method: str = "fft") -> Callable[[ModeField, float], ModeField]:
    """Bind parameters into ``rhs(v, t)`` for the steppers."""
    if model in ("ns", "euler"):
        return lambda v, t: ns_rhs(v, p, forcing, t, method)
    if model == "burgers":
        return lambda v, t: burgers_rhs(v, p, lam, method)
    raise ConfigurationError(f"no rhs for model {model!r}")
