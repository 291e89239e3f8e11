"""Time-dilatation charts and the comparison-function rescaling.

Local time ``τl = τ - t0`` lives in ``[0, 1)``; the chart coordinate is
``σ = τl / sqrt(1 - τl²)``.  With ``w = (1 - τl²)^{3/2}`` and the amplitude
factor ``D = 1 + τ`` (global) or ``D = 1 + τl`` (localized)::

    μ = w / D,   μ_τk = D^k μ,   u = v / (λ D).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, DomainError
from .lattice import ModeField

GLOBAL = "global_factor"
LOCALIZED = "localized_factor"
MODES = (GLOBAL, LOCALIZED)

# σ at τ - t0 = 1/2.  The double nearest 1/√3 lies above it, so step one ulp
# inward to keep sampled grids inside the closed interval.
SIGMA_HALF = float(np.nextafter(1.0 / math.sqrt(3.0), 0.0))


@dataclass(frozen=True)
class DilatationChart:
    t0: float = 0.0
    rho: float = 1.0
    lam: float = 1.0
    mode: str = GLOBAL

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"chart mode must be one of {MODES}, got {self.mode!r}")
        if not self.t0 >= 0:
            raise ConfigurationError("t0 must be >= 0")
        # rho = 0 is accepted as the frozen-space limit (pure damping)
        if not 0 <= self.rho <= 1:
            raise ConfigurationError("rho must lie in [0, 1]")
        if not self.lam > 0:
            raise ConfigurationError("lambda must be positive")

    def factor(self, tau: float) -> float:
        """Amplitude factor ``D(τ)`` without ``λ``."""
        return 1.0 + (tau if self.mode == GLOBAL else tau - self.t0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DilatationChart":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        return cls(**d)


class MuCoefficients(NamedTuple):
    mu: float
    mu_tau1: float
    mu_tau2: float


def _local(chart: DilatationChart, tau: float) -> float:
    tl = tau - chart.t0
    if not (0.0 <= tl < 1.0):
        raise DomainError(f"tau - t0 = {tl} outside chart domain [0, 1)")
    return tl


def sigma_of_tau(chart: DilatationChart, tau: float) -> float:
    tl = _local(chart, tau)
    return tl / math.sqrt((1.0 - tl) * (1.0 + tl))


def tau_of_sigma(chart: DilatationChart, sigma: float) -> float:
    if not sigma >= 0:
        raise DomainError(f"sigma must be >= 0, got {sigma}")
    return chart.t0 + sigma / math.hypot(1.0, sigma)


def dsigma_dtau(chart: DilatationChart, tau: float) -> float:
    tl = _local(chart, tau)
    return ((1.0 - tl) * (1.0 + tl)) ** -1.5


def _weight(sigma: float) -> float:
    # (1 - τl²)^{3/2} written in σ: 1 - τl² = 1/(1+σ²)
    return (1.0 + sigma * sigma) ** -1.5


def mu_at(chart: DilatationChart, sigma: float) -> MuCoefficients:
    tau = tau_of_sigma(chart, sigma)
    w = _weight(sigma)
    D = chart.factor(tau)
    return MuCoefficients(w / D, w, w * D)


def mu_series(chart: DilatationChart, sigmas) -> np.ndarray:
    """Vectorized ``mu_at``; returns an array of shape (len(sigmas), 3)."""
    s = np.asarray(sigmas, dtype=float)
    if np.any(s < 0):
        raise DomainError("sigma must be >= 0")
    tl = s / np.hypot(1.0, s)
    w = (1.0 + s * s) ** -1.5
    D = 1.0 + tl + (chart.t0 if chart.mode == GLOBAL else 0.0)
    return np.stack([w / D, w, w * D], axis=-1)


def to_comparison(v: ModeField, chart: DilatationChart, tau: float) -> ModeField:
    _local(chart, tau)
    return v.replace(v.amps / (chart.lam * chart.factor(tau)))


def from_comparison(u: ModeField, chart: DilatationChart, sigma: float) -> ModeField:
    tau = tau_of_sigma(chart, sigma)
    return u.replace(u.amps * (chart.lam * chart.factor(tau)))


def mu_extrema(t0: float, sigma_max: float = SIGMA_HALF, samples: int = 10_000):
    """Sampled ``inf μ`` and ``sup μ_τ2`` over ``[0, sigma_max]`` on the global chart."""
    chart = DilatationChart(t0=t0)
    vals = mu_series(chart, np.linspace(0.0, sigma_max, samples))
    return float(vals[:, 0].min()), float(vals[:, 2].max())


def mu_inf_closed(t0: float) -> float:
    """Closed-form lower bound for ``μ`` on ``σ ∈ [0, 1/√3]``."""
    return 3.0 * math.sqrt(3.0) / (12.0 + 8.0 * t0)


def mu_tau2_sup_closed(t0: float) -> float:
    return 1.5 + t0
