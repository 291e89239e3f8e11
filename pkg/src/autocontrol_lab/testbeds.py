"""Closed-form testbeds: the scalar quadratic ODE and a dyadic shell model."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .diagnostics import BlowupEvent, NormSeries, blowup_detect
from .errors import ConfigurationError, DomainError, NumericBlowup
from .lattice import ModeField


# -- scalar ODE  x' = λ x² ---------------------------------------------------------

@dataclass(frozen=True)
class ScalarOdeConfig:
    x0: float = 1.0
    lam_ode: float = 1.0
    t0: float = 0.0

    def __post_init__(self):
        if self.x0 == 0 or not self.lam_ode > 0 or not self.t0 >= 0:
            raise ConfigurationError(f"invalid ODE config {self}")

    @property
    def blowup_time(self) -> float:
        return 1.0 / (self.lam_ode * self.x0) if self.x0 > 0 else math.inf


def ode_analytic(cfg: ScalarOdeConfig, t):
    t = np.asarray(t, dtype=float)
    if np.any(t >= cfg.blowup_time):
        raise DomainError("t at or past the blow-up time")
    out = cfg.x0 / (1.0 - cfg.lam_ode * cfg.x0 * t)
    return float(out) if out.ndim == 0 else out


def ode_rhs(cfg: ScalarOdeConfig, x):
    return cfg.lam_ode * x * x


def _rk4_scalar(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_ode(cfg: ScalarOdeConfig, t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classical RK4 from ``x(0) = x0`` up to ``t_end`` (last step shortened)."""
    f = lambda x: cfg.lam_ode * x * x
    steps = int(math.ceil(t_end / dt - 1e-9))
    ts = np.empty(steps + 1)
    xs = np.empty(steps + 1)
    x, t = float(cfg.x0), 0.0
    ts[0], xs[0] = t, x
    for k in range(1, steps + 1):
        h = min(dt, t_end - t)
        x = _rk4_scalar(f, x, h)
        t = t + h
        if not math.isfinite(x):
            raise NumericBlowup(k, abs(xs[k - 1]), t)
        ts[k], xs[k] = t, x
    return ts, xs


def _crossing_time(cfg: ScalarOdeConfig, dt: float, threshold: float, t_max: float) -> float:
    f = lambda x: cfg.lam_ode * x * x
    x, t = float(cfg.x0), 0.0
    while t < t_max:
        nxt = _rk4_scalar(f, x, dt)
        if not math.isfinite(nxt) or abs(nxt) >= threshold:
            lo, hi = 0.0, dt  # bisection on the partial step length
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                y = _rk4_scalar(f, x, mid)
                if math.isfinite(y) and abs(y) < threshold:
                    lo = mid
                else:
                    hi = mid
            return t + 0.5 * (lo + hi)
        x, t = nxt, t + dt
    raise DomainError(f"no threshold crossing before t = {t_max}")


def estimate_blowup_time(cfg: ScalarOdeConfig, dt: float = 1e-5, threshold: float = 1e4,
                         t_max: float = 100.0) -> dict:
    """First time ``|x|`` reaches ``threshold · |x0|``, extrapolated over ``dt`` and ``dt/2``."""
    thr = threshold * abs(cfg.x0)
    t1 = _crossing_time(cfg, dt, thr, t_max)
    t2 = _crossing_time(cfg, dt / 2, thr, t_max)
    est = t2 + (t2 - t1) / 15.0  # fourth-order Richardson
    return {"t_dt": t1, "t_dt_half": t2, "estimate": est, "threshold": thr}


# transformed ODE:  y(s) = x(t(s)) / (1 + t(s)),  t(s) = t0 + s/sqrt(1+s²)

def _t_of_s(cfg: ScalarOdeConfig, s):
    return cfg.t0 + s / np.sqrt(1.0 + s * s)


def ode_transformed_analytic(cfg: ScalarOdeConfig, s):
    """``x(t(s))/(1+t(s))``; for ``x0 = λ = 1, t0 = 0`` this is ``1/((1+t)(1-t)) = 1 + s²``."""
    s = np.asarray(s) if np.iscomplexobj(s) else np.asarray(s, dtype=float)
    if np.any(np.real(s) < 0):
        raise DomainError("s must be >= 0")
    t = _t_of_s(cfg, s)
    x = cfg.x0 / (1.0 - cfg.lam_ode * cfg.x0 * t)
    return x / (1.0 + t)


def ode_transformed_rhs(cfg: ScalarOdeConfig, y, s):
    """``w (λ(1+t) y² - y/(1+t))`` with ``w = (1-(t-t0)²)^{3/2}``."""
    t = _t_of_s(cfg, s)
    w = (1.0 + s * s) ** -1.5  # equals (1 - (t - t0)²)^{3/2}
    return w * (cfg.lam_ode * (1.0 + t) * y * y - y / (1.0 + t))


def scaled_config(lam: float) -> ScalarOdeConfig:
    """ODE whose transformed solution is ``1/(λ(1+t)(1-λt))``: ``x0 = 1/λ``, rate ``λ²``."""
    return ScalarOdeConfig(x0=1.0 / lam, lam_ode=lam * lam, t0=0.0)


def ode_scaled_analytic(lam: float, s):
    t = np.asarray(s) / np.sqrt(1.0 + np.asarray(s) ** 2)
    return 1.0 / (lam * (1.0 + t) * (1.0 - lam * t))


def ode_scaled_rhs(lam: float, y, s, power: int = 2):
    """Transformed rhs for the scaled solution; the quadratic term carries ``λ^power``."""
    t = s / np.sqrt(1.0 + s * s)
    w = (1.0 + s * s) ** -1.5
    return w * (lam**power * (1.0 + t) * y * y - y / (1.0 + t))


def complex_step_derivative(f, s, h: float = 1e-20):
    s = np.asarray(s, dtype=float)
    return np.imag(f(s + 1j * h)) / h


def transformed_residual(cfg: ScalarOdeConfig, s_grid) -> float:
    """``max |y'(s) - rhs(y(s), s)|`` with ``y'`` by complex-step differentiation."""
    s = np.asarray(s_grid, dtype=float)
    dy = complex_step_derivative(lambda z: ode_transformed_analytic(cfg, z), s)
    y = ode_transformed_analytic(cfg, s)
    return float(np.max(np.abs(dy - ode_transformed_rhs(cfg, y, s))))


def scaled_residual(lam: float, s_grid, power: int = 2) -> float:
    s = np.asarray(s_grid, dtype=float)
    dy = complex_step_derivative(lambda z: ode_scaled_analytic(lam, z), s)
    y = ode_scaled_analytic(lam, s)
    return float(np.max(np.abs(dy - ode_scaled_rhs(lam, y, s, power))))


# -- dyadic shell model -------------------------------------------------------------

@dataclass(frozen=True)
class ShellConfig:
    mu_kp: float = 2.0
    alpha_kp: float = 0.0
    m_min: int = 0
    m_max: int = 11
    K0: tuple = (-3.0,)
    s_visc: int = -1

    def __post_init__(self):
        if not self.mu_kp > 0:
            raise ConfigurationError("mu_kp must be positive")
        if self.m_max < self.m_min:
            raise ConfigurationError("empty shell range")
        if self.s_visc not in (-1, 1):
            raise ConfigurationError("s_visc must be -1 or +1")
        if len(self.K0) > self.size:
            raise ConfigurationError("more initial amplitudes than shells")
        object.__setattr__(self, "K0", tuple(float(k) for k in self.K0))

    @property
    def size(self) -> int:
        return self.m_max - self.m_min + 1

    @property
    def shells(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)

    def initial(self) -> np.ndarray:
        K = np.zeros(self.size)
        K[: len(self.K0)] = self.K0
        return K

    def to_dict(self) -> dict:
        return asdict(self)


def kp_rhs(K: np.ndarray, cfg: ShellConfig) -> np.ndarray:
    """``s_visc μ^{2mα} K_m + μ^{m-1} K_{m-1}² - μ^m K_m K_{m-1}``, ``K`` below range = 0."""
    m = cfg.shells.astype(float)
    mu = cfg.mu_kp
    Km1 = np.concatenate([[0.0], K[:-1]])
    return cfg.s_visc * mu ** (2 * m * cfg.alpha_kp) * K + mu ** (m - 1) * Km1**2 - mu**m * K * Km1


def kp_hs_norm(K: np.ndarray, cfg: ShellConfig, s: float) -> float:
    # same weight convention as the lattice norm: plain l2 at s = 0
    w = np.ones(cfg.size) if s == 0 else 1.0 + cfg.mu_kp ** (2.0 * cfg.shells * s)
    return float(np.sqrt(np.sum(w * K * K)))


def kp_to_lattice(K: np.ndarray, cfg: ShellConfig) -> ModeField:
    """Put shell ``m`` at lattice index ``α = μ^m`` of a scalar 1-d field."""
    idx = cfg.mu_kp ** cfg.shells
    if not np.allclose(idx, np.round(idx)) or cfg.m_min < 0:
        raise ConfigurationError("lattice embedding needs integer mu and m_min >= 0")
    idx = np.round(idx).astype(int)
    M = int(idx.max())
    amps = np.zeros((1, 2 * M + 1), dtype=complex)
    amps[0, idx + M] = K
    return ModeField(amps)


@dataclass
class KpRun:
    times: np.ndarray
    states: np.ndarray
    series: NormSeries
    event: BlowupEvent | None
    nonfinite: NumericBlowup | None = None


def integrate_kp(cfg: ShellConfig, t_end: float = 20.0, dt: float = 1e-3, ratio: float = 10.0,
                 tags=(0.0, 5.0), stop_on_blowup: bool = True) -> KpRun:
    """RK4 for the shell model with norm bookkeeping and blow-up detection."""
    K = cfg.initial()
    f = lambda x: kp_rhs(x, cfg)
    series = NormSeries(tags=tags)
    times, states = [0.0], [K.copy()]
    series.append_values(0.0, {s: kp_hs_norm(K, cfg, s) for s in series.tags}, float(np.max(np.abs(K))))
    nonfinite = None
    steps = int(round(t_end / dt))
    l2_0 = series.l2()[0]
    for k in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            K = _rk4_scalar(f, K, dt)
        t = k * dt
        if not np.all(np.isfinite(K)):
            nonfinite = NumericBlowup(k, float(np.linalg.norm(states[-1])), t)
            break
        times.append(t)
        states.append(K.copy())
        series.append_values(t, {s: kp_hs_norm(K, cfg, s) for s in series.tags}, float(np.max(np.abs(K))))
        if stop_on_blowup and series.values[0.0][-1] > ratio * l2_0:
            break
    event = blowup_detect(series, ratio, nonfinite)
    return KpRun(np.array(times), np.array(states), series, event, nonfinite)
