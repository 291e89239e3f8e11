"""Heat-kernel checks for a Gaussian with time-dependent diffusivity.

The kernel is ``G = (4πD)^{-n/2} exp(-|x-y|²/(4D))`` with
``D = ρ ν μ'(s) (σ - s)``.  All checks are numeric: quadrature on balls
(radial Gauss-Legendre times an angular rule split at the reflection plane)
and random sampling sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError

C0 = 2.0 / math.e  # sup_z 2 z² exp(-z²)


def chart_mu_prime(sigma):
    """``dτ/dσ = (1 + σ²)^{-3/2}``, the chart-derived diffusivity profile."""
    return (1.0 + np.asarray(sigma, dtype=float) ** 2) ** -1.5


def chart_mu_prime_lipschitz(a: float, b: float) -> float:
    """Max of ``|d/dσ (1+σ²)^{-3/2}| = 3σ(1+σ²)^{-5/2}`` over ``[a, b]``."""
    g = lambda s: 3.0 * s * (1.0 + s * s) ** -2.5
    peak = 0.5  # stationary point of g
    cands = [a, b] + ([peak] if a <= peak <= b else [])
    return max(g(s) for s in cands)


@dataclass(frozen=True)
class GaussianKernel:
    n: int
    rho: float
    nu: float = 1.0
    mu_prime: Callable | float = 1.0

    def __post_init__(self):
        if self.n < 1 or not self.rho > 0 or not self.nu > 0:
            raise ConfigurationError(f"invalid kernel parameters {self}")

    def mup(self, s):
        if callable(self.mu_prime):
            return self.mu_prime(s)
        return np.full_like(np.asarray(s, dtype=float), float(self.mu_prime))

    def diffusivity(self, sigma, s):
        sigma, s = np.asarray(sigma, float), np.asarray(s, float)
        if np.any(sigma <= s):
            raise DomainError("kernel needs sigma > s")
        return self.rho * self.nu * self.mup(s) * (sigma - s)


def _r2(x, y):
    d = np.asarray(x, float) - np.asarray(y, float)
    return d, np.sum(d * d, axis=-1)


def gaussian_eval(k: GaussianKernel, sigma, x, s, y):
    """Kernel value; ``x`` and ``y`` broadcast over leading axes, last axis is ``n``."""
    D = k.diffusivity(sigma, s)
    _, r2 = _r2(x, y)
    return (4.0 * np.pi * D) ** (-k.n / 2.0) * np.exp(-r2 / (4.0 * D))


def gaussian_grad(k: GaussianKernel, sigma, x, s, y, j: int):
    """Exact ``∂G/∂x_j = -(x_j - y_j)/(2D) · G``."""
    D = k.diffusivity(sigma, s)
    d, _ = _r2(x, y)
    return -d[..., j] / (2.0 * D) * gaussian_eval(k, sigma, x, s, y)


def gaussian_laplacian(k: GaussianKernel, sigma, x, s, y):
    D = k.diffusivity(sigma, s)
    _, r2 = _r2(x, y)
    return (r2 / (4.0 * D * D) - k.n / (2.0 * D)) * gaussian_eval(k, sigma, x, s, y)


def factorized_grad(k: GaussianKernel, sigma, x, s, y, j: int):
    """Leading factorization ``((x_j - y_j)/(2ρνμ'(s)(σ - s))) · G`` (sign dropped)."""
    D = k.diffusivity(sigma, s)
    d, _ = _r2(x, y)
    return d[..., j] / (2.0 * D) * gaussian_eval(k, sigma, x, s, y)


def normalization(k: GaussianKernel, sigma, s, y=None, nodes: int = 24) -> float:
    """Tensor Gauss-Hermite approximation of ``∫ G(σ, x; s, y) dx``."""
    y = np.zeros(k.n) if y is None else np.asarray(y, float)
    D = float(k.diffusivity(sigma, s))
    z, w = special.roots_hermite(nodes)
    zz = np.stack(np.meshgrid(*([z] * k.n), indexing="ij"), axis=-1)
    wt = np.prod(np.stack(np.meshgrid(*([w] * k.n), indexing="ij"), axis=-1), axis=-1)
    pts = zz * math.sqrt(4.0 * D) + y
    # Hermite weights carry exp(-|z|²); divide it back out of the integrand
    vals = gaussian_eval(k, sigma, pts, s, y) * np.exp(np.sum(zz * zz, axis=-1))
    return float(np.sum(wt * vals) * (4.0 * D) ** (k.n / 2.0))


def grad_fd_order(k: GaussianKernel, sigma, x, s, y, j: int, h: float = 1e-3) -> float:
    """Observed order of the central difference against :func:`gaussian_grad`."""
    x = np.asarray(x, float)
    exact = gaussian_grad(k, sigma, x, s, y, j)
    errs = []
    for hh in (h, h / 2):
        e = np.zeros(k.n)
        e[j] = hh
        fd = (gaussian_eval(k, sigma, x + e, s, y) - gaussian_eval(k, sigma, x - e, s, y)) / (2 * hh)
        errs.append(abs(fd - exact))
    return math.log2(errs[0] / errs[1])


# -- local gradient bound ---------------------------------------------------------

def _grad_shape(n: int, delta: float, z):
    # |∇G| r^{n+1-2δ} (σ-s)^δ = (ρνμ')^{-δ} g(z),  z = r²/(4D)
    return 0.5 * (4.0 * z) ** ((n + 2 - 2 * delta) / 2.0) * (4.0 * np.pi) ** (-n / 2.0) * np.exp(-z)


def gradient_bound_check(k: GaussianKernel, s_range, delta: float = 0.75, samples: int = 10_000,
                         seed: int = 0) -> dict:
    """Fit ``C`` in ``|G_{,j}| <= C / ((σ-s)^δ |x-y|^{n+1-2δ})`` once, then test fresh samples."""
    lo, hi = s_range
    # fit on a tensor grid in (s, z) that contains the stationary z of the shape function
    z_star = (k.n + 2 - 2 * delta) / 2.0
    s_grid = np.linspace(lo, hi, 65)
    a = k.rho * k.nu * k.mup(s_grid)
    C_fit = float(np.max(a ** (-delta)) * _grad_shape(k.n, delta, z_star))
    rng = np.random.default_rng(seed)
    s = rng.uniform(lo, hi, samples)
    sig = s + rng.uniform(1e-4, hi - lo, samples)
    x = rng.normal(size=(samples, k.n)) * np.sqrt(k.diffusivity(sig, s))[:, None] * rng.uniform(0.1, 4, (samples, 1))
    y = np.zeros(k.n)
    j = 0
    lhs = np.abs(gaussian_grad(k, sig, x, s, y, j))
    r = np.linalg.norm(x, axis=-1)
    rhs = C_fit / ((sig - s) ** delta * r ** (k.n + 1 - 2 * delta))
    ratio = lhs / rhs
    return {"C": C_fit, "samples": samples, "violations": int(np.sum(ratio > 1.0)),
            "max_ratio": float(np.max(ratio))}


# -- ball quadrature --------------------------------------------------------------

def _gl(a, b, m):
    t, w = special.roots_legendre(m)
    return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w


def ball_rule(n: int, r: float, j: int, nodes: int = 32):
    """Quadrature on ``B_r(0)`` as ``(offsets, weights, c)`` with ``c`` the cosine to ``e_j``.

    The angular rule is split at ``c = 0`` and symmetric under ``c -> -c``.
    """
    if n not in (1, 2, 3):
        raise ConfigurationError("ball quadrature is implemented for n <= 3")
    rad, wr = _gl(0.0, r, nodes)
    if n == 1:
        c = np.array([-1.0, 1.0])
        dirs = c[:, None]
        wa = np.ones(2)
    elif n == 2:
        half, wh = _gl(-np.pi / 2, np.pi / 2, nodes)
        theta = np.concatenate([half + np.pi, half])
        wa = np.concatenate([wh, wh])
        c = np.cos(theta)
        dirs = np.zeros((theta.size, 2))
        dirs[:, j] = c
        dirs[:, 1 - j] = np.sin(theta)
    else:
        cn, wc = _gl(-1.0, 0.0, nodes)
        cs = np.concatenate([cn, -cn])
        wcs = np.concatenate([wc, wc])
        phi = 2 * np.pi * np.arange(2 * nodes) / (2 * nodes)
        wp = np.full(phi.size, 2 * np.pi / phi.size)
        C, P = np.meshgrid(cs, phi, indexing="ij")
        wa = (wcs[:, None] * wp[None, :]).ravel()
        c = C.ravel()
        st = np.sqrt(1.0 - c * c)
        others = [a for a in range(3) if a != j]
        dirs = np.zeros((c.size, 3))
        dirs[:, j] = c
        dirs[:, others[0]] = st * np.cos(P.ravel())
        dirs[:, others[1]] = st * np.sin(P.ravel())
    pts = rad[:, None, None] * dirs[None, :, :]
    wts = (wr * rad ** (n - 1))[:, None] * wa[None, :]
    cc = np.broadcast_to(c[None, :], wts.shape)
    return pts.reshape(-1, n), wts.ravel(), cc.ravel()


def antisym_half_ball_check(k: GaussianKernel, f: Callable, x, r: float, sigma, s, j: int,
                            nodes: int = 32) -> tuple[float, float]:
    """Full-ball integral of ``f · (x_j - y_j)/(σ-s) · G`` and its reflected half-ball form."""
    x = np.asarray(x, float)
    off, w, c = ball_rule(k.n, r, j, nodes)
    y = x + off
    kern = (x[j] - y[:, j]) / (sigma - s) * gaussian_eval(k, sigma, x, s, y)
    full = float(np.sum(w * f(y) * kern))
    yr = y.copy()
    yr[:, j] = 2 * x[j] - y[:, j]
    half = c <= 0  # the half ball {x_j >= y_j}
    half_reflected = float(np.sum((w * (f(y) - f(yr)) * kern)[half]))
    return full, half_reflected


def small_ball_integral(f: Callable, x, sigma: float, s0: float, j: int, rho: float,
                        nu: float = 1.0, mu_prime: Callable | float = 1.0, n: int = 3,
                        radius_power: float = 0.4, nodes: int = 24) -> float:
    """``ρ · |∫_{s0}^{σ} ∫_{B_{ρ^p}(x)} f(y) G_{,j}(σ, x; s, y) dy ds|``.

    The time integrand is ``O((σ-s)^{-1/2})``, removed by ``s = σ - u²``.
    """
    k = GaussianKernel(n, rho, nu, mu_prime)
    x = np.asarray(x, float)
    off, w, _ = ball_rule(n, rho**radius_power, j, nodes)
    y = x + off
    fy = f(y)
    u, wu = _gl(0.0, math.sqrt(sigma - s0), nodes)
    total = 0.0
    for ui, wi in zip(u, wu):
        s = sigma - ui * ui
        g = gaussian_grad(k, sigma, x, s, y, j)
        total += wi * 2.0 * ui * np.sum(w * fy * g)
    return rho * abs(total)


# -- Levy term bound ----------------------------------------------------------------

def levy_term_bound_check(k: GaussianKernel, s_range=(0.1, 0.5), samples: int = 10_000,
                          lipschitz: float | None = None, seed: int = 0,
                          form: str = "stated") -> dict:
    """Sample ``|(μ'(σ) - μ'(s)) ΔG|`` against a Gaussian majorant.

    ``form="stated"`` is ``(C⁰ + c/(2μ'(s))) · √2 (8πD)^{-n/2} exp(-r²/(8D))``.
    ``form="derived"`` is ``(c/(ρνμ'(s))) (C⁰ + n/2) 2^{n/2} (8πD)^{-n/2} exp(-r²/(8D))``,
    which follows from ``|ΔG| <= (r²/(4D²) + n/(2D)) G`` and ``|σ - s|/D = 1/(ρνμ'(s))``.
    """
    lo, hi = s_range
    c = chart_mu_prime_lipschitz(lo, hi) if lipschitz is None else lipschitz
    rng = np.random.default_rng(seed)
    a = rng.uniform(lo, hi, samples)
    b = rng.uniform(lo, hi, samples)
    s, sig = np.minimum(a, b), np.maximum(a, b)
    keep = sig > s
    s, sig = s[keep], sig[keep]
    D = k.diffusivity(sig, s)
    r = np.abs(rng.normal(size=s.size)) * np.sqrt(2 * D) * rng.uniform(0, 4, s.size)
    x = np.zeros((s.size, k.n))
    x[:, 0] = r
    y = np.zeros(k.n)
    lhs = np.abs((k.mup(sig) - k.mup(s)) * gaussian_laplacian(k, sig, x, s, y))
    g8 = (8 * np.pi * D) ** (-k.n / 2.0) * np.exp(-r**2 / (8 * D))
    mps = k.mup(s)
    if form == "stated":
        rhs = (C0 + c / (2 * mps)) * math.sqrt(2.0) * g8
    elif form == "derived":
        rhs = (c / (k.rho * k.nu * mps)) * (C0 + k.n / 2.0) * 2 ** (k.n / 2.0) * g8
    else:
        raise ConfigurationError(f"unknown bound form {form!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        slack = (rhs - lhs) / rhs
    viol = int(np.sum(lhs > rhs))
    return {
        "form": form, "samples": int(s.size), "violations": viol,
        "max_ratio": float(np.max(lhs / rhs)), "max_slack": float(np.max(slack)),
        "min_slack": float(np.min(slack)),
        "config": {"n": k.n, "rho": k.rho, "nu": k.nu, "s_range": [lo, hi], "lipschitz": c, "seed": seed},
    }


def fourier_damping_factor(xi, dprime: float, rho: float, nu: float, mu_prime: float) -> float:
    """``exp(-ρνμ'|ξ|²Δ')``; with ``ξ = 2πα/l`` it is the product step's heat diagonal."""
    if not dprime > 0:
        raise ConfigurationError("step length must be positive")
    xi = np.asarray(xi, float)
    return float(np.exp(-rho * nu * mu_prime * np.sum(xi * xi) * dprime))
