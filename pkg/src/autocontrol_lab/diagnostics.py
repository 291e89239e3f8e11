"""Envelope fitting plus the convolution-rule oracle and run monitors."""
from __future__ import annotations

import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, DegenerateInputError
from .lattice import DecayEnvelope, ModeField, check_same_lattice, hs_norm, mode_norm

FIT_FLOOR = 1e-300
S_MAX = 60.0


@dataclass
class NormSeries:
    """Time series of ``h^s`` norms keyed by tag ``s`` plus the sup amplitude."""

    tags: tuple = (0.0,)
    times: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    sup_mode: list = field(default_factory=list)

    def __post_init__(self):
        self.tags = tuple(float(s) for s in self.tags)
        for s in self.tags:
            self.values.setdefault(s, [])

    def append_values(self, t: float, norms: dict, sup: float) -> None:
        if self.times and not t > self.times[-1]:
            raise ConfigurationError("times must be strictly increasing")
        self.times.append(float(t))
        for s in self.tags:
            self.values[s].append(float(norms[s]))
        self.sup_mode.append(float(sup))

    def record(self, t: float, v: ModeField) -> None:
        self.append_values(t, {s: hs_norm(v, s) for s in self.tags}, v.sup())

    def l2(self) -> np.ndarray:
        if 0.0 not in self.values:
            raise ConfigurationError("series has no l2 (s=0) tag")
        return np.asarray(self.values[0.0])

    def __len__(self):
        return len(self.times)

    def header(self) -> list[str]:
        return ["time"] + [f"h{s:g}" for s in self.tags] + ["sup"]

    def rows(self):
        for k, t in enumerate(self.times):
            yield [repr(t)] + [repr(self.values[s][k]) for s in self.tags] + [repr(self.sup_mode[k])]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            w.writerows(self.rows())
        return path


# -- envelope fit ------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeFit:
    C: float
    s: float
    underdetermined: bool = False
    residual: float = 0.0

    @property
    def envelope(self) -> DecayEnvelope:
        return DecayEnvelope(self.C, self.s)

    def to_dict(self) -> dict:
        return {"C": self.C, "s": self.s, "underdetermined": self.underdetermined,
                "residual": self.residual}


def envelope_fit(v: ModeField, mask: np.ndarray | None = None, s_max: float = S_MAX) -> EnvelopeFit:
    """Least-squares fit of ``log|v| ≈ log C - log(1 + |α|^s)``.

    Only amplitudes above ``FIT_FLOOR`` at ``|α| >= 1`` (and inside ``mask``
    if given) enter the fit.  The returned ``C`` is then the smallest constant
    for which the envelope holds exactly at the fitted ``s`` over the same
    selection plus the zero mode.
    """
    amps = np.abs(v.amps)
    if not np.any(amps > 0):
        raise DegenerateInputError("cannot fit an envelope to an all-zero field")
    norm = np.broadcast_to(mode_norm(v.n, v.M), amps.shape)
    sel = np.ones(amps.shape, dtype=bool) if mask is None else np.broadcast_to(mask, amps.shape)
    use = sel & (amps > FIT_FLOOR) & (norm >= 1.0)
    a, r = amps[use], norm[use]
    if np.unique(np.round(r, 12)).size < 2:
        peak = float(np.max(amps[sel])) if np.any(sel) else float(np.max(amps))
        return EnvelopeFit(peak, 0.0, underdetermined=True)
    la = np.log(a)
    lr = np.log(r)

    def sse(s):
        # log(1 + r^s) computed stably
        lw = np.logaddexp(0.0, s * lr)
        logc = np.mean(la + lw)
        return float(np.sum((la + lw - logc) ** 2))

    res = optimize.minimize_scalar(sse, bounds=(0.0, s_max), method="bounded",
                                   options={"xatol": 1e-10})
    s_hat = float(res.x)
    bound = np.logaddexp(0.0, s_hat * np.log(np.maximum(norm, 1e-300)))
    bound = np.where(norm == 0, math.log(2.0) if s_hat == 0 else 0.0, bound)
    cand = amps[sel & (amps > 0)] * np.exp(bound[sel & (amps > 0)])
    return EnvelopeFit(float(np.max(cand)), s_hat, residual=float(res.fun))


# -- convolution rule -----------------------------------------------------------------

@dataclass(frozen=True)
class RuleResult:
    c: float
    stability: float
    s_out: float
    measured_exponent: float
    shells: dict  # |α| -> (min S, max S) with S the raw sum
    c_alpha: dict  # α (fundamental domain) -> c(α) at the finest truncation

    def normalized_nonincreasing(self, radius: float) -> tuple[bool, list]:
        """Shell-wise check that ``S(α) = c(α)/(1+|α|^{s_out})`` does not grow with ``|α|``.

        Distinct ``α`` on one shell may differ; a later shell must not exceed
        the smallest value on the previous shell.
        """
        rs = sorted(r for r in self.shells if r <= radius + 1e-12)
        bad = []
        for r0, r1 in zip(rs, rs[1:]):
            if self.shells[r1][1] > self.shells[r0][0]:
                bad.append((r0, r1))
        return not bad, bad


def _fundamental(n: int, radius: float) -> list[tuple]:
    R = int(math.floor(radius))
    return [a for a in itertools.product(range(R + 1), repeat=n)
            if list(a) == sorted(a) and math.sqrt(sum(x * x for x in a)) <= radius + 1e-12]


def _rule_sums(n, s_a, s_b, M, weight, alphas):
    axis = np.arange(-M, M + 1, dtype=float)
    g = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), -1).reshape(-1, n)
    ng = np.linalg.norm(g, axis=1)
    base = (ng if weight == "gamma" else 1.0) / (1.0 + ng**s_b)
    out = {}
    for a in alphas:
        d = np.linalg.norm(np.asarray(a, float) - g, axis=1)
        out[a] = float(np.sum(base / (1.0 + d**s_a)))
    return out


def convolution_rule_oracle(n: int, s_a: float, s_b: float, M: int, weight: str = "none") -> RuleResult:
    """Brute-force constant of the discrete convolution rule.

    ``c(α) = (1+|α|^{s_out}) Σ_γ w(γ)/((1+|α-γ|^{s_a})(1+|γ|^{s_b}))`` over
    ``γ ∈ [-M, M]^n`` and ``|α| <= M/2``, with
    ``s_out = min(s_a + s_b - n - 1, n + 3)``.  ``stability`` compares the
    truncations ``M`` and ``M/2`` on their common window ``|α| <= M/4``.
    ``weight`` is ``"none"`` or ``"gamma"`` (factor ``|γ|``).
    """
    if weight not in ("none", "gamma"):
        raise ConfigurationError("weight must be 'none' or 'gamma'")
    if not (s_a > n and s_b > n):
        raise ConfigurationError("need s_a, s_b > n for summability")
    if M < 4:
        raise ConfigurationError("M must be >= 4")
    s_out = min(s_a + s_b - n - 1, n + 3)
    alphas = _fundamental(n, M / 2)
    fine = _rule_sums(n, s_a, s_b, M, weight, alphas)
    window = [a for a in alphas if math.sqrt(sum(x * x for x in a)) <= M / 4 + 1e-12]
    coarse = _rule_sums(n, s_a, s_b, M // 2, weight, window)
    cfun = lambda a, S: (1.0 + math.sqrt(sum(x * x for x in a)) ** s_out) * S
    c_alpha = {a: cfun(a, S) for a, S in fine.items()}
    c_fine = max(c_alpha[a] for a in window)
    c_coarse = max(cfun(a, S) for a, S in coarse.items())
    shells = defaultdict(list)
    for a, S in fine.items():
        shells[round(math.sqrt(sum(x * x for x in a)), 9)].append(S)
    shells = {r: (min(v), max(v)) for r, v in shells.items()}
    # decay exponent of S(α) from a log-log fit over 2 <= |α| <= M/2
    rr = np.array([r for r in shells if r >= 2.0])
    if rr.size >= 2:
        ss = np.array([shells[r][1] for r in rr])
        slope = np.polyfit(np.log(rr), np.log(ss), 1)[0]
        measured = float(-slope)
    else:
        measured = float("nan")
    return RuleResult(float(max(c_alpha.values())), c_fine / c_coarse, float(s_out), measured,
                      shells, c_alpha)


# -- preservation and blow-up ---------------------------------------------------------

def envelope_preserved(snapshots: Sequence[ModeField], env: DecayEnvelope, times=None,
                       rtol: float = 1e-12) -> dict:
    """Per-snapshot envelope check with worst margin and first violation."""
    snapshots = list(snapshots)
    if snapshots:
        check_same_lattice(*snapshots)
    times = list(range(len(snapshots))) if times is None else list(times)
    flags, margins = [], []
    for v in snapshots:
        flags.append(env.satisfied(v, rtol))
        margins.append(env.margin(v))
    first = next((k for k, ok in enumerate(flags) if not ok), None)
    return {
        "preserved": first is None,
        "per_snapshot": flags,
        "margins": margins,
        "worst_margin": min(margins) if margins else math.inf,
        "first_violation_index": first,
        "first_violation_time": None if first is None else times[first],
        "envelope": env.to_dict(),
    }


@dataclass(frozen=True)
class BlowupEvent:
    index: int
    time: float
    value: float
    reason: str

    def to_dict(self) -> dict:
        return {"index": self.index, "time": self.time, "value": self.value, "reason": self.reason}


def blowup_detect(series: NormSeries, ratio: float = 10.0, nonfinite=None) -> BlowupEvent | None:
    """First index where the l2 value exceeds ``ratio`` times its initial value.

    ``nonfinite`` is an optional stepper event (a :class:`NumericBlowup`);
    it is reported if no threshold crossing happened before it.  A series
    starting at zero has no relative scale, so only ``nonfinite`` applies.
    """
    if not ratio > 1:
        raise ConfigurationError("threshold ratio must exceed 1")
    vals = series.l2()
    if vals.size and vals[0] > 0:
        hits = np.nonzero(~(vals <= ratio * vals[0]))[0]
        if hits.size:
            k = int(hits[0])
            return BlowupEvent(k, series.times[k], float(vals[k]), "threshold")
    if nonfinite is not None:
        return BlowupEvent(int(nonfinite.step), float(nonfinite.time), float(nonfinite.last_norm),
                           "non-finite")
    return None
