"""Acceptance criteria registry mapping each fixture to its tolerances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from . import experiments as E

SUITES = ("acceptance", "kernel", "envelope", "testbeds", "all")


@dataclass
class SubCheck:
    label: str
    measured: object
    required: str
    ok: bool | None  # None marks an informational line that does not gate

    def line(self) -> str:
        m = self.measured
        if isinstance(m, float):
            m = f"{m:.4g}"
        tag = "" if self.ok is not None else " [info]"
        return f"{self.label}={m} ({self.required}){tag}"


@dataclass
class CriterionResult:
    id: int
    name: str
    passed: bool
    checks: list
    measured: dict = field(repr=False, default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] #{self.id} {self.name}: " + "; ".join(c.line() for c in self.checks)

    def failing(self) -> list[str]:
        return [c.label for c in self.checks if c.ok is False]


def _le(label, x, tol):
    return SubCheck(label, x, f"<= {tol:g}", bool(x <= tol))


def _ge(label, x, tol):
    return SubCheck(label, x, f">= {tol:g}", bool(x >= tol))


def _in(label, x, lo, hi):
    return SubCheck(label, x, f"in [{lo:g}, {hi:g}]", bool(lo <= x <= hi))


def _true(label, x, required="true"):
    return SubCheck(label, x, required, bool(x))


# checks receive (measured, tolerances) and return SubCheck lists

def _c1(m, t):
    return [_le("max_rel_err", m["max_rel_err"], t["rel_err"]),
            _in("blowup_time", m["blowup_time"], *t["blowup_window"]),
            _le("runtime_s", m["runtime"], t["runtime"])]


def _c2(m, t):
    return [_le("residual", m["residual"], t["residual"]),
            _le("scaled_residual", m["scaled_residual"], t["residual"]),
            _le("runtime_s", m["runtime"], t["runtime"])]


def _c3(m, t):
    return [_le("roundtrip", m["roundtrip"], t["roundtrip"]),
            _le("sigma_half_error", m["sigma_half_error"], t["sigma_half"]),
            _in("fd_order_min", m["fd_order_min"], *t["fd_order"])]


def _c4(m, t):
    return [_ge("inf_mu_minus_bound", m["inf_slack"], 0.0),
            _ge("bound_minus_sup_mu_tau2", m["sup_slack"], 0.0),
            _le("runtime_s", m["runtime"], t["runtime"])]


def _c5(m, t):
    return [_le("divergence_rel", m["divergence_rel"], t["divergence"]),
            _le("reality_defect", m["reality_defect"], t["reality"]),
            _le("idempotence", m["idempotence"], t["idempotence"])]


def _c6(m, t):
    return [_le("rel_err", m["rel_err"], t["rel_err"])]


def _c7(m, t):
    return [_ge("order_min", m["order_min"], t["order"]),
            SubCheck("K", m["K"], "finite", bool(math.isfinite(m["K"])))]


def _c8(m, t):
    return [_true("admissible_preserved", m["admissible"]["preserved"]),
            SubCheck("rho", m["rho"], "from step_size_bound", None),
            SubCheck("inflated_preserved", m["inflated"]["preserved"], "contrast, may fail", None)]


def _c9(m, t):
    return [SubCheck("negative", f"{m['negative']}/{m['trials']}", f"{t['trials']}/{t['trials']}",
                     m["negative"] == m["trials"] == t["trials"])]


def _c10(m, t):
    return [SubCheck("c", m["c"], "finite", bool(math.isfinite(m["c"]))),
            _in("stability", m["stability"], *t["stability"]),
            _true("normalized_nonincreasing", m["nonincreasing"]),
            SubCheck("measured_exponent", m["measured_exponent"], f"s_out={m['s_out']:g}", None),
            _le("runtime_s", m["runtime"], t["runtime"])]


def _c11(m, t):
    return [_le("normalization_err", m["normalization_err"], t["normalization"]),
            _in("fd_order_min", m["fd_order_min"], *t["fd_order"]),
            _le("antisym_gap", m["antisym_gap"], t["antisym"]),
            _le("levy_stated_violations", m["levy_stated_violations"], t["levy_violations"]),
            SubCheck("levy_derived_violations", m["levy_derived_violations"], "== 0", None),
            _true("rho_sweep_decreasing", m["sweep_decreasing"]),
            _le("runtime_s", m["runtime"], t["runtime"])]


def _c12(m, t):
    ev = m["kp_event"]
    return [SubCheck("kp_blowup_time", None if ev is None else ev["time"], "event present", ev is not None),
            _true("burgers_preserved", m["burgers_preserved"]),
            _le("h5_mismatch", abs(m["kp_h5_initial"] - m["burgers_h5_initial"]), t["h5_match"])]


def _c13(m, t):
    return [_ge("longest_decreasing_run", m["longest_decreasing_run"], t["run"]),
            SubCheck("negative_orthant_max", m["negative_orthant_max"], "== 0",
                     m["negative_orthant_max"] == 0.0)]


def _c14(m, t):
    return [_le("sup_ratio", m["sup_ratio"], t["sup_ratio"]),
            _true("monotone_after_transient", m["monotone_after_transient"]),
            _le("runtime_s", m["runtime"], t["runtime"])]


@dataclass(frozen=True)
class Criterion:
    id: int
    name: str
    suites: tuple
    run: Callable[[], dict]
    check: Callable[[dict, dict], list]
    tolerances: dict


CRITERIA = (
    Criterion(1, "ODE blow-up", ("testbeds",), E.ode_blowup, _c1,
              {"rel_err": 1e-6, "blowup_window": (0.99, 1.01), "runtime": 5.0}),
    Criterion(2, "Transformed ODE identity", ("testbeds",), E.transformed_identity, _c2,
              {"residual": 1e-8, "runtime": 1.0}),
    Criterion(3, "Dilatation chart", (), E.chart_checks, _c3,
              {"roundtrip": 1e-12, "sigma_half": 1e-15, "fd_order": (1.9, 2.1)}),
    Criterion(4, "Mu-coefficient extrema", (), E.mu_extrema_check, _c4, {"runtime": 1.0}),
    Criterion(5, "Leray/structure invariants", (), E.structure_invariants, _c5,
              {"divergence": 1e-10, "reality": 1e-12, "idempotence": 1e-14}),
    Criterion(6, "Pure-heat product step", ("kernel",), E.pure_heat, _c6, {"rel_err": 1e-8}),
    Criterion(7, "Two-route consistency", (), E.two_route, _c7, {"order": 0.9}),
    Criterion(8, "Envelope preservation", ("envelope",), E.envelope_preservation, _c8, {}),
    Criterion(9, "Damping dominance at the boundary", ("envelope",), E.damping_dominance, _c9,
              {"trials": 100}),
    Criterion(10, "Convolution-rule oracle", ("envelope",), E.rule_oracle, _c10,
              {"stability": (0.9, 1.1), "runtime": 60.0}),
    Criterion(11, "Kernel suite", ("kernel",), E.kernel_suite, _c11,
              {"normalization": 1e-6, "fd_order": (1.9, 2.1), "antisym": 1e-8,
               "levy_violations": 0, "runtime": 30.0}),
    Criterion(12, "Blow-up contrast", ("envelope", "testbeds"), E.blowup_contrast, _c12,
              {"h5_match": 1e-9}),
    Criterion(13, "Forced-counterexample cascade", ("envelope",), E.forced_cascade, _c13, {"run": 3}),
    Criterion(14, "Long-run decay", (), E.long_run_decay, _c14,
              {"sup_ratio": 0.01, "runtime": 120.0}),
)


def select(suite: str) -> list[Criterion]:
    if suite not in SUITES:
        raise ValueError(f"suite must be one of {SUITES}")
    if suite in ("acceptance", "all"):
        return list(CRITERIA)
    return [c for c in CRITERIA if suite in c.suites]


def evaluate(c: Criterion, tolerances: dict | None = None, measured: dict | None = None) -> CriterionResult:
    tol = {**c.tolerances, **(tolerances or {})}
    m = c.run() if measured is None else measured
    checks = c.check(m, tol)
    passed = all(s.ok for s in checks if s.ok is not None)
    return CriterionResult(c.id, c.name, passed, checks, m)


def verify(suite: str = "acceptance", overrides: dict | None = None, echo=print) -> list[CriterionResult]:
    """Run the suite and print one line per criterion; ``overrides`` maps id -> tolerances."""
    overrides = overrides or {}
    results = []
    for c in select(suite):
        r = evaluate(c, overrides.get(c.id))
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results
