"""Run configuration and execution with manifest persistence.

Configs are YAML files mirroring :class:`RunConfig`.  A run writes
``series.csv``, ``report.json``, ``config.yaml`` (the normalized echo),
``final_field.json`` for lattice models, and ``manifest.json`` which
inventories every other file with its SHA-256 digest.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .diagnostics import NormSeries, blowup_detect, envelope_fit, envelope_preserved
from .dilatation import DilatationChart
from .dynamics import FluidParams, ForcingSpec, damped_rhs, forced_euler_step, make_rhs, positive_orthant
from .errors import ConfigurationError, NumericBlowup
from .lattice import DecayEnvelope, ModeField, envelope_field, hs_norm
from .steppers import StepPlan, estimate_constants, make_stepper, step_size_bound
from .testbeds import ScalarOdeConfig, ShellConfig, integrate_kp, ode_analytic, _rk4_scalar

MODELS = ("ns", "euler", "burgers", "damped_comparison", "ode", "kp", "forced_counterexample",
          "kernel_checks")
LATTICE_MODELS = ("ns", "euler", "burgers", "damped_comparison", "forced_counterexample")
OUTPUT_ROOT_ENV = "AUTOCONTROL_OUTPUT_ROOT"

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_BLOWUP = 0, 1, 2, 3


class ConfigValidationError(ConfigurationError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid run config: " + "; ".join(errors))


@dataclass(frozen=True)
class LatticeSpec:
    n: int = 3
    M: int = 4
    l: float = 1.0


@dataclass(frozen=True)
class InitialSpec:
    kind: str = "envelope"  # envelope | zero | file
    C: float = 1.0
    s: float = 5.0
    real: bool = True
    solenoidal: bool = True
    zero_mean: bool = False
    path: str | None = None


@dataclass(frozen=True)
class DiagnosticsSpec:
    norm_tags: tuple = (0.0, 2.0, 5.0)
    cadence: int = 1
    envelope: DecayEnvelope | None = None
    fit_envelope: bool = True
    blowup_ratio: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    model: str
    plan: StepPlan
    lattice: LatticeSpec = LatticeSpec()
    fluid: FluidParams | None = None
    forcing: ForcingSpec = ForcingSpec()
    chart: DilatationChart | None = None
    auto_rho: bool = False
    damped_model: str = "ns"
    diagnostics: DiagnosticsSpec = DiagnosticsSpec()
    initial: InitialSpec = InitialSpec()
    ode: ScalarOdeConfig | None = None
    kp: ShellConfig | None = None
    output_dir: str = "runs/out"
    seed: int = 0
    expect_blowup: bool = False

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if self.chart is not None:
            d["chart"] = self.chart.to_dict()
        return _plain(d)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _build(cls, data, errors, name):
    if data is None:
        return None
    if not isinstance(data, dict):
        errors.append(f"{name}: expected a mapping")
        return None
    known = {f.name for f in dataclasses.fields(cls)}
    extra = set(data) - known - ({"lambda"} if cls is DilatationChart else set())
    if extra:
        errors.append(f"{name}: unknown fields {sorted(extra)}")
        return None
    try:
        if cls is DilatationChart:
            return DilatationChart.from_dict(data)
        return cls(**data)
    except (TypeError, ValueError) as exc:
        errors.append(f"{name}: {exc}")
        return None


def _tuplify(d: dict | None, keys) -> dict | None:
    if d is None:
        return None
    d = dict(d)
    for k in keys:
        if k in d and isinstance(d[k], list):
            d[k] = tuple(d[k])
    return d


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig`; all problems are reported together."""
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigValidationError(["top level: expected a mapping"])
    known = {f.name for f in dataclasses.fields(RunConfig)}
    extra = set(data) - known
    if extra:
        errors.append(f"unknown top-level fields {sorted(extra)}")
    for req in ("experiment", "model", "plan"):
        if req not in data:
            errors.append(f"{req}: required")
    model = data.get("model")
    if model is not None and model not in MODELS:
        errors.append(f"model: must be one of {MODELS}")
    plan = _build(StepPlan, data.get("plan"), errors, "plan")
    lattice = _build(LatticeSpec, data.get("lattice", {}), errors, "lattice")
    fluid = _build(FluidParams, data.get("fluid"), errors, "fluid")
    forcing_d = data.get("forcing") or {}
    if isinstance(forcing_d, dict) and "coefficients" in forcing_d:
        forcing_d = {**forcing_d, "coefficients": tuple(
            _tuplify(c, ("times", "values")) for c in forcing_d["coefficients"])}
    forcing = _build(ForcingSpec, forcing_d, errors, "forcing") or ForcingSpec()
    chart = _build(DilatationChart, data.get("chart"), errors, "chart")
    diag_d = dict(data.get("diagnostics") or {})
    env = diag_d.pop("envelope", None)
    diag_d = _tuplify(diag_d, ("norm_tags",))
    if "norm_tags" in diag_d:
        diag_d["norm_tags"] = tuple(float(s) for s in diag_d["norm_tags"])
    diagnostics = _build(DiagnosticsSpec, diag_d, errors, "diagnostics") or DiagnosticsSpec()
    if env is not None:
        env_obj = _build(DecayEnvelope, env, errors, "diagnostics.envelope")
        diagnostics = dataclasses.replace(diagnostics, envelope=env_obj)
    if not diagnostics.blowup_ratio > 1:
        errors.append("diagnostics.blowup_ratio: must exceed 1")
    if diagnostics.cadence < 1:
        errors.append("diagnostics.cadence: must be >= 1")
    initial = _build(InitialSpec, data.get("initial", {}), errors, "initial") or InitialSpec()
    ode = _build(ScalarOdeConfig, data.get("ode"), errors, "ode")
    kp = _build(ShellConfig, _tuplify(data.get("kp"), ("K0",)), errors, "kp")

    if model in LATTICE_MODELS:
        if fluid is None:
            errors.append(f"fluid: required for model {model}")
        elif lattice is not None and (fluid.n != lattice.n or fluid.l != lattice.l):
            errors.append("fluid: n and l must match lattice")
        if initial.kind not in ("envelope", "zero", "file"):
            errors.append("initial.kind: must be envelope, zero or file")
        if initial.kind == "file" and not initial.path:
            errors.append("initial.path: required for kind=file")
    if model == "euler" and fluid is not None and fluid.nu != 0:
        errors.append("fluid.nu: euler model requires nu = 0")
    if model == "damped_comparison":
        if "chart" not in data or data["chart"] is None:
            errors.append("chart: required for damped_comparison")
        if data.get("damped_model", "ns") not in ("ns", "burgers"):
            errors.append("damped_model: must be ns or burgers")
    if model == "forced_counterexample" and forcing.kind != "dynamic_counterexample":
        errors.append("forcing.kind: forced_counterexample needs dynamic_counterexample")
    if model == "ode" and ode is None:
        errors.append("ode: required for model ode")
    if model == "kp" and kp is None:
        errors.append("kp: required for model kp")
    if plan is not None and model in ("ode", "kp") and plan.scheme != "rk4":
        errors.append("plan.scheme: ode and kp runs use rk4")
    if errors:
        raise ConfigValidationError(errors)
    return RunConfig(
        experiment=str(data["experiment"]), model=model, plan=plan, lattice=lattice, fluid=fluid,
        forcing=forcing, chart=chart, auto_rho=bool(data.get("auto_rho", False)),
        damped_model=data.get("damped_model", "ns"), diagnostics=diagnostics, initial=initial,
        ode=ode, kp=kp, output_dir=str(data.get("output_dir", "runs/out")),
        seed=int(data.get("seed", 0)), expect_blowup=bool(data.get("expect_blowup", False)),
    )


def load_config(path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigValidationError([f"yaml: {exc}"]) from exc
    return config_from_dict(data)


def parse_config(text: str) -> RunConfig:
    return config_from_dict(yaml.safe_load(text))


# -- execution ---------------------------------------------------------------------

@dataclass
class RunManifest:
    config: dict
    version: str
    wall_clock: float
    constants: dict
    events: list
    files: dict
    status: str
    output_dir: str

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def exit_code(self, expect_blowup: bool) -> int:
        if self.status == "blowup" and not expect_blowup:
            return EXIT_BLOWUP
        return EXIT_OK


def resolve_output(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not out.is_absolute():
        out = Path(root) / out
    return out


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if dataclasses.is_dataclass(x):
        return dataclasses.asdict(x)
    return str(x)


def initial_field(cfg: RunConfig) -> ModeField:
    lat, ini = cfg.lattice, cfg.initial
    if ini.kind == "zero":
        return ModeField.zeros(lat.n, lat.M, l=lat.l)
    if ini.kind == "file":
        v = ModeField.load(ini.path)
        if v.lattice_key != (lat.n, lat.M, float(lat.l)):
            raise ConfigValidationError([f"initial.path: lattice {v.lattice_key} does not match config"])
        return v
    rng = np.random.default_rng(cfg.seed)
    sol = ini.solenoidal and cfg.model not in ("burgers",) and lat.n >= 2
    return envelope_field(lat.n, lat.M, ini.C, ini.s, rng, l=lat.l, real=ini.real,
                          solenoidal=sol, zero_mean=ini.zero_mean)


def _lattice_run(cfg: RunConfig, out: Path) -> tuple[dict, list, dict, ModeField | None]:
    v = initial_field(cfg)
    p = cfg.fluid
    plan = cfg.plan
    diag = cfg.diagnostics
    constants: dict = {}
    chart = cfg.chart
    if cfg.model == "damped_comparison" and cfg.auto_rho:
        C = hs_norm(v, 2.0)
        k = estimate_constants(v.n, v.M, C=C, t0=chart.t0)
        rho = step_size_bound(k, v.n, 1e-3 * C)
        chart = dataclasses.replace(chart, rho=min(rho, 1.0))
        constants = {**k.to_dict(), "rho": chart.rho, "eps": 1e-3 * C}
    series = NormSeries(tags=diag.norm_tags)
    series.record(0.0, v)
    snaps, snap_times = [v], [0.0]
    events: list = []
    fits: list = []
    pos = positive_orthant(v.n, v.M)

    if cfg.model == "forced_counterexample":
        step = lambda u, t, k: forced_euler_step(u, p, cfg.forcing, plan.dt, t)
    else:
        if cfg.model == "damped_comparison":
            model, ch = cfg.damped_model, chart
            rhs = lambda u, s: damped_rhs(u, ch, s, p, model)
        else:
            model, ch = ("burgers" if cfg.model == "burgers" else "ns"), None
            rhs = make_rhs(model, p, cfg.forcing)
        stepper = make_stepper(plan.scheme, rhs, p, model, ch)
        step = lambda u, t, k: stepper(u, t, plan.dt, k)

    status = "ok"
    for k in range(plan.steps):
        t = k * plan.dt
        try:
            v = step(v, t, k)
        except NumericBlowup as exc:
            events.append({"type": "blowup", "reason": "non-finite", "step": exc.step,
                           "time": t, "last_norm": exc.last_norm})
            status = "blowup"
            break
        if (k + 1) % diag.cadence == 0 or k + 1 == plan.steps:
            tk = (k + 1) * plan.dt
            series.record(tk, v)
            snaps.append(v)
            snap_times.append(tk)
            if cfg.model == "forced_counterexample" and np.any(v.amps):
                fits.append({"time": tk, **envelope_fit(v, mask=pos).to_dict()})
    if status == "ok":
        ev = blowup_detect(series, diag.blowup_ratio)
        if ev is not None:
            events.append({"type": "blowup", **ev.to_dict()})
            status = "blowup"
    series.to_csv(out / "series.csv")
    report: dict = {"status": status, "final_l2": v.norm(), "final_sup": v.sup()}
    if diag.fit_envelope and np.any(v.amps):
        report["final_fit"] = envelope_fit(v).to_dict()
    if diag.envelope is not None:
        rep = envelope_preserved(snaps, diag.envelope, snap_times)
        report["envelope"] = {k_: rep[k_] for k_ in ("preserved", "worst_margin", "first_violation_time")}
        if not rep["preserved"]:
            events.append({"type": "envelope_violation", "time": rep["first_violation_time"]})
    if fits:
        report["positive_orthant_fits"] = fits
    if chart is not None:
        report["chart"] = chart.to_dict()
    v.save(out / "final_field.json")
    return report, events, constants, status


def _ode_run(cfg: RunConfig, out: Path):
    c = cfg.ode
    plan = cfg.plan
    series = NormSeries(tags=(0.0,))
    x = float(c.x0)
    series.append_values(0.0, {0.0: abs(x)}, abs(x))
    f = lambda y: c.lam_ode * y * y
    events, status = [], "ok"
    thr = cfg.diagnostics.blowup_ratio * abs(c.x0)
    for k in range(1, plan.steps + 1):
        x_new = _rk4_scalar(f, x, plan.dt)
        if not math.isfinite(x_new) or abs(x_new) >= thr:
            # bisection on the partial step for the crossing time
            lo, hi = 0.0, plan.dt
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                y = _rk4_scalar(f, x, mid)
                lo, hi = (mid, hi) if (math.isfinite(y) and abs(y) < thr) else (lo, mid)
            t_cross = (k - 1) * plan.dt + 0.5 * (lo + hi)
            events.append({"type": "blowup", "reason": "threshold", "step": k, "time": t_cross,
                           "threshold": thr, "analytic_time": c.blowup_time})
            status = "blowup"
            break
        x = x_new
        if k % cfg.diagnostics.cadence == 0:
            series.append_values(k * plan.dt, {0.0: abs(x)}, abs(x))
    series.to_csv(out / "series.csv")
    last_t = series.times[-1]
    report = {"status": status, "last_time": last_t, "last_value": x}
    if last_t < c.blowup_time:
        report["last_rel_err"] = abs(x / ode_analytic(c, last_t) - 1.0)
    return report, events, {}, status


def _kp_run(cfg: RunConfig, out: Path):
    run = integrate_kp(cfg.kp, t_end=cfg.plan.horizon, dt=cfg.plan.dt,
                       ratio=cfg.diagnostics.blowup_ratio, tags=cfg.diagnostics.norm_tags)
    run.series.to_csv(out / "series.csv")
    events = []
    status = "ok"
    if run.event is not None:
        events.append({"type": "blowup", **run.event.to_dict()})
        status = "blowup"
    return {"status": status, "final_time": float(run.times[-1])}, events, {}, status


def _kernel_run(cfg: RunConfig, out: Path):
    from .experiments import kernel_suite
    m = kernel_suite(seed=cfg.seed)
    m.pop("runtime", None)
    events = []
    if m["levy_stated_violations"]:
        events.append({"type": "bound_violation", "check": "levy_stated",
                       "violations": m["levy_stated_violations"]})
    return m, events, {}, "ok"


def run(cfg: RunConfig) -> RunManifest:
    """Execute ``cfg`` and write outputs plus the manifest."""
    out = resolve_output(cfg)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    if cfg.model in LATTICE_MODELS:
        report, events, constants, status = _lattice_run(cfg, out)
    elif cfg.model == "ode":
        report, events, constants, status = _ode_run(cfg, out)
    elif cfg.model == "kp":
        report, events, constants, status = _kp_run(cfg, out)
    else:
        report, events, constants, status = _kernel_run(cfg, out)
    _write_json(out / "report.json", report)
    (out / "config.yaml").write_text(cfg.dump())
    files = {p.name: sha256(p) for p in sorted(out.iterdir())
             if p.is_file() and p.name != "manifest.json"}
    manifest = RunManifest(
        config=cfg.to_dict(), version=__version__, wall_clock=time.perf_counter() - t_start,
        constants=constants, events=events, files=files, status=status, output_dir=str(out),
    )
    _write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def verify_manifest(path) -> list[str]:
    """Re-hash every inventoried file; return the names that are missing or differ."""
    path = Path(path)
    data = json.loads(path.read_text())
    bad = []
    for name, digest in data["files"].items():
        f = path.parent / name
        if not f.exists() or sha256(f) != digest:
            bad.append(name)
    return bad
