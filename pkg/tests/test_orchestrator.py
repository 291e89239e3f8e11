import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given, strategies as st

from autocontrol_lab import cli
from autocontrol_lab.lattice import ModeField, envelope_field
from autocontrol_lab.orchestrator import (
    EXIT_BLOWUP, EXIT_INVALID, EXIT_OK, ConfigValidationError, config_from_dict, load_config,
    parse_config, resolve_output, run, verify_manifest,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _ns(tmp_path, **over):
    d = {
        "experiment": "t", "model": "ns", "lattice": {"n": 2, "M": 2},
        "fluid": {"nu": 0.2, "l": 1.0, "n": 2}, "plan": {"dt": 0.01, "steps": 20},
        "initial": {"kind": "envelope", "C": 1.0, "s": 3.0},
        "diagnostics": {"norm_tags": [0, 2], "cadence": 5}, "output_dir": str(tmp_path / "run"),
        "seed": 4,
    }
    d.update(over)
    return d


def test_zero_initial_data_gives_zero_norms(tmp_path):
    cfg = config_from_dict(_ns(tmp_path, initial={"kind": "zero"}))
    m = run(cfg)
    assert m.status == "ok" and m.events == []
    rows = (tmp_path / "run" / "series.csv").read_text().splitlines()
    assert rows[0] == "time,h0,h2,sup"
    assert all(float(x) == 0.0 for r in rows[1:] for x in r.split(",")[1:])
    assert len(rows) == 1 + 1 + 20 // 5


def test_ode_run_records_blowup_near_one(tmp_path):
    cfg = config_from_dict({
        "experiment": "ode", "model": "ode", "ode": {"x0": 1.0, "lam_ode": 1.0},
        "plan": {"dt": 1e-4, "steps": 20000}, "output_dir": str(tmp_path / "ode"),
        "diagnostics": {"norm_tags": [0], "blowup_ratio": 1e4, "cadence": 100},
        "expect_blowup": True,
    })
    m = run(cfg)
    ev = [e for e in m.events if e["type"] == "blowup"]
    assert m.status == "blowup" and len(ev) == 1
    assert ev[0]["time"] == pytest.approx(1.0, abs=1e-3)
    assert m.exit_code(True) == EXIT_OK and m.exit_code(False) == EXIT_BLOWUP


def test_rerun_is_byte_identical(tmp_path):
    a = run(config_from_dict(_ns(tmp_path, output_dir=str(tmp_path / "a"))))
    b = run(config_from_dict(_ns(tmp_path, output_dir=str(tmp_path / "b"))))
    for name in ("series.csv", "report.json", "final_field.json"):
        assert a.files[name] == b.files[name]
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_lists_every_file_and_detects_tampering(tmp_path):
    m = run(config_from_dict(_ns(tmp_path)))
    out = tmp_path / "run"
    written = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(m.files) == written
    data = json.loads((out / "manifest.json").read_text())
    assert data["version"] and data["config"]["experiment"] == "t"
    assert verify_manifest(out / "manifest.json") == []
    with (out / "series.csv").open("a") as fh:
        fh.write("tampered\n")
    (out / "report.json").unlink()
    assert sorted(verify_manifest(out / "manifest.json")) == ["report.json", "series.csv"]


def test_initial_field_from_file(tmp_path):
    v = envelope_field(2, 2, 1.0, 3.0, np.random.default_rng(0))
    v.save(tmp_path / "v.json")
    cfg = config_from_dict(_ns(tmp_path, initial={"kind": "file", "path": str(tmp_path / "v.json")},
                               plan={"dt": 0.01, "steps": 1}))
    run(cfg)
    assert ModeField.load(tmp_path / "run" / "final_field.json").M == 2


def test_validation_names_every_field(tmp_path):
    bad = _ns(tmp_path, model="euler", plan={"dt": -1, "steps": 1}, bogus=1)
    bad["lattice"] = {"n": 3, "M": 2}
    with pytest.raises(ConfigValidationError) as ei:
        config_from_dict(bad)
    msg = " ".join(ei.value.errors)
    for field in ("bogus", "plan", "fluid"):
        assert field in msg
    with pytest.raises(ConfigValidationError, match="chart"):
        config_from_dict(_ns(tmp_path, model="damped_comparison"))
    with pytest.raises(ConfigValidationError, match="ode"):
        config_from_dict({"experiment": "x", "model": "ode", "plan": {"dt": 0.1, "steps": 1}})
    with pytest.raises(ConfigValidationError, match="model"):
        config_from_dict(_ns(tmp_path, model="mhd"))


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs_roundtrip(path):
    cfg = load_config(path)
    assert parse_config(cfg.dump()) == cfg


@given(st.floats(0.0, 2.0), st.integers(1, 50), st.floats(1e-4, 0.1), st.integers(0, 10**6),
       st.lists(st.floats(0, 6), min_size=1, max_size=4), st.sampled_from(["rk4", "euler",
                                                                           "trotter_first_order"]))
def test_config_roundtrip_property(nu, steps, dt, seed, tags, scheme):
    d = {"experiment": "p", "model": "ns", "lattice": {"n": 3, "M": 2},
         "fluid": {"nu": nu, "l": 1.0, "n": 3}, "plan": {"dt": dt, "steps": steps, "scheme": scheme},
         "diagnostics": {"norm_tags": tags, "envelope": {"C": 1.0, "s": 5.0}}, "seed": seed,
         "forcing": {"kind": "static_orthant", "eps": 0.2,
                     "coefficients": [{"kind": "table", "times": [0, 1], "values": [1, 2]}]}}
    cfg = config_from_dict(d)
    assert parse_config(cfg.dump()) == cfg
    assert config_from_dict(yaml.safe_load(cfg.dump())) == cfg


def test_output_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("AUTOCONTROL_OUTPUT_ROOT", str(tmp_path / "root"))
    cfg = config_from_dict(_ns(tmp_path, output_dir="rel/dir"))
    assert resolve_output(cfg) == tmp_path / "root" / "rel" / "dir"


def test_cli_run_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.yaml"
    good.write_text(yaml.safe_dump(_ns(tmp_path, initial={"kind": "zero"})))
    assert cli.main(["run", str(good)]) == EXIT_OK
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(_ns(tmp_path, fluid=None)))
    assert cli.main(["run", str(bad)]) == EXIT_INVALID
    assert "fluid" in capsys.readouterr().err
    kp = yaml.safe_load((CONFIGS / "kp_blowup.yaml").read_text())
    kp["output_dir"] = str(tmp_path / "kp")
    kp["expect_blowup"] = False
    (tmp_path / "kp.yaml").write_text(yaml.safe_dump(kp))
    assert cli.main(["run", str(tmp_path / "kp.yaml")]) == EXIT_BLOWUP
    kp["expect_blowup"] = True
    (tmp_path / "kp.yaml").write_text(yaml.safe_dump(kp))
    assert cli.main(["run", str(tmp_path / "kp.yaml")]) == EXIT_OK


def test_cli_constants_and_fit(tmp_path, capsys):
    assert cli.main(["constants", "3", "2"]) == 0
    k = json.loads(capsys.readouterr().out)
    assert {"C_K", "C_G", "C_m", "c_mu", "c_sup_mu"} <= set(k)
    v = envelope_field(2, 3, 1.5, 4.0, np.random.default_rng(0), real=False, solenoidal=False)
    v.save(tmp_path / "f.json")
    assert cli.main(["fit", str(tmp_path / "f.json")]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["C"] >= 1.5 * (1 - 1e-9)
    ModeField.zeros(1, 2, ncomp=1).save(tmp_path / "z.json")
    assert cli.main(["fit", str(tmp_path / "z.json")]) == 1


def test_cli_verify_corrupted_tolerance_fails_naming_criterion(capsys):
    # a negative relative-error budget cannot be met
    code = cli.main(["verify", "testbeds", "--tol", "1:rel_err=-1"])
    out, err = capsys.readouterr()
    assert code == 1
    assert "FAILED #1 ODE blow-up: max_rel_err" in err
    assert "[PASS] #2" in out and "[FAIL] #1" in out


def test_forced_config_keeps_negative_orthant_zero(tmp_path):
    from autocontrol_lab.dynamics import negative_orthant

    d = yaml.safe_load((CONFIGS / "forced_cascade.yaml").read_text())
    d["output_dir"] = str(tmp_path / "forced")
    m = run(config_from_dict(d))
    assert m.status == "ok"
    v = ModeField.load(tmp_path / "forced" / "final_field.json")
    assert np.all(v.amps[:, negative_orthant(v.n, v.M)] == 0)
    fits = json.loads((tmp_path / "forced" / "report.json").read_text())["positive_orthant_fits"]
    s = [f["s"] for f in fits]
    assert all(a > b for a, b in zip(s[-4:], s[-3:]))
