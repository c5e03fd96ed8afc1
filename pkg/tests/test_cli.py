import json
import subprocess
import sys

import numpy as np
import pytest

from _helpers import first_order, random_ph
from phloewner import io
from phloewner.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from phloewner.lti import DescriptorRealization, eval_transfer


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["generate-fom", "--h", "0.25", "--eps", "3", "--out-prefix", str(d / "fom_")]) == EXIT_OK
    assert main(["sample", "--fom", str(d / "fom_manifest.json"), "--channels", "1",
                 "--grid", "-1", "3", "120", "--out", str(d / "data.csv")]) == EXIT_OK
    return d


def test_generate_and_sample(workdir):
    man = json.loads((workdir / "fom_manifest.json").read_text())
    assert man["dimensions"]["n"] == 257
    lines = (workdir / "data.csv").read_text().splitlines()
    assert lines[0].startswith("side,omega") and len(lines) == 121


def test_identify_writes_all_outputs(workdir):
    out = workdir / "ph.json"
    assert main(["identify", "--data", str(workdir / "data.csv"), "--shift", "1", "--out", str(out)]) == EXIT_OK
    for suffix in ("_loewner.json", "_pencil.json", "_singular_values.csv", "_zeros.csv", "_diagnostics.json"):
        assert (workdir / f"ph{suffix}").exists(), suffix
    zeros = np.loadtxt(workdir / "ph_zeros.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.all(zeros[:, 0] > 0) and zeros[:, 2].max() < 1e-6
    diag = json.loads((workdir / "ph_diagnostics.json").read_text())
    assert diag["order_report"]["feedthrough"].startswith(("pencil", "given"))


def test_compare_and_project(workdir, capsys):
    ph = workdir / "ph.json"
    if not ph.exists():
        main(["identify", "--data", str(workdir / "data.csv"), "--shift", "1", "--out", str(ph)])
    out = workdir / "cmp.csv"
    assert main(["compare", "--data", str(workdir / "data.csv"), "--model", str(ph),
                 "--model", str(workdir / "ph_loewner.json"), "--out", str(out)]) == EXIT_OK
    dev = np.loadtxt(out, delimiter=",", skiprows=1, usecols=(2, 3))
    assert dev.max() < 1e-2
    assert "max relative deviation" in capsys.readouterr().out
    assert main(["project-stable", "--in", str(workdir / "ph_loewner.json"), "--band", "0.1:1000",
                 "--out", str(workdir / "proj.json")]) == EXIT_OK
    rep = json.loads((workdir / "proj_report.json").read_text())
    assert rep["mode"] == "nehari" and rep["achieved_error"] >= 0


def test_project_stable_scalar(tmp_path):
    src = io.write_realization(tmp_path / "anti.json", first_order(pole=1.0))
    assert main(["project-stable", "--in", str(src), "--out", str(tmp_path / "p.json")]) == EXIT_OK
    proj = io.read_realization(tmp_path / "p.json")
    assert eval_transfer(proj, 1j)[0, 0] == pytest.approx(-0.5, abs=1e-12)


def test_unshifted_identify_is_numerical_failure(tmp_path, capsys):
    truth = random_ph(np.random.default_rng(3), 5, 1, d_zero=True)
    src = io.write_realization(tmp_path / "truth.json", truth)
    data = tmp_path / "d.csv"
    assert main(["sample", "--fom", str(src), "--channels", "1", "--grid", "-2", "2", "60",
                 "--out", str(data)]) == EXIT_OK
    capsys.readouterr()
    assert main(["identify", "--data", str(data), "--shift", "none", "--out", str(tmp_path / "x.json")]) \
        == EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert err.startswith("phloewner: numerical failure [step ")
    assert main(["identify", "--data", str(data), "--shift", "1", "--out", str(tmp_path / "x.json")]) == EXIT_OK


def test_validation_errors(tmp_path, capsys):
    assert main(["sample", "--fom", str(tmp_path / "missing.json"), "--out", str(tmp_path / "d.csv")]) \
        == EXIT_VALIDATION
    assert "validation error" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "blue"}))
    assert main(["run", "--config", str(bad)]) == EXIT_VALIDATION
    assert main(["export", "--report", str(tmp_path)]) == EXIT_VALIDATION
    with pytest.raises(SystemExit) as exc:
        main(["sample", "--fom", "x", "--channels", "0"])
    assert exc.value.code == 2


def test_static_model_identify(tmp_path):
    # 1/(s-1) + 2 projects onto a constant: no dynamic part and no pencil dump
    sys_ = DescriptorRealization(A=[[1.0]], B=[[1.0]], C=[[1.0]], D=[[2.0]])
    src = io.write_realization(tmp_path / "s.json", sys_)
    data = tmp_path / "d.json"
    assert main(["sample", "--fom", str(src), "--channels", "1", "--grid", "-2", "2", "20",
                 "--policy", "cycled-identity", "--out", str(data)]) == EXIT_OK
    assert main(["identify", "--data", str(data), "--out", str(tmp_path / "ph.json")]) == EXIT_OK
    assert not (tmp_path / "ph_pencil.json").exists()
    ph = io.read_realization(tmp_path / "ph.json")
    assert eval_transfer(ph, 3j)[0, 0] == pytest.approx(1.5, abs=1e-8)


def test_run_and_export_with_config(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('h = 0.25\nn_points = 80\nomega_max_exp = 3.0\nchannels = [0]\n')
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    echo = json.loads((out / "config.json").read_text())
    assert echo["h"] == 0.25 and echo["n_points"] == 80
    ex = tmp_path / "ex"
    assert main(["export", "--report", str(out), "--which", "spectral-zeros", "--out-dir", str(ex)]) == EXIT_OK
    assert (ex / "spectral_zeros.csv").read_bytes() == (out / "spectral_zeros.csv").read_bytes()
    assert not (ex / "freq_response.csv").exists()


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"h": 0.5, "n_points": 40, "channels": [0, 1]}))
    out = tmp_path / "run"
    assert main(["--threads", "2", "run", "--config", str(cfg), "--channels", "2", "--grid", "-1", "2", "30",
                 "--out-dir", str(out)]) == EXIT_OK
    echo = json.loads((out / "config.json").read_text())
    assert echo["channels"] == [1] and echo["n_points"] == 30 and echo["h"] == 0.5 and echo["threads"] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "phloewner", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("generate-fom", "sample", "identify", "project-stable", "compare", "export", "run"):
        assert cmd in res.stdout
