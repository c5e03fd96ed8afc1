import json
from pathlib import Path

import numpy as np
import pytest

from _helpers import random_ph
from phloewner import io
from phloewner.errors import NumericalError, ValidationError
from phloewner.pipeline import (FIGURES, MIMO_TOL, SISO_TOL, ComparisonReport, RunConfig, channel_errors,
                                export_figures, load_config_file, load_fom, near_axis_counts, parse_tensor,
                                read_report, run_pipeline, write_fom, generate_fom)

SMALL = dict(h=0.25, n_points=120, omega_max_exp=3.0)


@pytest.fixture(scope="module")
def siso_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("siso")
    cfg = RunConfig(out_dir=str(out), **SMALL)
    return cfg, run_pipeline(cfg)


def test_siso_report(siso_run):
    cfg, rep = siso_run
    assert rep.tolerance == SISO_TOL
    assert np.array_equal(rep.omega, cfg.omega_grid)
    assert rep.data.shape == (cfg.n_points, 1, 1)
    assert rep.errors[(0, 0)]["max"] < SISO_TOL
    assert not any(rep.degraded().values())
    assert rep.n_fom == 257 and 0 < rep.order < rep.n_fom
    assert set(rep.zeros) == {"loewner", "loewner-shifted", "ph-loewner"}


def test_run_writes_artifacts(siso_run):
    cfg, _ = siso_run
    out = cfg.out_dir
    for name in ("config.json", "data.csv", "loewner.json", "ph.json", "diagnostics.json", "report.json",
                 "summary.json", "freq_response.csv", "phase_response.csv", "errors.csv",
                 "spectral_zeros.csv", "spectral_zero_bands.csv", "spectral_zeros_zoom.csv",
                 "fom_manifest.json", "fom_G.mtx"):
        assert (Path(out) / name).exists(), name
    head = open(f"{out}/freq_response.csv").readline().strip().split(",")
    assert head == ["omega", "mag_data_0_0", "mag_loewner_0_0", "mag_ph_loewner_0_0"]
    assert open(f"{out}/errors.csv").readline().startswith("# relative deviation")


def test_reproducible_and_config_echo(siso_run, tmp_path):
    cfg, _ = siso_run
    echoed = load_config_file(f"{cfg.out_dir}/config.json")
    echoed["out_dir"] = str(tmp_path)
    run_pipeline(RunConfig.from_dict(echoed))
    for name in ("freq_response.csv", "phase_response.csv", "errors.csv", "spectral_zeros.csv",
                 "spectral_zero_bands.csv", "spectral_zeros_zoom.csv", "data.csv"):
        assert (tmp_path / name).read_bytes() == open(f"{cfg.out_dir}/{name}", "rb").read()


def test_report_round_trip_and_exports(siso_run, tmp_path):
    cfg, rep = siso_run
    back = read_report(cfg.out_dir)
    assert np.array_equal(back.ph, rep.ph) and back.order == rep.order
    paths = export_figures(back, "zoom", tmp_path)
    rows = (tmp_path / "spectral_zeros_zoom.csv").read_text().splitlines()[1:]
    assert all(abs(float(r.split(",")[0])) <= 1e-6 for r in rows)
    assert len(paths) == 1
    with pytest.raises(ValidationError):
        export_figures(back, "histogram", tmp_path)


def test_near_axis_counts():
    z = {"a": np.array([1e-11 + 1j, 5e-10, 1.0, -2e-9])}
    assert near_axis_counts(z) == {"a": {"1e-09": 2, "1e-10": 1}}


def test_channel_errors_definition():
    data = np.array([[[2.0]], [[1.0]]])
    model = np.array([[[2.2]], [[1.0]]])
    e = channel_errors(data, model, [3])
    assert e[(3, 3)]["max"] == pytest.approx(0.1) and e[(3, 3)]["mean"] == pytest.approx(0.05)


def test_mimo_report_flags_channels(tmp_path):
    cfg = RunConfig(out_dir=str(tmp_path), channels=[0, 1, 10], **SMALL)
    rep = run_pipeline(cfg)
    assert rep.tolerance == MIMO_TOL
    assert len(rep.errors) == 9
    flags = rep.degraded()
    assert all(flags[k] == (rep.errors[k]["max"] > MIMO_TOL) for k in flags)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert {(e["output"], e["input"]) for e in summary["errors"]} == set(rep.errors)


def test_stabilize_off_matches_nehari_for_stable_model(tmp_path):
    truth = random_ph(np.random.default_rng(0), 6, 1)
    src = io.write_realization(tmp_path / "truth.json", truth)
    outs = []
    for mode in ("nehari", "off"):
        out = tmp_path / mode
        run_pipeline(RunConfig(fom=str(src), stabilize=mode, n_points=60, omega_min_exp=-2,
                               omega_max_exp=2, out_dir=str(out)))
        outs.append(out)
    assert json.loads((outs[0] / "diagnostics.json").read_text())["projection"]["n_unstable"] == 0
    for name in ("freq_response.csv", "spectral_zeros.csv", "errors.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_stage_annotation(tmp_path):
    truth = random_ph(np.random.default_rng(1), 4, 1, d_zero=True)
    src = io.write_realization(tmp_path / "truth.json", truth)
    with pytest.raises(NumericalError) as exc:
        run_pipeline(RunConfig(fom=str(src), shift=0.0, n_points=40, omega_min_exp=-2, omega_max_exp=2,
                               out_dir=str(tmp_path / "o")))
    assert exc.value.stage.startswith("identify: step")
    with pytest.raises(ValidationError) as exc:
        run_pipeline(RunConfig(channels=[999], out_dir=str(tmp_path / "p"), **SMALL))
    assert exc.value.stage == "sample"


def test_config_validation(tmp_path):
    with pytest.raises(ValidationError):
        RunConfig(stabilize="maybe")
    with pytest.raises(ValidationError):
        RunConfig(order="many")
    with pytest.raises(ValidationError):
        RunConfig.from_dict({"colour": "blue"})
    p = tmp_path / "c.toml"
    p.write_text('h = 0.5\nchannels = [0, 2]\n')
    assert load_config_file(p) == {"h": 0.5, "channels": [0, 2]}
    p.write_text("h = ")
    with pytest.raises(ValidationError):
        load_config_file(p)


def test_fom_manifest_round_trip(tmp_path):
    fem = generate_fom(0.5, eps=0.1, tensor="iso:2")
    path = write_fom(fem, tmp_path / "w_")
    man = json.loads(path.read_text())
    assert man["dimensions"] == {"N_q": 48, "N_p": 21, "N_bnd": 16, "n": 69}
    assert man["parameters"]["T_tensor"] == [[2.0, 0.0], [0.0, 2.0]]
    back = load_fom(path)
    assert abs(back.G_mat - fem.G_mat).max() == 0.0 and back.n == fem.n


def test_parse_tensor(tmp_path):
    assert np.array_equal(parse_tensor("iso:3"), 3 * np.eye(2))
    p = tmp_path / "t.json"
    p.write_text("[[2, 0.5], [0.5, 1]]")
    assert parse_tensor(str(p))[0, 1] == 0.5
    with pytest.raises(ValidationError):
        parse_tensor("iso:x")


def test_figures_constant():
    assert FIGURES == ("freq-response", "spectral-zeros", "zoom")
    assert ComparisonReport.__doc__
