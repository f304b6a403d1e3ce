"""End-to-end command-line workflow on the fixture panel."""

import json
import os

import numpy as np
import pytest

from magmar.cli import main

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
RATINGS = os.path.join(FIXTURES, "ratings.csv")
CLIMATE = os.path.join(FIXTURES, "climate.csv")


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["aggregate", "--ratings", RATINGS, "--climate", CLIMATE,
                 "--out", str(d / "activity.csv")]) == 0
    assert main(["transform", "--activity", str(d / "activity.csv"),
                 "--seed", "11", "--out", str(d / "u.csv")]) == 0
    assert main(["simulate", "--model", "mag1", "--copula", "gaussian",
                 "--rho", "0.5", "--n", "400", "--seed", "3",
                 "--out", str(d / "sim.csv")]) == 0
    assert main(["fit", "--u-file", str(d / "sim.csv"), "--model", "mag1",
                 "--copula", "gaussian", "--out", str(d / "fit_mag1")]) == 0
    assert main(["fit", "--u-file", str(d / "sim.csv"), "--model", "magmar11",
                 "--copula", "gaussian",
                 "--out", str(d / "fit_magmar")]) == 0
    return d


def test_ingest_and_exit_codes(tmp_path):
    out = tmp_path / "records.csv"
    assert main(["ingest", "--ratings", RATINGS, "--out", str(out)]) == 0
    assert out.exists() and (str(out) + ".report.txt",)
    assert main(["ingest", "--ratings", "/nonexistent.csv",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_outputs_have_header_block(workdir):
    text = _read(workdir / "activity.csv")
    lines = text.splitlines()
    assert lines[0].startswith("# magmar ")
    assert lines[1].startswith("# config_hash ")


def test_figures_rendered_next_to_outputs(workdir):
    for name in ("activity.csv.png", "u.csv.png", "sim.csv.png"):
        assert (workdir / name).exists()


def test_resolved_config_sidecar(workdir):
    cfg = json.loads(_read(workdir / "activity.csv.config.json"))
    assert cfg["command"] == "aggregate"
    assert cfg["min_coverage"] == 0.3


def test_transform_rerun_is_byte_identical(workdir, tmp_path):
    out2 = tmp_path / "u2.csv"
    assert main(["transform", "--activity", str(workdir / "activity.csv"),
                 "--seed", "11", "--out", str(out2)]) == 0
    a = _read(workdir / "u.csv").split("\n", 2)[2]
    b = _read(out2).split("\n", 2)[2]
    assert a == b


def test_fit_report_contents(workdir):
    doc = json.loads(_read(workdir / "fit_mag1.json"))
    assert "meta" in doc and "config_hash" in doc["meta"]
    f = doc["fit"]
    assert f["model_kind"] == "mag1"
    assert f["estimates"]["mag_rho"] == pytest.approx(0.5, abs=0.1)
    assert f["converged"]


def test_fit_validation_error(tmp_path, workdir):
    # gumbel slot without --alpha on a file that exists
    code = main(["fit", "--u-file", str(workdir / "sim.csv"),
                 "--model", "mag1", "--copula", "gumbel", "--alpha", "0.5",
                 "--out", str(tmp_path / "bad")])
    assert code == 2


def test_compare_with_lr_rows(workdir, tmp_path):
    out = tmp_path / "cmp"
    assert main(["compare", "--fits", str(workdir / "fit_magmar.json"),
                 str(workdir / "fit_mag1.json"),
                 "--out", str(out)]) == 0
    txt = _read(str(out) + ".txt")
    assert "LR fit_magmar vs fit_mag1" in txt
    csv_text = _read(str(out) + ".csv")
    assert "fit_mag1" in csv_text
    assert (str(out) + ".png",)


def test_forecast_and_risk(workdir, tmp_path):
    fc = tmp_path / "fc"
    assert main(["forecast", "--u-file", str(workdir / "sim.csv"),
                 "--model", "mag1", "--copula", "gaussian",
                 "--min-window", "390", "--out", str(fc)]) == 0
    lines = [ln for ln in _read(str(fc) + ".csv").splitlines()
             if not ln.startswith("#")]
    assert lines[0] == "origin,score,flag"
    assert lines[-1].startswith("average,")

    risk = tmp_path / "risk"
    assert main(["risk", "--fit", str(workdir / "fit_mag1.json"),
                 "--paths", "20000", "--seed", "5",
                 "--out", str(risk)]) == 0
    doc = json.loads(_read(str(risk) + ".json"))
    assert 0.0 < doc["risk"]["var"] < 1.0
    assert doc["risk"]["es"] <= doc["risk"]["var"]

    # reruns with the same seed are byte-identical
    risk2 = tmp_path / "risk2"
    assert main(["risk", "--fit", str(workdir / "fit_mag1.json"),
                 "--paths", "20000", "--seed", "5",
                 "--out", str(risk2)]) == 0
    assert _read(str(risk) + ".txt") == _read(str(risk2) + ".txt")


def test_glm_fit_via_cli(workdir, tmp_path):
    out = tmp_path / "glm"
    assert main(["fit", "--u-file", str(workdir / "activity.csv"),
                 "--model", "glm", "--glm-regressors", "intercept,lag_log",
                 "--out", str(out)]) == 0
    doc = json.loads(_read(str(out) + ".json"))
    assert doc["fit"]["model_kind"] == "poisson_glm"
    assert "intercept" in doc["fit"]["estimates"]


def test_config_file_merging(workdir, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 11}))
    out = tmp_path / "u_cfg.csv"
    assert main(["--config", str(cfg), "transform",
                 "--activity", str(workdir / "activity.csv"),
                 "--out", str(out)]) == 0
    a = _read(workdir / "u.csv").split("\n", 2)[2]
    b = _read(out).split("\n", 2)[2]
    assert a == b
