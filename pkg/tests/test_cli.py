"""Command-line front end: exit codes, report files, reproducibility."""

import json
import shutil

import pytest

from bergtents.cli import main, parse_domain, parse_weight_spec
from bergtents.errors import ConfigError


def _run(tmp_path, name, *extra):
    out = tmp_path / name
    argv = ["characteristic", "--domain", "ball:n=1", "--interior", "400",
            "--boundary", "300", "--kmax", "3", "--out", str(out)]
    argv[0:1] = [extra[0]] if extra else argv[0:1]
    return argv, out


def test_parse_domain():
    assert parse_domain("ball:n=2") == ("ball", 2)
    assert parse_domain("egg:m=3") == ("egg", 3)
    with pytest.raises(ConfigError):
        parse_domain("cube:n=1")
    with pytest.raises(ConfigError):
        parse_domain("ball:n=zero")


def test_parse_weight_spec():
    assert parse_weight_spec("one:") == ("one", {})
    assert parse_weight_spec("power:alpha=-0.5") == ("power", {"alpha": -0.5})
    assert parse_weight_spec("sharp:s=0.3") == ("sharp", {"s": 0.3})
    with pytest.raises(ConfigError):
        parse_weight_spec("gauss:tau=1")
    with pytest.raises(ConfigError):
        parse_weight_spec("power:alpha=x")


def test_exit_codes(tmp_path):
    good = ["characteristic", "--domain", "ball:n=1", "--interior", "400",
            "--boundary", "300", "--kmax", "3",
            "--out", str(tmp_path / "ok")]
    assert main(good) == 0
    assert main(["characteristic", "--p", "1.0"]) == 1
    assert main(["characteristic", "--domain", "cube:n=1"]) == 1
    assert main(["not-a-command"]) == 1
    assert main(["characteristic", "--interior", "-5"]) == 1


def test_unit_weight_bracket_via_cli(tmp_path):
    out = tmp_path / "unit"
    assert main(["characteristic", "--domain", "ball:n=1",
                 "--interior", "500", "--boundary", "300", "--kmax", "3",
                 "--weight", "one:", "--p", "2.0", "--out", str(out)]) == 0
    record = json.loads((out / "characteristic.json").read_text())
    assert record["report"]["bracket"] == pytest.approx(5.0, abs=1e-9)
    assert record["version"].startswith("bergtents-")
    assert record["config"]["p"] == 2.0
    csv_lines = (out / "characteristic.csv").read_text().splitlines()
    assert csv_lines[0] == "p,weight,bracket,global_term,tent_sup,bp"
    assert len(csv_lines) == 2


def test_rerun_byte_identical(tmp_path):
    out = tmp_path / "rep"
    argv = ["dyadic", "--domain", "ball:n=1", "--interior", "400",
            "--boundary", "300", "--kmax", "3", "--systems", "2",
            "--seed", "7", "--out", str(out)]
    assert main(argv) == 0
    first = (out / "dyadic.json").read_bytes()
    shutil.copy(out / "dyadic.json", tmp_path / "first.json")
    assert main(argv) == 0
    assert (out / "dyadic.json").read_bytes() == first


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "domain": "ball:n=1", "interior": 500, "boundary": 300,
        "kmax": 3, "p": 2.0, "out": str(tmp_path / "cfgout")}))
    assert main(["characteristic", "--config", str(cfg),
                 "--p", "1.5"]) == 0
    record = json.loads((tmp_path / "cfgout" / "characteristic.json")
                        .read_text())
    assert record["config"]["p"] == 1.5
    assert record["config"]["interior"] == 500

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"intorior": 10}))
    assert main(["characteristic", "--config", str(bad)]) == 1


def test_norm_command_small(tmp_path):
    out = tmp_path / "norm"
    assert main(["norm", "--domain", "ball:n=1", "--interior", "500",
                 "--boundary", "300", "--kmax", "3", "--p", "2.0",
                 "--weight", "one:", "--out", str(out)]) == 0
    record = json.loads((out / "norm.json").read_text())
    rep = record["report"]
    assert rep["lower_bound"] <= rep["bracket"]
    assert 0.9 < rep["lower_bound"] < 1.1


def test_dyadic_report_invariants(tmp_path):
    out = tmp_path / "dy"
    assert main(["dyadic", "--domain", "ball:n=1", "--interior", "400",
                 "--boundary", "300", "--kmax", "3", "--systems", "2",
                 "--out", str(out)]) == 0
    record = json.loads((out / "dyadic.json").read_text())
    rep = record["report"]
    assert len(rep["systems"]) == len(rep["checks"]) == 2
    for check in rep["checks"]:
        assert check["partition"] and check["nesting"]
        assert check["sandwich_lower"] > 0
    adj = rep["adjacency"]
    assert adj["success_rate_full"] >= adj["success_rate_single"]
