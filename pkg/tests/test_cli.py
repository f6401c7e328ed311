import json

import pytest

from visens import cli


@pytest.fixture
def box_config(tmp_path):
    path = tmp_path / "box.json"
    path.write_text(cli.bundled_config("box_projection.json"))
    return path


def _read(out):
    return json.loads((out / "report.json").read_text())


def test_bundled_box_config_passes(box_config, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["verify", "--config", str(box_config), "--out", str(out)]) == 0
    report = _read(out)
    assert report["schema_version"] == "1.0"
    assert all("fitted_rate" in ray for ray in report["rays"])
    header = (out / "corner_face.csv").read_text().splitlines()[0]
    assert header == "t,error,soq,lipschitz_ratio,quadform_gap"
    assert "started_unix" in json.loads((out / "metadata.json").read_text())
    assert "started_unix" not in json.dumps(report)


def test_negated_expected_derivative_fails(box_config, tmp_path):
    cfg = json.loads(box_config.read_text())
    for ray in cfg["rays"]:
        ray["expected_derivative"] = [-v for v in ray["expected_derivative"]]
    box_config.write_text(json.dumps(cfg))
    assert cli.main(["verify", "--config", str(box_config)]) == 1


def test_malformed_json_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["verify", "--config", str(bad)]) == 2
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "config_error"


def test_unknown_field_is_rejected(box_config, tmp_path):
    cfg = json.loads(box_config.read_text())
    cfg["surprise"] = 1
    box_config.write_text(json.dumps(cfg))
    assert cli.main(["verify", "--config", str(box_config)]) == 2


def test_report_is_byte_identical(box_config, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["verify", "--config", str(box_config), "--out", str(a), "--jobs", "2"]) == 0
    assert cli.main(["verify", "--config", str(box_config), "--out", str(b)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_catalog_listing():
    everything = cli.list_catalog()
    assert cli.list_catalog("") == everything
    ids = [e["id"] for e in cli.list_catalog("bangbang_template")]
    assert ids == ["bb-cubic-single", "bb-linear-double", "bb-linear-single"]
    assert cli.list_catalog("zzz") == []
    assert cli.list_catalog() == everything


@pytest.mark.parametrize("name", ["plasticity_random.json", "proxreg_ball_complement.json",
                                  "bb-linear-single.json"])
def test_other_bundled_configs_pass(name, tmp_path):
    path = tmp_path / name
    path.write_text(cli.bundled_config(name))
    assert cli.main(["verify", "--config", str(path), "--out", str(tmp_path / "o")]) == 0


def test_output_block_names_files(box_config, tmp_path):
    cfg = json.loads(box_config.read_text())
    cfg["output"] = {"report": "box_report.json", "csv_prefix": "box_"}
    box_config.write_text(json.dumps(cfg))
    out = tmp_path / "named"
    assert cli.main(["verify", "--config", str(box_config), "--out", str(out)]) == 0
    assert (out / "box_report.json").exists() and (out / "box_corner_face.csv").exists()


def test_bad_subcommand_exit_code():
    assert cli.main(["frobnicate"]) == 2
