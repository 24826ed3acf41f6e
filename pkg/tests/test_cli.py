import json

import jsonschema
import pytest

from helpers import write_text
from timatch.cli import main
from timatch.config import DEFAULT_SEED, ConfigError, RunConfig
from timatch.reports import schema_path, strip_timings

SCHEMA = {"x1": "covariate_continuous", "d1": "covariate_discrete", "T": "treatment", "Y": "outcome"}
TINY = "x1,d1,T,Y\n0.1,a,1,3.0\n0.1,a,0,1.0\n0.9,b,1,5.0\n0.9,b,0,2.0\n0.5,a,0,2.0\n"


@pytest.fixture
def tiny(tmp_path):
    csv_path = write_text(tmp_path / "tiny.csv", TINY)
    schema_file = write_text(tmp_path / "schema.json", json.dumps(SCHEMA))
    return csv_path, schema_file, tmp_path / "out"


def load_schema_doc(kind):
    return json.loads(schema_path(kind).read_text())


def test_match_happy_path(tiny):
    csv_path, schema_file, out = tiny
    rc = main(["match", "--input", str(csv_path), "--schema", str(schema_file), "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "match_report.json").read_text())
    assert doc["match"]["t_fraction"] == 1.0
    assert doc["seed"] == DEFAULT_SEED
    assert doc["config"]["input"] == str(csv_path)
    jsonschema.validate(doc, load_schema_doc("match"))


def test_estimate_exact_twins(tiny):
    csv_path, schema_file, out = tiny
    rc = main(["estimate", "--input", str(csv_path), "--schema", str(schema_file), "--out", str(out)])
    assert rc == 0
    doc = json.loads((out / "estimate_report.json").read_text())
    jsonschema.validate(doc, load_schema_doc("estimate"))
    # twins (3,1) and (5,2): stratum effects 2 and 3
    assert doc["summary"]["cate"] == pytest.approx(2.5)
    assert doc["summary"]["Tf"] == 1.0
    assert (out / "per_stratum.csv").read_text().startswith("stratum_id,cate")
    for key in ("schema_version", "tool", "config", "seed", "timings"):
        assert key in doc


def test_non_binary_treatment_exit_2(tiny, capsys):
    csv_path, schema_file, out = tiny
    write_text(csv_path, TINY.replace("0.9,b,1,5.0", "0.9,b,2,5.0"))
    rc = main(["match", "--input", str(csv_path), "--schema", str(schema_file), "--out", str(out)])
    assert rc == 2
    assert "row 3" in capsys.readouterr().err


def test_no_controls_exit_3(tmp_path):
    csv_path = write_text(tmp_path / "d.csv", "x1,d1,T,Y\n0.1,a,1,1\n0.2,b,1,2\n")
    schema_file = write_text(tmp_path / "s.json", json.dumps(SCHEMA))
    rc = main(["match", "--input", str(csv_path), "--schema", str(schema_file), "--out", str(tmp_path)])
    assert rc == 3


@pytest.mark.parametrize("command", ["match", "estimate"])
def test_empty_strata_exit_3(tiny, monkeypatch, capsys, command):
    # with at least one control the last relaxation step always forms a
    # stratum, so an empty result is forced through the matcher
    import numpy as np

    from timatch import pipeline
    from timatch.matcher import MatchResult

    def empty(view, treatment, order, reuse_controls=True):
        t = np.asarray(treatment)
        return MatchResult([], np.flatnonzero(t == 1), np.flatnonzero(t == 0), int(t.sum()), int((t == 0).sum()))

    monkeypatch.setattr(pipeline, "run_matching", empty)
    csv_path, schema_file, out = tiny
    rc = main([command, "--input", str(csv_path), "--schema", str(schema_file), "--out", str(out)])
    assert rc == 3
    assert "no matched strata" in capsys.readouterr().err


def test_unknown_config_key_exit_2(tiny):
    csv_path, schema_file, out = tiny
    cfg = write_text(out.parent / "cfg.json", json.dumps({"input": str(csv_path), "bogus": 1}))
    assert main(["match", "--config", str(cfg)]) == 2
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"bogus": 1})


def test_config_file_drives_run(tiny):
    csv_path, _, out = tiny
    cfg = write_text(
        out.parent / "cfg.json",
        json.dumps({"input": str(csv_path), "schema": SCHEMA, "output_dir": str(out), "seed": 11}),
    )
    assert main(["estimate", "--config", str(cfg)]) == 0
    doc = json.loads((out / "estimate_report.json").read_text())
    assert doc["seed"] == 11 and doc["config"]["schema"] == SCHEMA


def test_missing_input_exit_2(tmp_path):
    assert main(["match", "--input", str(tmp_path / "nope.csv"), "--schema", "x.json"]) == 2
    assert main(["match"]) == 2


def test_bad_subcommand_exit_2():
    assert main(["nonsense"]) == 2


def test_simulate_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["simulate", "--scenario", "1A", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "scenario_1A_seed7.csv").read_bytes()
    b = (tmp_path / "b" / "scenario_1A_seed7.csv").read_bytes()
    assert a == b and len(a) > 0


def test_simulate_unknown_scenario_exit_2(tmp_path):
    assert main(["simulate", "--scenario", "9Z", "--out", str(tmp_path)]) == 2
    assert main(["benchmark", "--scenario", "9Z", "--out", str(tmp_path)]) == 2


def test_scenario_csv_estimate_pre_l1(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--scenario", "1A", "--seed", "7", "--out", str(out)]) == 0
    rc = main([
        "estimate",
        "--input", str(out / "scenario_1A_seed7.csv"),
        "--schema", str(out / "scenario_1A_schema.json"),
        "--out", str(tmp_path / "est"),
    ])
    assert rc == 0
    doc = json.loads((tmp_path / "est" / "estimate_report.json").read_text())
    assert doc["imbalance"]["l1_pre"] > 0.99
    assert "cate" in doc["summary"]


def test_benchmark_summary_fields(tmp_path):
    rc = main(["benchmark", "--scenario", "3B", "--reps", "4", "--seed", "1", "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "benchmark_3B.json").read_text())
    jsonschema.validate(doc, load_schema_doc("benchmark"))
    for key in ("mean", "lower_95_ci", "upper_95_ci"):
        assert key in doc["summary"]["L1m"]
    lines = (tmp_path / "benchmark_3B.csv").read_text().splitlines()
    assert len(lines) == 5


def test_rerun_same_numeric_payload(tiny):
    csv_path, schema_file, out = tiny
    args = ["estimate", "--input", str(csv_path), "--schema", str(schema_file)]
    main(args + ["--out", str(out / "1")])
    main(args + ["--out", str(out / "2")])
    a = json.loads((out / "1" / "estimate_report.json").read_text())
    b = json.loads((out / "2" / "estimate_report.json").read_text())
    a["config"].pop("output_dir")
    b["config"].pop("output_dir")
    assert strip_timings(a) == strip_timings(b)


def test_imbalance_command(tiny, capsys):
    csv_path, schema_file, _ = tiny
    assert main(["imbalance", "--input", str(csv_path), "--schema", str(schema_file)]) == 0
    assert capsys.readouterr().out.startswith("L1=")
    # an arbitrary 0/1 column can define the groups
    text = "x1,d1,T,Y,G\n0.1,a,1,3,1\n0.1,a,0,1,1\n0.9,b,1,5,0\n0.9,b,0,2,0\n"
    write_text(csv_path, text)
    write_text(schema_file, json.dumps({**SCHEMA, "G": "ignore"}))
    capsys.readouterr()
    rc = main(["imbalance", "--input", str(csv_path), "--schema", str(schema_file), "--group-column", "G"])
    assert rc == 0
    assert capsys.readouterr().out.startswith("L1=1.000000")
    rc = main(["imbalance", "--input", str(csv_path), "--schema", str(schema_file), "--group-column", "d1"])
    assert rc == 2


def test_log_level_env(tiny, monkeypatch):
    csv_path, schema_file, out = tiny
    monkeypatch.setenv("TIM_LOG", "debug")
    assert main(["match", "--input", str(csv_path), "--schema", str(schema_file), "--out", str(out)]) == 0
