import json
import subprocess
import sys

import pytest

from polyaurn.cli import main, ndjson_line


def write_config(tmp_path, doc, name="scheme.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def py_config(tmp_path):
    return write_config(tmp_path, {"scheme": "pitman_yor", "alpha": "1/2", "theta": "1"})


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ndjson_line_fixed_precision():
    assert ndjson_line({"a": 0.1, "b": [1, True, None], "c": "x"}) == \
        '{"a":0.10000000000000001,"b":[1,true,null],"c":"x"}'
    assert ndjson_line(1 / 3) == "0.33333333333333331"


def test_validate(capsys, py_config, tmp_path):
    code, out, _ = run(capsys, "validate", "--scheme-config", py_config, "--max-i", "5")
    assert code == 0
    assert json.loads(out)["pass"] is True
    bad = write_config(tmp_path, {"scheme": "custom", "custom": {
        "psi": ["1", "4", "9"], "psi0": ["1", "1", "1"], "xi": ["2", "5", "10"]}}, "bad.json")
    code, out, _ = run(capsys, "validate", "--scheme-config", bad, "--max-i", "3")
    assert code == 1
    doc = json.loads(out)
    assert doc["pass"] is False and doc["witness"]["i"] == 3


def test_seq_prob_and_eppf(capsys, py_config):
    code, out, _ = run(capsys, "exact", "seq-prob", "--scheme-config", py_config,
                       "--labels", "0,1,0")
    assert code == 0
    assert json.loads(out) == {"rational": "1/8", "decimal": 0.125}
    code, out, _ = run(capsys, "exact", "eppf", "--scheme-config", py_config, "--sizes", "2,1")
    assert json.loads(out)["rational"] == "1/8"


def test_seq_prob_relabels_with_warning(capsys, py_config):
    code, out, err = run(capsys, "exact", "seq-prob", "--scheme-config", py_config,
                         "--labels", "5,2,5")
    assert code == 0
    assert "warning" in err
    assert json.loads(out)["rational"] == "1/8"


def test_decimal_and_fraction_inputs_identical(capsys, tmp_path):
    outs = []
    for alpha in ("0.5", "1/2"):
        cfg = write_config(tmp_path, {"scheme": "pitman_yor", "alpha": alpha, "theta": "1"},
                           f"c{len(outs)}.json")
        outs.append(run(capsys, "exact", "eppf", "--scheme-config", cfg, "--sizes", "3,2,1")[1])
    assert outs[0] == outs[1]
    a = run(capsys, "counterexample", "--alpha", "0.5")[1]
    b = run(capsys, "counterexample", "--alpha", "1/2")[1]
    assert a == b


def test_atomic(capsys, py_config):
    code, out, _ = run(capsys, "exact", "atomic", "--scheme-config", py_config,
                       "--values", "1,2,1", "--atoms", "2")
    assert code == 0
    assert json.loads(out)["rational"] == "3/32"
    code, _, err = run(capsys, "exact", "atomic", "--scheme-config", py_config,
                       "--values", "1,3", "--atoms", "2")
    assert code == 2 and "values" in err


def test_exch_check(capsys, py_config, tmp_path):
    code, out, _ = run(capsys, "exact", "exch-check", "--scheme-config", py_config,
                       "--max-i", "5", "--threads", "2")
    assert code == 0
    assert json.loads(out)["pass"] is True
    bad = write_config(tmp_path, {"scheme": "custom", "custom": {
        "psi": ["1", "4", "9", "16"], "psi0": ["1", "1", "1", "1"],
        "xi": ["2", "5", "10", "17"]}}, "bad.json")
    code, out, _ = run(capsys, "exact", "exch-check", "--scheme-config", bad, "--max-i", "4")
    assert code == 1
    assert json.loads(out)["witness"] is not None


def test_counterexample(capsys):
    code, out, _ = run(capsys, "counterexample", "--r", "2", "--theta", "1", "--alpha", "1/2")
    assert code == 0
    assert "3/32" in out and "5/64" in out
    doc = json.loads(out)
    assert doc["equal"] is False
    code, out, _ = run(capsys, "counterexample", "--r", "2", "--theta", "1", "--alpha", "0")
    doc = json.loads(out)
    assert doc["equal"] is True
    assert doc["p_1_2_1"]["rational"] == doc["p_1_1_2"]["rational"] == "1/16"


@pytest.mark.parametrize("argv, field", [
    (["counterexample", "--alpha", "1"], "alpha"),
    (["counterexample", "--alpha", "abc"], "alpha"),
    (["counterexample", "--theta", "-1"], "theta"),
    (["counterexample", "--r", "1"], "r"),
])
def test_argument_errors_exit_2(capsys, argv, field):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert field in err


def test_config_errors_exit_2(capsys, tmp_path):
    cfg = write_config(tmp_path, {"scheme": "pitman_yor", "alpha": "3/2", "theta": "1"})
    code, _, err = run(capsys, "validate", "--scheme-config", cfg)
    assert code == 2 and "alpha" in err
    code, _, err = run(capsys, "validate", "--scheme-config", str(tmp_path / "none.json"))
    assert code == 2
    code, _, err = run(capsys, "sample", "urn", "--scheme-config", cfg, "--seed", "-1")
    assert code == 2
    code, _, err = run(capsys, "exact", "seq-prob", "--scheme-config",
                       write_config(tmp_path, {"scheme": "iid"}, "iid.json"), "--labels", "0,x")
    assert code == 2 and "labels" in err
    code, _, _ = run(capsys, "nonsense")
    assert code == 2


def test_sample_urn_ndjson(capsys, py_config, tmp_path):
    out = tmp_path / "paths.ndjson"
    code, _, _ = run(capsys, "sample", "urn", "--scheme-config", py_config, "--n", "8",
                     "--replicates", "20", "--seed", "42", "--out", str(out))
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 20
    records = [json.loads(line) for line in lines]
    assert [r["replicate"] for r in records] == list(range(20))
    for r in records:
        assert len(r["labels"]) == len(r["values"]) == 8
        assert r["n_blocks"] == max(r["labels"]) + 1


def test_sample_byte_identical(capsys, py_config, tmp_path):
    files = []
    for k, threads in enumerate(("1", "1", "3")):
        out = tmp_path / f"p{k}.ndjson"
        assert run(capsys, "sample", "urn", "--scheme-config", py_config, "--n", "10",
                   "--replicates", "30", "--seed", "42", "--threads", threads,
                   "--out", str(out))[0] == 0
        files.append(out.read_bytes())
    assert files[0] == files[1] == files[2]


def test_sample_stick_fisher_csv(capsys, py_config, tmp_path):
    code, out, _ = run(capsys, "sample", "stick", "--scheme-config", py_config, "--n", "5",
                       "--replicates", "3", "--format", "csv")
    assert code == 0
    rows = out.splitlines()
    assert rows[0] == "replicate,position,label,value"
    assert len(rows) == 1 + 15
    fisher = write_config(tmp_path, {"scheme": "fisher", "N": 3, "theta": "1"}, "f.json")
    code, out, _ = run(capsys, "sample", "fisher", "--scheme-config", fisher, "--n", "20",
                       "--replicates", "50")
    assert code == 0
    assert all(json.loads(line)["n_blocks"] <= 3 for line in out.splitlines())
    code, _, err = run(capsys, "sample", "fisher", "--scheme-config", py_config)
    assert code == 2 and "scheme" in err


def test_sample_atomic_base(capsys, py_config):
    code, out, _ = run(capsys, "sample", "urn", "--scheme-config", py_config, "--n", "10",
                       "--replicates", "5", "--atoms", "2")
    assert code == 0
    for line in out.splitlines():
        assert set(json.loads(line)["values"]) <= {1, 2}


def test_diagnose_a_trace(capsys, tmp_path):
    dp = write_config(tmp_path, {"scheme": "blackwell_macqueen", "mu_total": "1"})
    code, out, _ = run(capsys, "diagnose", "a-trace", "--scheme-config", dp, "--i-max", "4")
    assert code == 0
    doc = json.loads(out)
    assert doc["metric"] == "new_value_probability" and doc["exact"] is True
    assert [x["rational"] for x in doc["value"]] == ["1/1", "1/2", "1/3", "1/4", "1/5"]
    code, out, _ = run(capsys, "diagnose", "a-trace", "--scheme-config", dp, "--i-max", "4",
                       "--mode", "empirical", "--replicates", "100")
    assert code == 0 and json.loads(out)["exact"] is False


def test_diagnose_fisher_dp(capsys):
    code, out, _ = run(capsys, "diagnose", "fisher-dp", "--N", "100", "--theta", "1", "--i", "2")
    assert code == 0
    assert json.loads(out)["value"]["rational"] == "1/200"
    code, _, _ = run(capsys, "diagnose", "fisher-dp", "--N", "2", "--i", "9")
    assert code == 2


def test_diagnose_compare(capsys, py_config, tmp_path):
    code, out, _ = run(capsys, "diagnose", "compare", "--scheme-config", py_config, "--i", "4",
                       "--replicates", "20000", "--seed", "1")
    doc = json.loads(out)
    assert code == 0 and doc["pass"] is True
    assert doc["report"]["chi_square"]["p_value"] > 0.001
    code, out, _ = run(capsys, "diagnose", "compare", "--scheme-config", py_config, "--i", "4",
                       "--replicates", "50", "--tv-threshold", "0.0001")
    assert code == 1 and json.loads(out)["pass"] is False
    code, _, err = run(capsys, "diagnose", "compare")
    assert code == 2 and "scheme-config" in err


def test_diagnose_converge(capsys, tmp_path):
    dp = write_config(tmp_path, {"scheme": "blackwell_macqueen", "mu_total": "1"})
    code, out, _ = run(capsys, "diagnose", "converge", "--scheme-config", dp, "--n", "400",
                       "--checkpoints", "100,200,400")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["value"]) == 2
    assert doc["new_mass"] == [1 / 101, 1 / 201, 1 / 401]
    code, _, err = run(capsys, "diagnose", "converge", "--scheme-config", dp, "--n", "50",
                       "--checkpoints", "10,100")
    assert code == 2 and "checkpoints" in err


def test_diagnose_independence(capsys, py_config):
    code, out, _ = run(capsys, "diagnose", "independence", "--scheme-config", py_config,
                       "--n", "20", "--replicates", "500")
    assert code == 0
    doc = json.loads(out)
    assert doc["heuristic"] is True and "pass" in doc


def test_json_round_trip(capsys, py_config, tmp_path):
    out = tmp_path / "r.json"
    run(capsys, "exact", "exch-check", "--scheme-config", py_config, "--max-i", "4",
        "--out", str(out))
    doc = json.loads(out.read_text())
    assert json.loads(json.dumps(doc)) == doc
    assert {"pass", "max_i", "witness"} <= set(doc)


def test_module_entry_point(py_config):
    proc = subprocess.run([sys.executable, "-m", "polyaurn", "exact", "seq-prob",
                           "--scheme-config", py_config, "--labels", "0,1,0"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["rational"] == "1/8"
