import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from mergelab import cli
from mergelab.channels import dump_channel, random_io, unitary_channel
from mergelab.coding import BudgetExceeded, build_code
from mergelab.info import doubly_symmetric_binary, write_joint_csv
from mergelab.protocols import InvariantViolation
from mergelab.qstate import dump_state
from mergelab.statezoo import flower, qft, random_pure


def _schema(name):
    text = resources.files("mergelab").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _run(capsys, *argv):
    code = cli.main(list(argv))
    return code, capsys.readouterr().out


def _json(capsys, schema, *argv):
    code, out = _run(capsys, *argv)
    assert code == cli.EXIT_OK, out
    doc = json.loads(out)
    jsonschema.validate(doc, _schema(schema))
    return doc


@pytest.fixture
def files(tmp_path):
    paths = {}
    paths["flower"] = tmp_path / "flower.json"
    dump_state(flower(2), paths["flower"])
    paths["psi"] = tmp_path / "psi.json"
    dump_state(random_pure((2, 2, 2), seed=1), paths["psi"])
    paths["joint"] = tmp_path / "p.csv"
    write_joint_csv(doubly_symmetric_binary(0.11), paths["joint"])
    paths["qft"] = tmp_path / "qft.json"
    dump_channel(unitary_channel(qft(3)), paths["qft"])
    paths["io"] = tmp_path / "io.json"
    dump_channel(random_io(2, np.random.default_rng(0)), paths["io"])
    paths["code"] = tmp_path / "code.json"
    build_code(doubly_symmetric_binary(0.11), 4, 0.25, seed=1).dump(paths["code"])
    return paths


def test_rates_on_flower(capsys, files):
    doc = _json(capsys, "rates", "rates", "--state", str(files["flower"]))
    assert doc["sum_lower"] == pytest.approx(1, abs=1e-9)
    assert doc["e_min"] == pytest.approx(0, abs=1e-9)
    assert doc["e0"] == pytest.approx(1, abs=1e-9)


def test_region_csv(capsys, files):
    code, out = _run(capsys, "region", "--state", str(files["psi"]), "--grid", "E:-1:3:0.05", "C:-1:3:0.05")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "E,C,classification"
    assert len(lines) == 1 + 81 * 81
    assert {line.rsplit(",", 1)[1] for line in lines[1:]} <= {"excluded", "achievable", "unknown"}


def test_merge_and_swcode(capsys, files):
    doc = _json(capsys, "merge", "merge", "--joint", str(files["joint"]), "--n", "4", "--seed", "1",
                "--code", str(files["code"]))
    assert doc["target_distance"] <= doc["fidelity_bound"] + 1e-9
    doc = _json(capsys, "merge", "merge", "--state", str(files["psi"]), "--n", "2", "--engine", "branch")
    assert doc["engine"] == "branch"
    doc = _json(capsys, "swcode", "swcode", "--joint", str(files["joint"]), "--n", "6", "--trials", "3")
    assert 0 < doc["error_prob"] < 1
    assert doc["N"] == 23


def test_flower_and_separable(capsys):
    doc = _json(capsys, "flower", "flower", "--d", "4")
    assert doc["analytic_coherence_rate"] == 2
    assert doc["ledger"]["ebits_consumed"] == 0
    assert "caveat" in doc["rates"]
    doc = _json(capsys, "separable", "separable", "--random", "2", "2", "3", "--seed", "4")
    assert doc["ledger"]["cobits_consumed"] == pytest.approx(doc["c_max"], abs=1e-12)


def test_miocheck(capsys, files):
    doc = _json(capsys, "miocheck", "miocheck", "--channel", str(files["qft"]))
    assert doc["mio"] is False
    doc = _json(capsys, "miocheck", "miocheck", "--channel", str(files["io"]))
    assert doc["io"] is True and doc["mio"] is True


def test_uncertainty_respects_floor(capsys):
    doc = _json(capsys, "uncertainty", "uncertainty", "--d", "4", "--restarts", "2000", "--seed", "7")
    assert doc["min_output_entropy"] >= 2 - 1e-6
    assert doc["floor"] == 2 and doc["satisfied"] is True


def test_statezoo_round_trips(capsys, tmp_path):
    doc = _json(capsys, "state", "statezoo", "--name", "flower", "--d", "3")
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    out = _json(capsys, "rates", "rates", "--state", str(path))
    assert out["e0"] == pytest.approx(1, abs=1e-9)


def test_outputs_are_byte_identical(tmp_path):
    for argv in (["swcode", "--joint"], ["separable", "--random", "2", "2", "2"], ["uncertainty", "--d", "2"]):
        outputs = []
        for k in range(2):
            out = tmp_path / f"out{k}.json"
            extra = []
            if argv[0] == "swcode":
                p = tmp_path / "p.csv"
                write_joint_csv(doubly_symmetric_binary(0.11), p)
                extra = [str(p), "--n", "5", "--seed", "3"]
            assert cli.main(argv + extra + ["--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


def _error(capsys, *argv):
    code, out = _run(capsys, *argv)
    doc = json.loads(out)
    jsonschema.validate(doc, _schema("error"))
    assert doc["error"]["code"] == code
    return code, doc["error"]


def test_error_codes(capsys, tmp_path, files):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _error(capsys, "rates", "--state", str(bad))[0] == cli.EXIT_PARSE
    assert _error(capsys, "rates", "--state", str(tmp_path / "missing.json"))[0] == cli.EXIT_PARSE
    assert _error(capsys, "flower", "--d", "1")[0] == cli.EXIT_VALIDATION
    assert _error(capsys, "swcode", "--joint", str(files["joint"]), "--n", "0")[0] == cli.EXIT_VALIDATION
    assert _error(capsys, "region", "--state", str(files["psi"]), "--grid", "E:3:1:0.1", "C:0:1:0.1")[0] == \
        cli.EXIT_VALIDATION
    assert _error(capsys, "--budget", "100", "swcode", "--joint", str(files["joint"]), "--n", "8")[0] == \
        cli.EXIT_BUDGET
    assert _error(capsys, "nonsense")[0] == cli.EXIT_VALIDATION


def test_error_classification():
    assert cli.classify_error(BudgetExceeded("x", 10, 1)) == ("budget", cli.EXIT_BUDGET)
    assert cli.classify_error(InvariantViolation("x")) == ("invariant", cli.EXIT_INVARIANT)
    assert cli.classify_error(ValueError("x")) == ("validation", cli.EXIT_VALIDATION)
    assert cli.classify_error(RuntimeError("x")) == ("internal", cli.EXIT_INTERNAL)
    assert len({cli.EXIT_OK, cli.EXIT_INTERNAL, cli.EXIT_VALIDATION, cli.EXIT_PARSE, cli.EXIT_BUDGET,
                cli.EXIT_INVARIANT}) == 6
