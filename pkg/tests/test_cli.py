from __future__ import annotations

import json
import math
import os

import numpy as np
import pytest

from betatherm.cli import main
from betatherm.storage import ResultStore, jsonable

CONFIGS = os.path.join(os.path.dirname(__file__), "..", "configs")


def _config(name: str) -> str:
    return os.path.join(CONFIGS, name)


def run_json(capsys, *argv: str) -> tuple[int, dict]:
    code = main([*argv, "--json"])
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else {}


def test_expand_quasi_greedy(capsys):
    code, payload = run_json(capsys, "expand", "--digits", "(10)", "--n", "6")
    assert code == 0
    assert payload["digits"] == "101010"
    assert payload["x_beta"] == "(10)"

    code, payload = run_json(capsys, "expand", "--beta", "2", "--n", "4")
    assert code == 0
    assert payload["digits"] == "1111"


def test_admissible_reports_without_failing(capsys):
    assert main(["admissible", "--digits", "(10)", "--word", "11"]) == 0
    assert "NOT admissible" in capsys.readouterr().out
    assert main(["admissible", "--digits", "(10)", "--sequence", "1(0)"]) == 0
    assert ": admissible" in capsys.readouterr().out


def test_admissible_needs_a_subject(capsys):
    assert main(["admissible", "--digits", "(10)"]) == 1
    assert main(["admissible", "--digits", "(10)", "--sequence", "1(0)", "--transpose"]) == 1


def test_language_count_matches_presentation(capsys):
    code, payload = run_json(capsys, "language", "--digits", "(10)", "--n", "10", "--count-only")
    assert code == 0
    assert payload["count"] == 144
    assert payload["presentation_count"] == 144
    assert "words" not in payload


def test_spectrum_writes_artifacts(capsys, tmp_path):
    out = tmp_path / "nested" / "spectrum"
    code, payload = run_json(capsys, "spectrum", "--config", _config("bernoulli.json"), "--t", "2", "--out", str(out))
    assert code == 0
    assert payload["lambda"] == pytest.approx(1 + math.exp(-2), rel=1e-12)
    assert (out / "spectrum.csv").read_text().startswith("word,psi,rho,gibbs\n")
    saved = json.loads((out / "spectrum.json").read_text())
    assert saved["lambda"] == payload["lambda"]


def test_cli_flags_override_job_file(capsys):
    code, payload = run_json(capsys, "spectrum", "--config", _config("bernoulli.json"), "--depth", "3")
    assert code == 0
    assert payload["depth"] == 3
    assert payload["cylinders"] == 8


def test_zerotemp_is_deterministic(capsys, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    code, payload = run_json(capsys, "zerotemp", "--config", _config("bernoulli.json"), "--out", str(first))
    assert code == 0
    assert payload["m"] == pytest.approx(0.0, abs=1e-8)
    assert payload["unique_maximizer"] is True
    assert main(["zerotemp", "--config", _config("bernoulli.json"), "--csv", str(second)]) == 0
    capsys.readouterr()
    names = sorted(os.listdir(first))
    assert names == ["subactions.csv", "subactions_transpose.csv", "zerotemp.csv", "zerotemp.json"]
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_out_path_blocked_by_file(capsys, tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("", encoding="utf-8")
    assert main(["spectrum", "--config", _config("bernoulli.json"), "--out", str(blocker)]) == 5


def test_bad_config_exits_one(capsys, tmp_path):
    assert main(["spectrum", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"beta": {"digits": "(10)"}, "potential": {"table": {"00": 0, "01": 0, "10": 0, "11": 0}}}', encoding="utf-8")
    assert main(["spectrum", "--config", str(bad)]) == 1
    assert main(["spectrum", "--digits", "(10)"]) == 1


def test_not_quasi_greedy_exits_two(capsys):
    assert main(["expand", "--digits", "(01)"]) == 2


def test_oracle(capsys):
    code, payload = run_json(capsys, "oracle", "--config", _config("golden_depth2.json"))
    assert code == 0
    assert payload["m"] == pytest.approx(0.0, abs=1e-12)
    assert payload["argmax_cycles"] == ["01"]
    assert payload["unique"] is True
    assert payload["n_cycles"] == payload["cycles_by_presentation"]

    code, payload = run_json(capsys, "oracle", "--config", _config("golden_depth2.json"), "--max-period", "4")
    assert payload["p_max"] == 4
    assert payload["n_cycles"] == 4


def test_involution(capsys):
    code, payload = run_json(capsys, "involution", "--config", _config("golden_depth2.json"), "--pairs", "random:20")
    assert code == 0
    assert payload["pairs"] == 20
    assert payload["duality_max_residual"] <= 1e-12
    assert payload["lambda"] == pytest.approx(payload["lambda_transpose"], rel=1e-10)
    assert payload["marginal_defects"]["past"] <= 1e-9
    assert payload["transpose_table"] == pytest.approx({"00": -1.0, "01": -1.0, "10": 1.0}, abs=1e-12)


def test_ldp(capsys):
    code, payload = run_json(capsys, "ldp", "--config", _config("golden_ldp.json"))
    assert code == 0
    by_word = {r["cylinder"]: r for r in payload["cylinders"]}
    assert by_word["1"]["sup_I"] == pytest.approx(-1.0, abs=1e-8)
    assert by_word["1"]["witness_point"] == "1(0)"
    assert by_word["0"]["sup_I"] == pytest.approx(0.0, abs=1e-8)
    assert by_word["10"]["sup_I"] == pytest.approx(-1.0, abs=1e-8)
    for r in payload["cylinders"]:
        assert r["gap"] <= 5e-2


def test_ldp_non_unique_maximizer_still_reports(capsys, tmp_path):
    job = {
        "beta": {"digits": "(10)"},
        "potential": {"table": {"0": 0.0, "1": 0.0}},
        "t_grid": "2:64:geometric",
        "p_max": 3,
        "cylinders": ["1"],
    }
    path = tmp_path / "flat.json"
    path.write_text(json.dumps(job), encoding="utf-8")
    code, payload = run_json(capsys, "ldp", "--config", str(path))
    assert code == 4
    assert payload["unique_maximizer"] is False
    assert payload["cylinders"][0]["unique_maximizer"] is False


COMMAND_ARGS = {
    "expand": [],
    "admissible": ["--word", "0"],
    "language": ["--n", "6"],
    "spectrum": [],
    "involution": [],
    "zerotemp": [],
    "ldp": [],
    "oracle": [],
}


@pytest.mark.parametrize("name", ["golden_depth2.json", "bernoulli.json", "golden_ldp.json"])
@pytest.mark.parametrize("command", sorted(COMMAND_ARGS))
def test_bundled_configs_run(capsys, name, command):
    assert main([command, "--config", _config(name), *COMMAND_ARGS[command]]) == 0
    assert capsys.readouterr().out.strip()


def test_jsonable():
    data = {"a": np.float64(1.5), "b": math.inf, "c": [np.int64(3), -math.inf], "d": np.array([0.5, math.nan]), 1: True}
    assert jsonable(data) == {"a": 1.5, "b": "inf", "c": [3, "-inf"], "d": [0.5, "nan"], "1": True}


def test_store_writes_atomically(tmp_path):
    store = ResultStore(str(tmp_path / "run"))
    path = store.write_csv("rows.csv", ("t", "value"), [(2.0, 0.1), (4.0, -math.inf)])
    assert open(path, encoding="utf-8").read() == "t,value\n2.0,0.1\n4.0,-inf\n"
    store.write_json("x.json", {"b": 1, "a": [math.inf]})
    assert (tmp_path / "run" / "x.json").read_text() == '{\n  "a": [\n    "inf"\n  ],\n  "b": 1\n}\n'
    assert sorted(os.listdir(tmp_path / "run")) == ["rows.csv", "x.json"]


def test_admissible_top_digit_of_integer_beta(capsys):
    assert main(["admissible", "--digits", "(1)", "--word", "2"]) == 0
    assert "NOT admissible" in capsys.readouterr().out
    assert main(["admissible", "--digits", "(1)", "--word", "3"]) == 1


def test_unknown_command_is_rejected_by_the_parser():
    with pytest.raises(SystemExit):
        main(["calibrate"])


def test_involution_on_sofic_beta(capsys, tmp_path):
    job = tmp_path / "sofic.json"
    job.write_text(
        json.dumps(
            {
                "beta": {"digits": "1(100)"},
                "potential": {"depth": 2, "table": {"00": -0.2, "01": 0.3, "10": -0.6, "11": 0.1}},
                "depth": 4,
            }
        )
    )
    code, payload = run_json(capsys, "involution", "--config", str(job), "--pairs", "random:20")
    assert code == 0
    assert payload["duality_max_residual"] <= 1e-12
    assert payload["lambda"] == pytest.approx(payload["lambda_transpose"], rel=1e-10)
    assert payload["marginal_defects"]["past"] <= 1e-9
    assert payload["marginal_defects"]["future"] <= 1e-9
