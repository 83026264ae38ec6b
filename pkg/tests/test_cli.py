import json
from pathlib import Path

import numpy as np
import pytest

from smithmaps.cli import main
from smithmaps.geometry import MapJet, dump_jets

FIXTURES = Path(__file__).parent / "fixtures"
BROKEN = FIXTURES / "broken_conventions.json"


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(list(argv) + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_comass_standard(tmp_path):
    code, rep = run(["comass", "--standard", "associative", "--restarts", "20"], tmp_path)
    assert code == 0
    assert rep["result"]["value"] == pytest.approx(1.0, abs=1e-6)
    assert rep["config_echo"]["standard"] == "associative"


def test_comass_scaled_file_fails(tmp_path):
    f = tmp_path / "form.json"
    f.write_text(json.dumps({"dim": 4, "degree": 2, "terms": [{"indices": [1, 2], "coeff": 2.0}]}))
    code, rep = run(["comass", "--file", str(f), "--restarts", "10"], tmp_path)
    assert code == 1
    assert rep["result"]["value"] == pytest.approx(2.0)


@pytest.mark.parametrize("argv", [
    ["comass", "--file", "/nonexistent/form.json"],
    ["comass"],
    ["check", "--model", "moebius"],
    ["check"],
    ["energy", "--model", "sphere-stereographic-line"],
    ["bogus"],
    ["comass", "--standard", "kaehler", "--restarts", "0"],
    ["verify-lemmas", "--suites", "99"],
])
def test_input_errors_exit_two(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path / "x.json")]) == 2


def test_check_model_pass_and_fail(tmp_path):
    code, rep = run(["check", "--model", "coassoc-fibration-T7", "--grid", "4"], tmp_path)
    assert code == 0 and rep["summary"]["verdict"] == "pass"
    code, rep = run(["check", "--model", "coassoc-fibration-T7", "--grid", "4", "--perturb", "0.1"], tmp_path)
    assert code == 1 and rep["summary"]["max_residual_form"] > 1e-3


def test_check_jets(tmp_path):
    jets = [MapJet([0.0, 0.0], np.zeros(4), np.eye(4)[:, :2]),
            MapJet([1.0, 0.0], np.zeros(4), 2 * np.eye(4)[:, :2])]
    f = tmp_path / "jets.jsonl"
    dump_jets(f, jets)
    code, rep = run(["check", "--jets", str(f), "--direction", "immersion",
                     "--calibration", "kaehler"], tmp_path)
    assert code == 0
    assert [p["lambda"] for p in rep["points"]] == pytest.approx([1.0, 2.0])
    # wrong-degree calibration
    assert main(["check", "--jets", str(f), "--direction", "immersion",
                 "--calibration", "associative", "--out", str(tmp_path / "y.json")]) == 2


def test_energy_and_tension(tmp_path):
    code, rep = run(["energy", "--model", "identity-T2", "--grid", "16"], tmp_path)
    assert code == 0
    assert rep["summary"]["energy"] == pytest.approx(4 * np.pi ** 2)
    code, rep = run(["tension", "--model", "sphere-stereographic-line"], tmp_path)
    assert code == 0 and rep["summary"]["max_tension"] <= 1e-4


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"standard": "kaehler", "restarts": 5, "seed": 3}))
    code, rep = run(["comass", "--config", str(cfg), "--seed", "4"], tmp_path)
    assert code == 0
    assert rep["config_echo"]["seed"] == 4 and rep["config_echo"]["restarts"] == 5
    cfg.write_text(json.dumps({"flavour": 1}))
    assert main(["comass", "--config", str(cfg)]) == 2


def test_models_list(tmp_path):
    code, rep = run(["models-list"], tmp_path)
    assert code == 0
    assert "complex-line-T4" in [m["name"] for m in rep["models"]["flat_models"]]


def test_verify_lemmas_deterministic(tmp_path):
    argv = ["verify-lemmas", "--suites", "1,2,6,8", "--scale", "0.02", "--seed", "7"]
    main(argv + ["--out", str(tmp_path / "a.json")])
    main(argv + ["--out", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_negative_control_fails_star_suite(tmp_path):
    code, rep = run(["verify-lemmas", "--suites", "3", "--restarts", "20",
                     "--conventions", str(BROKEN)], tmp_path)
    assert code == 1
    assert rep["summary"]["failed"] == ["star_calibration"]
    code, rep = run(["verify-lemmas", "--suites", "3", "--restarts", "20"], tmp_path)
    assert code == 0
