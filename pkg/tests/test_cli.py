import csv
import json

import numpy as np
import pytest

from flagcka.bell import behavior_from_strategy, behavior_to_json
from flagcka.cli import main
from flagcka.strategies import NoiseParams, honest_flagged_strategy


def test_info_reports_constants(capsys):
    assert main(["info"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["package"] == "flagcka"
    assert doc["scenario"]["inputs"] == [2, 3, 3]
    assert doc["constants"]["local_bound"] == 2.0
    assert doc["constants"]["quantum_maximum"] == pytest.approx(2 * np.sqrt(2))
    assert doc["constants"]["honest_conference_rate"] == 0.5
    assert doc["constants"]["honest_decoupling_entropy"] == pytest.approx(1.0, abs=1e-9)


def test_simulate_writes_everything(tmp_path, capsys):
    out = tmp_path / "result.json"
    transcript = tmp_path / "rounds.jsonl"
    keys_dir = tmp_path / "keys"
    code = main(
        [
            "simulate",
            "--rounds", "2000",
            "--seed", "4",
            "--output", str(out),
            "--transcript", str(transcript),
            "--keys-dir", str(keys_dir),
        ]
    )
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["outcome"] == "completed"
    lines = transcript.read_text().strip().splitlines()
    assert len(lines) == 2000
    key_files = sorted(p.name for p in keys_dir.iterdir())
    assert key_files == ["alice.key", "bob.key", "carole.key"]
    alice = (keys_dir / "alice.key").read_text().strip()
    assert alice == doc["keys"]["alice"]
    assert set(alice) <= {"0", "1"}


def test_simulate_is_seed_deterministic(capsys):
    assert main(["simulate", "--rounds", "1500", "--seed", "10"]) == 0
    first = capsys.readouterr().out
    assert main(["simulate", "--rounds", "1500", "--seed", "10"]) == 0
    assert capsys.readouterr().out == first


def test_simulate_abort_exit_code(capsys):
    code = main(["simulate", "--rounds", "1500", "--seed", "2", "--visibility", "0.5"])
    assert code == 2
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert doc["outcome"] == "aborted"
    assert doc["abort_reason"] == "BellBelowThreshold"
    assert "aborted" in captured.err


def test_simulate_tamper_aborts(capsys):
    code = main(["simulate", "--rounds", "1200", "--seed", "1", "--tamper", "flag-constant:1"])
    assert code == 2
    assert json.loads(capsys.readouterr().out)["abort_reason"] == "FlagConstant"


def test_simulate_parallel(capsys):
    code = main(["simulate", "--rounds", "1500", "--seed", "9", "--strategy", "parallel"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stats"]["strategy_kind"] == "parallel"


def test_simulate_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n_rounds": 1500, "gamma": 0.2, "seed": 0}))
    code = main(["simulate", "--config", str(cfg), "--seed", "4"])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["stats"]["n_rounds"] == 1500


def test_rates_command(tmp_path, capsys):
    behavior = behavior_from_strategy(honest_flagged_strategy(NoiseParams(visibility=0.95)))
    path = tmp_path / "behavior.json"
    path.write_text(behavior_to_json(behavior))
    assert main(["rates", str(path), "--method", "vn", "--mode", "two-scores"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["method"] == "von_neumann_analytic"
    assert 0.0 < doc["r_cka"] < 0.5
    assert main(["rates", str(path), "--method", "minH", "--mode", "one-score"]) == 0
    doc_floor = json.loads(capsys.readouterr().out)
    assert doc_floor["r_cka"] <= doc["r_cka"]


def test_curve_csv_and_endpoints(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["curve", "--points", "11", "--format", "csv", "--output", str(out)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    assert len(rows) == 11
    assert float(rows[0]["s"]) == pytest.approx(2.0)
    assert float(rows[0]["entropy_bound"]) == pytest.approx(0.0, abs=1e-9)
    assert float(rows[-1]["s"]) == pytest.approx(2 * np.sqrt(2))
    assert float(rows[-1]["entropy_bound"]) == pytest.approx(1.0, abs=1e-9)


def test_curve_jobs_do_not_change_output(capsys):
    assert main(["curve", "--points", "17"]) == 0
    serial = capsys.readouterr().out
    assert main(["curve", "--points", "17", "--jobs", "2"]) == 0
    assert capsys.readouterr().out == serial


def test_curve_rejects_single_point(capsys):
    assert main(["curve", "--points", "1"]) == 1


def test_local_bound_command(capsys):
    assert main(["local-bound"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["max_value"] == 2.0
    assert set(doc["maximizer"]) == {"alice", "bob", "carole"}


def test_verify_all_passes(capsys):
    assert main(["verify", "--suite", "all", "--seeds", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert all(r["passed"] for r in doc)
    # honest all-suite (9) plus three randomized strategies without
    # the decoupling pair (7 each)
    assert len(doc) == 9 + 3 * 7


def test_verify_csv_format(capsys):
    assert main(["verify", "--suite", "tsirelson", "--seeds", "1", "--format", "csv"]) == 0
    out = capsys.readouterr().out
    header, *rows = out.strip().splitlines()
    assert header == "key,value"
    assert any("weighted_tsirelson" in row for row in rows)


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["verify", "--suite", "everything"])
    assert err.value.code == 1


def test_missing_file_exits_one(tmp_path, capsys):
    assert main(["rates", str(tmp_path / "nope.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_value_exits_one(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"gamma": 2.0}))
    assert main(["simulate", "--config", str(cfg)]) == 1
