import json
import os
import re
import subprocess
import sys

import pytest

from flnp.cli import cli_main


def base_config(tmp_path, **kw):
    data = {
        "mode": "centralized",
        "phase": "finetune_classify",
        "model": "bert_mini",
        "rounds": 1,
        "local_epochs": 1,
        "batch_size": 16,
        "max_seq_len": 16,
        "partition": {"n_clients": 2, "mode": "balanced"},
        "data": {"n_records": 60, "min_len": 8, "max_len": 12},
        "out_dir": str(tmp_path / "out"),
    }
    data.update(kw)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return str(path)


def test_gen_data_writes_corpus(tmp_path, capsys):
    out = tmp_path / "corpus.txt"
    code = cli_main(["gen-data", "--out", str(out), "--n", "50", "--seed", "9"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 50
    assert all(re.match(r"^[01]\t\S", line) for line in lines)


def test_run_prints_checksum_and_is_repeatable(tmp_path, capsys):
    cfg = base_config(tmp_path)
    assert cli_main(["run", "--config", cfg, "--set", "seeds.init=7"]) == 0
    first = capsys.readouterr().out
    assert cli_main(["run", "--config", cfg, "--set", "seeds.init=7", "--force"]) == 0
    second = capsys.readouterr().out
    sums1 = re.findall(r"sha256 (\w+)", first)
    sums2 = re.findall(r"sha256 (\w+)", second)
    assert sums1 and sums1 == sums2


def test_run_without_force_skips_existing(tmp_path, capsys):
    cfg = base_config(tmp_path)
    assert cli_main(["run", "--config", cfg]) == 0
    capsys.readouterr()
    assert cli_main(["run", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "already present" in out


def test_malformed_json_exits_2_with_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"mode": }')
    code = cli_main(["run", "--config", str(bad)])
    assert code == 2
    err = capsys.readouterr().err
    assert "line 1" in err and "column" in err


def test_unknown_flag_exits_2(tmp_path, capsys):
    assert cli_main(["run", "--config", "x.json", "--bogus"]) == 2


def test_config_error_exits_2(tmp_path, capsys):
    cfg = base_config(tmp_path, model="lstm", phase="pretrain_mlm")
    assert cli_main(["run", "--config", cfg]) == 2


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert cli_main(["run", "--config", str(tmp_path / "none.json")]) == 2


def test_seed_override_changes_checksum(tmp_path, capsys):
    cfg = base_config(tmp_path)
    cli_main(["run", "--config", cfg, "--set", "seeds.init=7"])
    a = re.findall(r"sha256 (\w+)", capsys.readouterr().out)
    cli_main(["run", "--config", cfg, "--set", "seeds.init=8", "--force"])
    b = re.findall(r"sha256 (\w+)", capsys.readouterr().out)
    assert a != b


def test_compare_grid_shape(tmp_path, capsys):
    cfg = base_config(
        tmp_path,
        mode="federated",
        rounds=1,
        data={"n_records": 60, "min_len": 6, "max_len": 10},
        max_seq_len=12,
        batch_size=32,
    )
    code = cli_main(["compare", "--config", cfg])
    assert code == 0
    out = capsys.readouterr().out
    lines = [line for line in out.splitlines() if line.strip()]
    header = lines[-4]
    assert "bert" in header and "bert_mini" in header and "lstm" in header
    body = lines[-3:]
    assert [line.split()[0] for line in body] == ["centralized", "standalone", "federated"]
    for line in body:
        assert len(line.split()) == 4  # mode + 3 accuracies


def test_module_entry_point(tmp_path):
    out = tmp_path / "c.txt"
    env = dict(os.environ)
    env["PYTHONPATH"] = os.path.join(os.path.dirname(__file__), "..", "src")
    proc = subprocess.run(
        [sys.executable, "-m", "flnp", "gen-data", "--out", str(out), "--n", "10"],
        capture_output=True, text=True, env=env, timeout=120,
    )
    assert proc.returncode == 0
    assert out.exists()
