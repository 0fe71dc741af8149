import json
import subprocess
import sys

import pytest

from donverify.cli import EXIT_ABSENT, EXIT_DETECTED, EXIT_OK, EXIT_USAGE, main
from donverify.treefile import read_donors, read_tree


@pytest.fixture
def workflow(tmp_path):
    donors, tree, cheat = tmp_path / "donors.json", tmp_path / "tree.json", tmp_path / "cheat.json"
    spec = tmp_path / "spec.json"
    assert main(["generate", "--ids", "d,e,f,g", "--amounts", "1,5,10,84", "--decimals", "0", "--out", str(donors)]) == 0
    assert main(["publish", str(donors), "--out", str(tree)]) == 0
    spec.write_text(json.dumps({"edits": [{"node": 6, "V": 96}, {"node": 5, "V": 90}]}))
    assert main(["cheat", str(tree), "--spec", str(spec), "--out", str(cheat)]) == 0
    return tmp_path


def test_generate_fixed(tmp_path):
    out = tmp_path / "d.json"
    assert main(["generate", "--amounts", "1.50,2", "--out", str(out)]) == 0
    assert [(r.donor_id, r.amount) for r in read_donors(out)] == [("donor1", 150), ("donor2", 200)]


def test_generate_uniform_is_seeded(tmp_path, capsys):
    assert main(["generate", "--n", "20", "--a", "10.00", "--seed", "4"]) == 0
    first = capsys.readouterr().out
    assert main(["generate", "--n", "20", "--a", "10.00", "--seed", "4"]) == 0
    assert capsys.readouterr().out == first
    amounts = [r["amount"] for r in json.loads(first)]
    assert len(amounts) == 20 and all(1 <= a <= 1000 for a in amounts)


def test_verify_exit_codes(workflow, capsys):
    cheat = str(workflow / "cheat.json")
    assert main(["verify", cheat, "f", "10", "--decimals", "0"]) == EXIT_DETECTED
    out = capsys.readouterr().out
    assert "node 5: V=90  children sum=94  UNDER-CLAIM" in out
    assert main(["verify", cheat, "d", "1", "--decimals", "0"]) == EXIT_OK
    assert main(["verify", cheat, "zz", "1", "--decimals", "0"]) == EXIT_ABSENT
    assert main(["verify", str(workflow / "tree.json"), "g", "84", "--decimals", "0"]) == EXIT_OK
    assert main(["verify", str(workflow / "tree.json"), "g", "83", "--decimals", "0"]) == EXIT_DETECTED


def test_audit_text_and_json(workflow, capsys):
    args = [str(workflow / "cheat.json"), str(workflow / "donors.json")]
    assert main(["audit", *args]) == 0
    text = capsys.readouterr().out
    assert "deficit:         4" in text and "epsilon:         0.04" in text and "f, g" in text
    assert main(["audit", *args, "--format", "json"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["detecting_set"] == ["f", "g"] and res["failing_nodes"] == {"5": "under-claim"}
    assert main(["audit", str(workflow / "tree.json"), str(workflow / "donors.json")]) == 0
    assert "all clear" in capsys.readouterr().out


def test_simulate(workflow):
    cfg = workflow / "models.json"
    cfg.write_text(json.dumps([{"type": "uniform", "delta": 0.5}, {"type": "exponential", "lambda": 0.01}]))
    out = workflow / "sim.csv"
    args = ["simulate", str(workflow / "cheat.json"), str(workflow / "donors.json"), "--model", str(cfg),
            "--trials", "5000", "--out", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("model,") and lines[1].startswith("uniform,") and len(lines) == 3
    first = out.read_text()
    assert main(args) == 0
    assert out.read_text() == first


def test_cheat_attacks(workflow):
    tree = str(workflow / "tree.json")
    skim = workflow / "skim.json"
    assert main(["cheat", tree, "--attack", "skim", "--amount", "7", "--decimals", "0", "--out", str(skim)]) == 0
    assert read_tree(skim).claimed(6) == 93
    omit = workflow / "omit.json"
    assert main(["cheat", tree, "--attack", "omit", "--donor", "g", "--encoding", "delete", "--out", str(omit)]) == 0
    assert "g" not in read_tree(omit).donor_index
    assert main(["verify", str(omit), "g", "84", "--decimals", "0"]) == EXIT_ABSENT
    neg = workflow / "neg"
    assert main(["cheat", "--attack", "negative", "--n", "4", "--M", "9", "--decimals", "0", "--out", str(neg)]) == 0
    assert main(["verify", str(neg / "world_b.json"), "m3", "1", "--decimals", "0"]) == EXIT_DETECTED
    assert main(["verify", str(neg / "world_b.json"), "m3", "0", "--decimals", "0"]) == EXIT_OK


def test_publish_forest(workflow):
    out = workflow / "forest.json"
    assert main(["publish", str(workflow / "donors.json"), "--boundaries", "1,8,64,512", "--decimals", "0",
                 "--out", str(out)]) == 0
    assert json.loads(out.read_text())["forest"] is True


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["verify", "missing.json", "d", "1"],
    ["generate"],
    ["generate", "--n", "0", "--a", "5"],
    ["verify", "{tree}", "d", "0.001"],
    ["cheat", "{tree}", "--out", "{tmp}/x.json"],
    ["cheat", "{tree}", "--attack", "skim", "--amount", "1000", "--decimals", "0", "--out", "{tmp}/x.json"],
    ["simulate", "{tree}", "{donors}", "--model", "{tree}", "--trials", "10"],
])
def test_usage_errors_exit_1(workflow, argv, capsys):
    fill = {"tree": str(workflow / "tree.json"), "donors": str(workflow / "donors.json"), "tmp": str(workflow)}
    argv = [a.format(**fill) for a in argv]
    code = None
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_malformed_tree_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "k": 2, "allow_negative": false, "nodes": [{"id": 0, "parent": 0, "V": 1}]}')
    assert main(["verify", str(bad), "d", "1"]) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_console_entry_point(workflow):
    proc = subprocess.run(
        [sys.executable, "-m", "donverify.cli", "verify", str(workflow / "cheat.json"), "f", "10", "--decimals", "0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == EXIT_DETECTED and "cheating detected" in proc.stdout
