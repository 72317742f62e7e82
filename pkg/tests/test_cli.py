import io
import json
import re
import sys
from pathlib import Path

import pytest

from qclean import cli
from qclean.store import load_prob

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"
GOLDEN = Path(__file__).parent / "golden"

SESSIONS = {
    "cities": (["--data", str(DATA / "cities.csv"), "--rules", str(DATA / "cities_rules.txt")],
               (DATA / "examples.sql").read_text() + "\n\\stats\nSELECT nope FROM cities\n"),
    "join": (["--data", f"cities={DATA / 'join_cities.csv'}", "--data", str(DATA / "employee.csv"),
              "--rules", str(DATA / "join_rules.txt")], (DATA / "join.sql").read_text()),
    "emp": (["--data", str(DATA / "emp.csv"), "--rules", str(DATA / "emp_rules.txt"), "--partitions", "4"],
            (DATA / "emp.sql").read_text()),
}


def mask(text):
    return re.sub(r"-- time: [0-9.]+ ms", "-- time: <ms>", text)


def run(argv, stdin="", monkeypatch=None, capsys=None):
    monkeypatch.setattr(sys, "stdin", io.StringIO(stdin))
    monkeypatch.setattr(cli, "log_err", sys.stderr)
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("name", sorted(SESSIONS))
def test_repl_matches_golden(name, monkeypatch, capsys):
    args, stdin = SESSIONS[name]
    code, out, _ = run(["repl", "--mode", "incremental"] + args, stdin, monkeypatch, capsys)
    assert code == 0
    assert mask(out) == (GOLDEN / f"repl_{name}.txt").read_text()


def test_repl_skips_blank_lines_and_saves(tmp_path, monkeypatch, capsys):
    args, _ = SESSIONS["cities"]
    stdin = f"\n\n{(DATA / 'examples.sql').read_text().splitlines()[1]}\n\\save {tmp_path}\n\\bogus\n\\quit\nSELECT 1\n"
    code, out, _ = run(["repl"] + args, stdin, monkeypatch, capsys)
    assert code == 0 and f"saved {tmp_path / 'cities.jsonl'}" in out and "unknown command" in out
    assert load_prob(tmp_path / "cities.jsonl").checked["fd1"] == {1, 2, 3, 4, 5}


def test_run_writes_report_and_relations(tmp_path, monkeypatch, capsys):
    args, _ = SESSIONS["cities"]
    code, _, _ = run(["run", "--mode", "incremental", "--queries", str(DATA / "examples.sql"),
                      "--out", str(tmp_path)] + args, "", monkeypatch, capsys)
    assert code == 0
    lines = [json.loads(x) for x in (tmp_path / "report.jsonl").read_text().splitlines()]
    assert [x["record"]["rows"] for x in lines[:-1]] == [3, 4, 3]
    assert all(set(x) == {"record", "timing"} for x in lines[:-1])
    assert lines[-1]["summary"]["queries"] == 3 and lines[-1]["summary"]["error"] is None
    assert (tmp_path / "cities.jsonl").exists()


def test_run_is_reproducible_apart_from_timing(tmp_path, monkeypatch, capsys):
    args, _ = SESSIONS["join"]
    outs = []
    for _ in range(2):
        code, out, _ = run(["run", "--queries", str(DATA / "join.sql")] + args, "", monkeypatch, capsys)
        outs.append([{k: v for k, v in json.loads(x).items() if k != "timing"} for x in out.splitlines()])
    assert outs[0] == outs[1]


def test_run_empty_file_and_failure(tmp_path, monkeypatch, capsys):
    args, _ = SESSIONS["cities"]
    (tmp_path / "empty.sql").write_text("-- nothing\n")
    code, out, _ = run(["run", "--queries", str(tmp_path / "empty.sql")] + args, "", monkeypatch, capsys)
    assert code == 0 and len(out.splitlines()) == 1 and json.loads(out)["summary"]["queries"] == 0
    (tmp_path / "bad.sql").write_text("SELECT zip FROM cities\nSELECT nope FROM cities\nSELECT zip FROM cities\n")
    code, out, err = run(["run", "--queries", str(tmp_path / "bad.sql")] + args, "", monkeypatch, capsys)
    assert code == 1 and "nope" in err and json.loads(out.splitlines()[-1])["summary"]["queries"] == 1


def test_load_errors_exit_2(tmp_path, monkeypatch, capsys):
    code, _, err = run(["run", "--data", str(tmp_path / "missing.csv")], "", monkeypatch, capsys)
    assert code == 2 and err.startswith("error:")
    code, _, err = run(["run", "--data", str(DATA / "cities.csv"), "--rules", str(DATA / "join_rules.txt")],
                       "", monkeypatch, capsys)
    assert code == 2 and "employee" in err


def test_gen_errors_and_score(tmp_path, monkeypatch, capsys):
    rows = ["k,v"] + [f"{i % 5},{i % 5}" for i in range(60)]
    (tmp_path / "r.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "r.schema").write_text("k: int\nv: int\n")
    (tmp_path / "rules.txt").write_text("f = FD r: k -> v\n")
    gen = ["gen-errors", "--data", str(tmp_path / "r.csv"), "--rules", str(tmp_path / "rules.txt"), "--rule", "f",
           "--rate", "0.1", "--seed", "4", "--out", str(tmp_path / "d" / "r.csv"), "--truth", str(tmp_path / "t.json")]
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "r.schema").write_text("k: int\nv: int\n")
    code, _, err = run(gen, "", monkeypatch, capsys)
    assert code == 0 and "edited 10 cells" in err
    first = (tmp_path / "d" / "r.csv").read_bytes()
    run(gen, "", monkeypatch, capsys)
    assert (tmp_path / "d" / "r.csv").read_bytes() == first
    (tmp_path / "q.sql").write_text("SELECT k FROM r WHERE k = 0\n")
    code, _, _ = run(["run", "--mode", "offline", "--data", str(tmp_path / "d" / "r.csv"), "--rules",
                      str(tmp_path / "rules.txt"), "--queries", str(tmp_path / "q.sql"), "--out", str(tmp_path / "o")],
                     "", monkeypatch, capsys)
    assert code == 0
    code, out, _ = run(["score", "--data", str(tmp_path / "o" / "r.jsonl"), "--truth", str(tmp_path / "t.json")],
                       "", monkeypatch, capsys)
    s = json.loads(out)
    assert code == 0 and s["errors"] == 10 and s["precision"] == 1.0 and s["recall"] == 1.0
    bad = list(gen)
    bad[bad.index("f")] = "nope"
    code, _, err = run(bad, "", monkeypatch, capsys)
    assert code == 2 and "unknown rule" in err


def test_compare_modes(monkeypatch, capsys):
    args, _ = SESSIONS["cities"]
    code, out, _ = run(["compare", "--queries", str(DATA / "examples.sql")] + args, "", monkeypatch, capsys)
    rows = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and [r["mode"] for r in rows] == ["auto", "incremental", "offline"]
    assert all(r["error"] is None and r["sim_cost"] > 0 for r in rows)
