import json

import pytest

from bkb import fixtures
from bkb.cli import main

BURGLARY = str(fixtures.path("burglary.bkb"))
BQE = str(fixtures.path("burglary.bqe"))
EVIDENCE = [
    "-e", "Radio=+",
    "-e", "Neighbor(Watson,Holmes)=+",
    "-e", "Phone-call(Watson,Holmes)=+",
    "-e", "Neighbor(Moriarty,Holmes)=+",
    "-e", "Phone-call(Moriarty,Holmes)=+",
]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", BURGLARY)
    assert code == 0 and out.strip() == "OK"
    code, out, _ = run(capsys, "validate", str(fixtures.path("shared_consequent.bkb")))
    assert code == 1 and "C3" in out and "G1" in out and "G2" in out
    code, _, err = run(capsys, "validate", "/nonexistent/missing.bkb")
    assert code == 2 and "cannot read" in err


def test_validate_json(capsys):
    code, out, _ = run(capsys, "validate", str(fixtures.path("cycle2.bkb")), "--format", "json")
    assert code == 1
    data = json.loads(out)
    assert data["ok"] is False and data["violations"][0]["constraint"] == "C4"


def test_validate_parse_error(tmp_path, capsys):
    p = tmp_path / "bad.bkb"
    p.write_text("range pm { + }\n")
    code, _, err = run(capsys, "validate", str(p))
    assert code == 2 and "bad.bkb:1:" in err


def test_query(capsys):
    code, out, _ = run(capsys, "query", BURGLARY, "Burglary(Holmes)", *EVIDENCE)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "P(Burglary(Holmes) | evidence)"
    assert lines[1].startswith("+: ") and lines[2].startswith("-: ")
    assert abs(float(lines[1][3:]) + float(lines[2][3:]) - 1.0) <= 1e-9
    code2, out2, _ = run(capsys, "query", BURGLARY, "--bqe", BQE)
    assert code2 == 0 and out2 == out


def test_query_nonground_is_parse_error(capsys):
    code, _, err = run(capsys, "query", BURGLARY, "Burglary(x)")
    assert code == 2 and "ground" in err


def test_query_root_prior(capsys):
    code, out, _ = run(capsys, "query", BURGLARY, "Quake", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["posterior"] == pytest.approx({"t": 0.9, "m": 0.08, "s": 0.02}, abs=1e-15)
    assert data["nodes"] == 1


def test_query_invalid_kb_and_force(capsys):
    kb = str(fixtures.path("shared_consequent.bkb"))
    code, out, _ = run(capsys, "query", kb, "g(A)")
    assert code == 1 and "C3" in out
    code, out, _ = run(capsys, "query", kb, "g(A)", "--force")
    assert code == 0
    code, _, err = run(capsys, "query", str(fixtures.path("cycle2.bkb")), "f(A)", "--force")
    assert code == 3 and "CycleDetected" in err


def test_query_runtime_errors(tmp_path, capsys):
    p = tmp_path / "det.bkb"
    p.write_text(
        "range pm { +, - }\nvar A() : pm\nvar B() : pm\nvar C() : pm\n"
        "rule RA { A : cpt [1 0] }\nrule RB { B | A : cpt [1 0 0 1] }\n"
    )
    code, _, err = run(capsys, "query", str(p), "A", "-e", "B=-")
    assert code == 3 and "ZeroEvidence" in err
    code, _, err = run(capsys, "query", str(p), "C")
    assert code == 3 and "MissingRule" in err


def test_conflicting_evidence_sources(tmp_path, capsys):
    code, _, err = run(capsys, "query", BURGLARY, "--bqe", BQE, "-e", "Radio=-")
    assert code == 2 and "conflicting" in err
    code, _, _ = run(capsys, "query", BURGLARY, "--bqe", BQE, "-e", "Radio=+")
    assert code == 0
    code, _, err = run(capsys, "query", BURGLARY)
    assert code == 2


def test_query_writes_dump_and_dot(tmp_path, capsys):
    dump, dot = tmp_path / "net.json", tmp_path / "net.dot"
    code, _, _ = run(capsys, "query", BURGLARY, "--bqe", BQE, "--dump-net", str(dump), "--dot", str(dot), "--c4-ground")
    assert code == 0
    assert len(json.loads(dump.read_text())["nodes"]) == 9
    assert dot.read_text().count("->") == 8


def test_export(capsys):
    code, out, _ = run(capsys, "export", BURGLARY, "--bqe", BQE)
    assert code == 0 and out.startswith("digraph") and out.count("->") == 8
    code2, out2, _ = run(capsys, "export", BURGLARY, "--bqe", BQE)
    assert out2 == out


def test_dsep(capsys):
    code, out, _ = run(capsys, "dsep", BURGLARY, "--bqe", BQE, "-x", "Radio", "-z", "Quake", "-y", "Burglary(Holmes)")
    assert code == 0 and out.splitlines()[0] == "true"
    code, out, _ = run(capsys, "dsep", BURGLARY, "--bqe", BQE, "-x", "Burglary(Holmes)", "-y", "Quake")
    assert code == 0 and out.splitlines()[0] == "true"
    code, out, _ = run(
        capsys, "dsep", BURGLARY, "--bqe", BQE, "-x", "Burglary(Holmes)", "-y", "Quake",
        "-z", "Phone-call(Watson,Holmes)", "--format", "json",
    )
    data = json.loads(out)
    assert data["d_separated"] is False and "Alarm(Holmes)" in data["witness"]


def test_dsep_errors(capsys):
    code, _, _ = run(capsys, "dsep", BURGLARY, "--bqe", BQE, "-x", "Radio", "-z", "Radio", "-y", "Quake")
    assert code == 3
    code, _, err = run(capsys, "dsep", BURGLARY, "--bqe", BQE, "-x", "Report(Holmes)", "-y", "Quake")
    assert code == 3 and "not a node" in err


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", BURGLARY, "--bqe", BQE, "--seeds", "50", "--tol", "1e-9")
    assert code == 0 and out.startswith("PASS")


def test_oracle_check_zero_tolerance_fails_on_rounding(capsys):
    code, out, _ = run(capsys, "oracle-check", BURGLARY, "--bqe", BQE, "--tol", "0", "--format", "json")
    data = json.loads(out)
    assert code == 1 and not data["ok"]
    assert 0 < data["max_deviation"] < 1e-12


def test_oracle_check_size_limit(tmp_path, capsys):
    lines = ["range pm { +, - }"] + [f"var N{i}() : pm" for i in range(25)]
    lines.append("rule R0 { N0 : cpt [0.5 0.5] }")
    lines += [f"rule R{i} {{ N{i} | N{i - 1} : cpt [0.9 0.1 0.2 0.8] }}" for i in range(1, 25)]
    p = tmp_path / "chain.bkb"
    p.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "oracle-check", str(p), "N24")
    assert code == 3 and "SizeLimit" in err
    code, _, _ = run(capsys, "query", str(p), "N24")
    assert code == 0


def test_commands_do_not_modify_inputs(capsys):
    before = fixtures.read("burglary.bkb")
    run(capsys, "query", BURGLARY, "--bqe", BQE)
    assert fixtures.read("burglary.bkb") == before
