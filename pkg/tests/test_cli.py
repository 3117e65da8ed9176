import io
import json
import os
import pathlib
import subprocess
import sys

import pytest

from qrhlkit.cli import main

SCRIPTS = pathlib.Path(__file__).parent / "scripts"


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_success(tmp_path, capsys):
    cert = tmp_path / "out.cert"
    code, out, _ = run(["check", str(SCRIPTS / "paper_examples.qrhl"), "--cert", str(cert)], capsys)
    assert code == 0
    assert "0 admitted" in out
    assert cert.read_text().startswith("qrhlkit certificate v1")


def test_check_parse_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.qrhl"
    bad.write_text("var classical x bit.\n")
    code, _, err = run(["check", str(bad)], capsys)
    assert code == 2


def test_check_failed_tactic_exit_1_with_goal_dump(tmp_path, capsys):
    bad = tmp_path / "fail.qrhl"
    bad.write_text(
        "var classical x : bit.\n"
        "qrhl t : { top } { x <- 1 } ~ { skip } { CL[x1 == 0] }.\n"
        "assign1.\nqed.\n"
    )
    code, out, err = run(["check", str(bad)], capsys)
    assert code == 1
    assert "goal" in err


def test_check_admit_policy(tmp_path, capsys):
    scr = tmp_path / "adm.qrhl"
    scr.write_text(
        "var classical x : bit.\n"
        "qrhl t : { top } { x <- 1 } ~ { skip } { CL[x1 == 1] }.\nadmit.\nqed.\n"
    )
    code, _, err = run(["check", str(scr), "--cert", str(tmp_path / "c1")], capsys)
    assert code == 1 and "allow-admit" in err
    code2, out, _ = run(["check", str(scr), "--allow-admit", "--cert", str(tmp_path / "c2")], capsys)
    assert code2 == 0


def test_empty_script_exit_0(tmp_path, capsys):
    scr = tmp_path / "empty.qrhl"
    scr.write_text("")
    code, out, _ = run(["check", str(scr), "--cert", str(tmp_path / "c")], capsys)
    assert code == 0
    assert "0 lemma(s)" in out


def test_analyze(tmp_path, capsys):
    scr = tmp_path / "a.qrhl"
    scr.write_text(
        "var classical x : bit.\nvar quantum q : bit.\n"
        "program p := { local x; { x <- 1; q <q ket(0) } }.\n"
    )
    rec = tmp_path / "rec.json"
    code, out, _ = run(["analyze", str(scr), "--program", "p", "--json", str(rec)], capsys)
    assert code == 0
    assert "fv" in out and "{q}" in out
    data = json.loads(rec.read_text())
    assert data[0]["covered"] == "ALL"
    assert data[0]["overwr"] == ["q"]


def test_simulate(tmp_path, capsys):
    scr = tmp_path / "s.qrhl"
    scr.write_text("var classical x : bit.\nvar quantum q : bit.\nprogram p := { on q apply H }.\n")
    code, out, _ = run(["simulate", str(scr), "--program", "p", "--set", "x=1"], capsys)
    assert code == 0
    assert "x=1" in out and "0.4999999999999999" in out


def test_equivcheck(tmp_path, capsys):
    scr = tmp_path / "e.qrhl"
    scr.write_text(
        "var classical x : bit.\n"
        "program a := { x <- 0; x <- 1 }.\nprogram b := { x <- 1 }.\nprogram c := { x <- 0 }.\n"
    )
    code, out, _ = run(["equivcheck", str(scr), "--left", "a", "--right", "b"], capsys)
    assert code == 0 and "equal" in out
    code2, out2, _ = run(["equivcheck", str(scr), "--left", "a", "--right", "c"], capsys)
    assert code2 == 1 and "counterexample" in out2


def test_transform(tmp_path, capsys):
    scr = tmp_path / "t.qrhl"
    scr.write_text("var classical x : bit.\nvar classical y : bit.\nprogram p := { local y; { x <- 1 } }.\n")
    laws = tmp_path / "laws.txt"
    laws.write_text("remove_unused_local at stmt:0\n")
    code, out, _ = run(["transform", str(scr), "--program", "p", "--laws", str(laws)], capsys)
    assert code == 0
    assert "equivalence check: equal" in out
    laws.write_text("remove_unused_local at stmt:0\n")
    scr.write_text("var classical x : bit.\nprogram p := { local x; { x <- 1 } }.\n")
    code2, _, err = run(["transform", str(scr), "--program", "p", "--laws", str(laws)], capsys)
    assert code2 == 1 and "rejected" in err


def test_predeval_cli(tmp_path, capsys):
    scr = tmp_path / "p.qrhl"
    scr.write_text("var quantum q : bit.\n")
    code, out, _ = run(["predeval", str(scr), "--pred", "qeq(q1, q2)"], capsys)
    assert code == 0
    assert "dim 3 of 4" in out


def test_falsify_cli(tmp_path, capsys):
    scr = tmp_path / "f.qrhl"
    scr.write_text(
        "var classical x : bit.\n"
        "qrhl wrong : { top } { x <$ uniform(bit) } ~ { x <- 0 } { CL[x1 == x2] }.\n"
    )
    code, out, _ = run(["falsify", str(scr)], capsys)
    assert code == 1
    assert "verdict: refuted" in out


def test_examples_cli(capsys):
    code, out, _ = run(["examples"], capsys)
    assert code == 0
    assert "qed c3_chain: proved, admitted=0" in out


def test_repl_matches_batch_certificate(tmp_path, capsys):
    text = (SCRIPTS / "classical_wp.qrhl").read_text()
    import argparse

    from qrhlkit.cli import cmd_repl

    cert_repl = tmp_path / "repl.cert"
    args = argparse.Namespace(workspace_budget=4096, cert=str(cert_repl))
    code = cmd_repl(args, stdin=io.StringIO(text), stdout=io.StringIO())
    assert code == 0
    cert_batch = tmp_path / "batch.cert"
    assert main(["check", str(SCRIPTS / "classical_wp.qrhl"), "--cert", str(cert_batch)]) == 0
    capsys.readouterr()
    assert cert_repl.read_bytes() == cert_batch.read_bytes()


def test_repl_undo(tmp_path):
    import argparse

    from qrhlkit.cli import cmd_repl

    text = (
        "var classical x : bit.\n"
        "qrhl t : { top } { x <- 1 } ~ { x <- 1 } { top }.\n"
        "admit.\nundo.\ngoals.\n"
    )
    out = io.StringIO()
    args = argparse.Namespace(workspace_budget=4096, cert=None)
    cmd_repl(args, stdin=io.StringIO(text), stdout=out)
    text_out = out.getvalue()
    assert "undone" in text_out
    assert "1 goal(s)" in text_out


def test_console_entrypoint_subprocess():
    proc = subprocess.run(
        [sys.executable, "-m", "qrhlkit.cli", "examples"], capture_output=True, text=True, timeout=120
    )
    assert proc.returncode == 0
    assert "qrhlkit certificate v1" in proc.stdout
