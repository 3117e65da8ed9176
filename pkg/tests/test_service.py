"""Session-protocol service tests, including frontend certificate equivalence."""

import io
import pathlib

import pytest
from fastapi.testclient import TestClient

from qrhlkit.kernel.script import Engine, split_commands
from qrhlkit.service.app import create_app
from qrhlkit.service.models import PROTOCOL_VERSION

SCRIPTS = pathlib.Path(__file__).parent / "scripts"


@pytest.fixture()
def client():
    return TestClient(create_app())


def new_session(client):
    res = client.post("/sessions")
    assert res.status_code == 200
    body = res.json()
    assert body["protocol_version"] == PROTOCOL_VERSION
    return body["session_id"]


def msg(client, sid, kind, **payload):
    res = client.post(f"/sessions/{sid}/message", json={"kind": kind, "payload": payload})
    assert res.status_code == 200
    return res.json()


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"


def test_every_request_gets_one_response(client):
    sid = new_session(client)
    out = msg(client, sid, "load", text="var classical x : bit.")
    assert out["kind"] == "state"
    out = msg(client, sid, "goals")
    assert out["kind"] == "goals"
    out = msg(client, sid, "varsets", program="{ x <- 1 }")
    assert out["kind"] == "varsets" and "overwr" in out["payload"]["text"]
    out = msg(client, sid, "tactic", command="qrhl t : { top } { x <- 1 } ~ { x <- 1 } { top }")
    assert out["kind"] == "state" and out["payload"]["open_lemma"] == "t"
    out = msg(client, sid, "undo")
    assert out["kind"] == "state" and out["payload"]["open_lemma"] is None


def test_error_preserves_session(client):
    sid = new_session(client)
    msg(client, sid, "load", text="var classical x : bit.")
    out = msg(client, sid, "tactic", command="qrhl t : { top } { z <- 1 } ~ { skip } { top }")
    assert out["kind"] == "error"
    # the session survives and remains usable
    out2 = msg(client, sid, "tactic", command="qrhl t : { top } { x <- 1 } ~ { x <- 1 } { top }")
    assert out2["kind"] == "state"


def test_unknown_session_404(client):
    res = client.post("/sessions/nope/message", json={"kind": "goals", "payload": {}})
    assert res.status_code == 404


def test_bad_vmid_surfaces_adversary_premise(client):
    sid = new_session(client)
    text = (SCRIPTS / "paper_examples.qrhl").read_text()
    commands = split_commands(text)
    # play up to (and including) the seq split of the c3 lemma
    for cmd in commands[:-3]:
        out = msg(client, sid, "tactic", command=cmd)
        assert out["kind"] != "error", out
    out = msg(client, sid, "tactic", command="equal mid (q)")
    assert out["kind"] == "error"
    assert "Vout ⊆ Vmid" in out["payload"]["text"]


def test_event_source_replay_via_log(client):
    sid = new_session(client)
    text = (SCRIPTS / "classical_wp.qrhl").read_text()
    for cmd in split_commands(text):
        msg(client, sid, "tactic", command=cmd)
    state = msg(client, sid, "state")
    log = client.get(f"/sessions/{sid}/log").json()["entries"]
    replay = Engine()
    for request, _, _ in log:
        replay.execute(request)
    assert replay.certificate_text() == state["payload"]["certificate"]


@pytest.mark.parametrize("script", ["paper_examples.qrhl", "classical_wp.qrhl", "quantum_measure.qrhl"])
def test_batch_repl_serve_byte_identical_certificates(tmp_path, script, client):
    import argparse

    from qrhlkit.cli import cmd_repl, main

    path = SCRIPTS / script
    # batch
    cert_batch = tmp_path / "batch.cert"
    assert main(["check", str(path), "--cert", str(cert_batch)]) == 0
    # repl
    cert_repl = tmp_path / "repl.cert"
    args = argparse.Namespace(workspace_budget=4096, cert=str(cert_repl))
    assert cmd_repl(args, stdin=io.StringIO(path.read_text()), stdout=io.StringIO()) == 0
    # serve
    sid = new_session(client)
    for cmd in split_commands(path.read_text()):
        out = msg(client, sid, "tactic", command=cmd)
        assert out["kind"] != "error", out
    cert_serve = msg(client, sid, "state")["payload"]["certificate"]
    assert cert_batch.read_bytes() == cert_repl.read_bytes() == cert_serve.encode()


def test_delete_session(client):
    sid = new_session(client)
    assert client.delete(f"/sessions/{sid}").json()["deleted"] == sid
    res = client.post(f"/sessions/{sid}/message", json={"kind": "goals", "payload": {}})
    assert res.status_code == 404
