"""Command-line frontend: batch checking, analysis, simulation, REPL, server.

All subcommands are thin wrappers over the core package; the interactive
server is the FastAPI app from qrhlkit.service.  Flags mirror environment
variables with the QRHLKIT_ prefix (e.g. QRHLKIT_WORKSPACE_BUDGET).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import analysis as an
from . import ast as A
from . import predicates as P
from . import rewrite as RW
from .kernel.examples import PAPER_EXAMPLES_SCRIPT
from .kernel.goals import ProbGoal, QrhlGoal
from .kernel.script import CommandResult, Engine, ScriptError, split_commands
from .parser import ParseError
from .semantics import CqOperator, apply_denot, deneq_check
from .workspace import DoubledWorkspace


def _env(name: str, default):
    v = os.environ.get("QRHLKIT_" + name)
    if v is None:
        return default
    if isinstance(default, bool):
        return v.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(v)
    return v


def _load_engine(path: str, budget: int) -> Engine:
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    eng = Engine(budget=budget)
    for res in eng.run_text(text):
        if res.kind == "error":
            raise ScriptError(res.text)
    return eng


def cmd_check(args) -> int:
    try:
        with open(args.script, "r", encoding="utf-8") as f:
            text = f.read()
        commands = split_commands(text)
    except (OSError, ScriptError, ParseError) as e:
        print(f"parse error: {e}", file=sys.stderr)
        return 2
    eng = Engine(budget=args.workspace_budget)
    for cmd in commands:
        res = eng.execute(cmd)
        if res.kind == "error":
            print(f"failed command: {cmd}", file=sys.stderr)
            print(res.text, file=sys.stderr)
            if eng.sess is not None and eng.sess.lemma_name is not None:
                print(eng.sess.goal_listing(), file=sys.stderr)
            return 2 if "ParseError" in res.text else 1
    summary = eng.summary()
    if summary["open"] is not None:
        print(f"lemma {summary['open']} left open", file=sys.stderr)
        print(eng.sess.goal_listing(), file=sys.stderr)
        return 1
    cert_path = args.cert or (args.script + ".cert")
    with open(cert_path, "w", encoding="utf-8") as f:
        f.write(eng.certificate_text())
    admitted = summary["admitted_total"]
    print(f"{len(summary['lemmas'])} lemma(s) checked, {admitted} admitted obligation(s)")
    print(f"certificate written to {cert_path}")
    if admitted and not args.allow_admit:
        print("admitted obligations present (pass --allow-admit to accept)", file=sys.stderr)
        return 1
    return 0


def cmd_analyze(args) -> int:
    eng = _load_engine(args.script, args.workspace_budget)
    names = [args.program] if args.program else sorted(eng.programs)
    records = []
    for name in names:
        if name not in eng.programs:
            print(f"unknown program {name!r}", file=sys.stderr)
            return 2
        rep = an.varsets(eng.programs[name]).as_dict()
        records.append({"program": name, **rep})
        print(f"program {name}:")
        for key in ("fv", "inner", "covered", "overwr", "written"):
            val = rep[key]
            print(f"  {key:8s} " + ("ALL" if val == "ALL" else "{" + ", ".join(val) + "}"))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump(records, f, indent=2, sort_keys=True)
    return 0


def _initial_state(eng: Engine, args) -> CqOperator:
    ws = eng.workspace()
    mem = list(ws.default_memory())
    qvec = None
    assignments = list(args.set or [])
    if args.state:
        with open(args.state, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if line.startswith("amplitudes"):
                    qvec = np.array([complex(tok) for tok in line.split()[1:]], dtype=complex)
                else:
                    assignments.append(line.replace(" ", ""))
    for item in assignments:
        name, _, val = item.partition("=")
        decl = ws.var(name)
        parsed = json.loads(val) if val not in ("true", "false") else (val == "true")
        mem[ws.classical_pos(name)] = parsed
        decl.ty.index_of(parsed)
    if qvec is not None:
        if qvec.shape[0] != ws.qdim:
            raise ScriptError(f"amplitude vector must have length {ws.qdim}")
        qvec = qvec / np.linalg.norm(qvec)
    return CqOperator.point(ws, tuple(mem), qvec)


def cmd_simulate(args) -> int:
    eng = _load_engine(args.script, args.workspace_budget)
    if args.program not in eng.programs:
        print(f"unknown program {args.program!r}", file=sys.stderr)
        return 2
    ws = eng.workspace()
    rho = _initial_state(eng, args)
    out, diag = apply_denot(eng.programs[args.program], rho, ws)
    if diag.while_nonconvergence:
        print("# warning: while-loop iteration cutoff reached", flush=True)
    names = [d.name for d in ws.classical]
    for mem in out.sorted_memories():
        mat = out.branches[mem]
        assign = ", ".join(f"{n}={v!r}" for n, v in zip(names, mem)) or "(no classical variables)"
        print(f"branch {assign}: trace {float(np.real(np.trace(mat)))!r}")
        for row in mat:
            print(
                "  "
                + "  ".join(
                    f"{float(c.real)!r}{'+' if c.imag >= 0 else '-'}{abs(float(c.imag))!r}j" for c in row
                )
            )
    return 0


def cmd_equivcheck(args) -> int:
    eng = _load_engine(args.script, args.workspace_budget)
    ws = eng.workspace()
    for name in (args.left, args.right):
        if name not in eng.programs:
            print(f"unknown program {name!r}", file=sys.stderr)
            return 2
    res = deneq_check(eng.programs[args.left], eng.programs[args.right], ws, tol=args.tol)
    if res.nonconvergent:
        print("# warning: while-loop iteration cutoff reached; comparison is on the converged part")
    if res.equal:
        print(f"equal: denotations agree on the spanning family (tol {args.tol:g})")
        return 0
    mem, jj, kk, diff = res.counterexample
    print(f"counterexample: input memory {mem}, matrix unit ({jj},{kk}), deviation {diff:.3e}")
    return 1


def cmd_transform(args) -> int:
    eng = _load_engine(args.script, args.workspace_budget)
    if args.program not in eng.programs:
        print(f"unknown program {args.program!r}", file=sys.stderr)
        return 2
    ws = eng.workspace()
    prog = eng.programs[args.program]
    with open(args.laws, "r", encoding="utf-8") as f:
        steps = [ln.strip() for ln in f if ln.strip() and not ln.strip().startswith("#")]
    for ln, step in enumerate(steps, 1):
        before = prog
        try:
            prog = _apply_law_line(ws, prog, step)
        except (RW.LawError, RW.PathError, ValueError, KeyError) as e:
            print(f"step {ln}: {step}\n  rejected: {e}", file=sys.stderr)
            return 1
        res = deneq_check(before, prog, ws, tol=args.tol)
        status = "equal" if res.equal else f"NOT EQUAL ({res.counterexample})"
        print(f"step {ln}: {step}\n  -> {A.print_program_line(prog)}\n  equivalence check: {status}")
        if not res.equal:
            return 1
    print("result: " + A.print_program_line(prog))
    return 0


def _parse_path(spec: str) -> tuple:
    if not spec or spec == "/":
        return ()
    out = []
    for part in spec.strip("/").split("/"):
        if part.startswith("stmt:"):
            out.append(("stmt", int(part.split(":")[1])))
        elif part in ("then", "else", "body", "local"):
            out.append(part)
        else:
            raise ValueError(f"bad path component {part!r}")
    return tuple(out)


def _apply_law_line(ws, prog, line: str):
    toks = line.split()
    law = toks[0]
    kw = {}
    i = 1
    path = ()
    while i < len(toks):
        if toks[i] == "at":
            path = _parse_path(toks[i + 1])
            i += 2
        elif toks[i] == "index":
            kw["index"] = int(toks[i + 1])
            i += 2
        elif toks[i] == "vars":
            kw["init_vars"] = [ws.var(n) for n in toks[i + 1].split(",")]
            i += 2
        elif toks[i] == "map":
            from .analysis import Substitution

            pairs = dict(p.split("->") for p in toks[i + 1].split(","))
            kw["sigma"] = Substitution({ws.var(a): ws.var(b) for a, b in pairs.items()})
            i += 2
        elif toks[i] == "greedy":
            kw.update(RW.greedy_args(law, prog, path))
            i += 1
        else:
            raise ValueError(f"bad law argument {toks[i]!r}")
    if law == "local_up_everywhere":
        return RW.local_up_everywhere(prog)
    return RW.rewrite(law, prog, path, **kw)


def cmd_predeval(args) -> int:
    eng = _load_engine(args.script, args.workspace_budget)
    res = eng.execute("predeval { " + args.pred + " }")
    print(res.text)
    return 0 if res.kind != "error" else 1


def cmd_falsify(args) -> int:
    with open(args.script, "r", encoding="utf-8") as f:
        text = f.read()
    eng = Engine(budget=args.workspace_budget)
    for res in eng.run_text(text):
        if res.kind == "error":
            print(res.text, file=sys.stderr)
            return 2
    if eng.sess is None or eng.sess.lemma_name is None or not eng.sess.goals:
        print("the script must end with a stated (unproved) qrhl judgment", file=sys.stderr)
        return 2
    goal = eng.sess.goals[0]
    if not isinstance(goal, QrhlGoal):
        print("the open goal is not a relational judgment", file=sys.stderr)
        return 2
    from .falsifier import ppt_falsify

    report = ppt_falsify(goal.j, eng.workspace())
    print(f"verdict: {report.verdict}")
    print(f"iterations: {report.iterations}")
    for k in sorted(report.residuals):
        print(f"residual {k}: {report.residuals[k]:.3e}")
    for d in report.details:
        print(d)
    return 0 if report.verdict != "refuted" else 1


def cmd_examples(args) -> int:
    from .kernel.examples import derive_paper_examples

    eng = derive_paper_examples()
    sys.stdout.write(eng.certificate_text())
    return 0


def cmd_repl(args, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    eng = Engine(budget=args.workspace_budget)
    buf = ""
    if stdin.isatty() if hasattr(stdin, "isatty") else False:
        stdout.write("qrhlkit repl; commands end with '.'; Ctrl-D exits\n")
    for line in stdin:
        buf += line
        try:
            commands = split_commands(buf)
        except ScriptError:
            continue  # incomplete command; keep reading
        except ParseError as e:
            stdout.write(f"error: {e}\n")
            buf = ""
            continue
        buf = ""
        for cmd in commands:
            res = eng.execute(cmd)
            stdout.write(f"[{res.kind}] {res.text}\n")
        stdout.flush()
    if args.cert:
        with open(args.cert, "w", encoding="utf-8") as f:
            f.write(eng.certificate_text())
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    app = create_app(budget=args.workspace_budget)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_client(args) -> int:
    """Thin HTTP client: replays a script through a running server."""
    import urllib.request

    base = f"http://{args.host}:{args.port}"

    def post(path, body):
        req = urllib.request.Request(
            base + path, data=json.dumps(body).encode(), headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read())

    sid = post("/sessions", {})["session_id"]
    with open(args.script, "r", encoding="utf-8") as f:
        text = f.read()
    failed = False
    for cmd in split_commands(text):
        out = post(f"/sessions/{sid}/message", {"kind": "tactic", "payload": {"command": cmd}})
        print(f"[{out['kind']}] {out['payload'].get('text', '')}")
        if out["kind"] == "error":
            failed = True
    cert = post(f"/sessions/{sid}/message", {"kind": "state", "payload": {}})
    if args.cert:
        with open(args.cert, "w", encoding="utf-8") as f:
            f.write(cert["payload"]["certificate"])
    return 1 if failed else 0


def main(argv: Optional[list] = None) -> int:
    ap = argparse.ArgumentParser(prog="qrhlkit", description="relational proof checker for quantum while-programs")
    ap.add_argument(
        "--workspace-budget",
        type=int,
        default=_env("WORKSPACE_BUDGET", 4096),
        help="max quantum amplitudes / classical memories per workspace",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check a proof script in batch mode")
    p.add_argument("script")
    p.add_argument("--allow-admit", action="store_true", default=_env("ALLOW_ADMIT", False))
    p.add_argument("--cert", help="certificate output path (default: <script>.cert)")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("analyze", help="print variable-set reports for defined programs")
    p.add_argument("script")
    p.add_argument("--program")
    p.add_argument("--json", help="also write machine-readable records to this path")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("simulate", help="run a program on an initial state and dump the final cq-operator")
    p.add_argument("script")
    p.add_argument("--program", required=True)
    p.add_argument("--state", help="initial state file (name = value lines, optional amplitudes line)")
    p.add_argument("--set", action="append", help="classical assignment name=value", default=[])
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("equivcheck", help="check two programs for denotational equivalence")
    p.add_argument("script")
    p.add_argument("--left", required=True)
    p.add_argument("--right", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(fn=cmd_equivcheck)

    p = sub.add_parser("transform", help="apply a law script to a program, checking each step")
    p.add_argument("script")
    p.add_argument("--program", required=True)
    p.add_argument("--laws", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(fn=cmd_transform)

    p = sub.add_parser("predeval", help="evaluate a predicate's dimensions over the doubled workspace")
    p.add_argument("script")
    p.add_argument("--pred", required=True)
    p.set_defaults(fn=cmd_predeval)

    p = sub.add_parser("falsify", help="attempt to refute the script's final (unproved) judgment")
    p.add_argument("script")
    p.set_defaults(fn=cmd_falsify)

    p = sub.add_parser("examples", help="replay the built-in reference derivations")
    p.set_defaults(fn=cmd_examples)

    p = sub.add_parser("repl", help="interactive session on stdin/stdout")
    p.add_argument("--cert", help="write the certificate here on exit")
    p.set_defaults(fn=cmd_repl)

    p = sub.add_parser("serve", help="run the HTTP session server (workbench backend)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=_env("PORT", 8723))
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("client", help="replay a script against a running server")
    p.add_argument("script")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=_env("PORT", 8723))
    p.add_argument("--cert")
    p.set_defaults(fn=cmd_client)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ScriptError, ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
