"""The proof-script engine: declarations, lemmas, tactic commands, undo.

One engine instance is a session.  Commands are '.'-terminated; the engine
is event-sourced: replaying the request log on a fresh engine reconstructs
the same state and the same certificate bytes.  Batch checking, the REPL and
the HTTP service all drive this class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .. import analysis as an
from .. import ast as A
from .. import expr as ex
from .. import predicates as P
from ..expr import TBOOL, TDist, TTuple
from ..parser import ExprParser, ParseError, PredParser, ProgramParser, TokenStream
from ..semantics import CqOperator
from ..types import BIT, BOOL, CLASSICAL, QUANTUM, FiniteType, VarDecl
from ..workspace import Workspace
from .goals import Judgment, ProbGoal, QrhlGoal
from .proof import ProofError, ProofSession
from .rules import RuleError
from . import tactics as T


class ScriptError(Exception):
    pass


@dataclass
class CommandResult:
    kind: str  # state | goals | varsets | predeval | error
    text: str


def split_commands(text: str) -> list:
    """Split source text into '.'-terminated commands (floats are safe)."""
    ts = TokenStream(text)
    out = []
    start = 0
    depth = 0
    for tok in ts.toks:
        if tok.kind == "eof":
            break
        if tok.text in ("(", "[", "{"):
            depth += 1
        elif tok.text in (")", "]", "}"):
            depth -= 1
        elif tok.kind == "op" and tok.text == "." and depth == 0:
            out.append(text[start : tok.pos])
            start = tok.pos + 1
    tail = text[start:].strip()
    if tail:
        raise ScriptError(f"command is not terminated with '.': {tail[:60]!r}")
    return [c for c in (c.strip() for c in out) if c]


class Engine:
    def __init__(self, budget: int = 4096, allow_admit: bool = False):
        self.budget = budget
        self.allow_admit = allow_admit
        self.named_types = {"bit": BIT, "bool": BOOL}
        self.decls: list = []
        self.aux: Optional[str] = None
        self.programs: dict = {}
        self.cert: list = ["qrhlkit certificate v1"]
        self.sess: Optional[ProofSession] = None
        self.lemma_admits: dict = {}
        self.log: list = []  # (request text, response kind, response text)
        self._undo: list = []

    # -- workspace plumbing ---------------------------------------------------

    def workspace(self) -> Workspace:
        ws = Workspace(self.decls, aux=self.aux, budget=self.budget)
        ws._named_types = dict(self.named_types)
        return ws

    def _session(self) -> ProofSession:
        if self.sess is None:
            self.sess = ProofSession(self.workspace())
            self.sess.cert = self.cert
            self.sess.proved = self.lemma_admits
        return self.sess

    def _snapshot(self):
        sess = self.sess
        return (
            list(self.decls),
            self.aux,
            dict(self.named_types),
            dict(self.programs),
            len(self.cert),
            None
            if sess is None
            else (list(sess.goals), sess.lemma_name, sess.admitted, sess.steps),
            dict(self.lemma_admits),
            len(self.log),
        )

    def _restore(self, snap) -> None:
        decls, aux, types, programs, certlen, sess_state, admits, loglen = snap
        self.decls = list(decls)
        self.aux = aux
        self.named_types = dict(types)
        self.programs = dict(programs)
        del self.cert[certlen:]
        self.lemma_admits = dict(admits)
        del self.log[loglen:]
        if sess_state is None:
            self.sess = None
        else:
            self.sess = ProofSession(self.workspace())
            self.sess.cert = self.cert
            self.sess.proved = self.lemma_admits
            self.sess.goals, self.sess.lemma_name, self.sess.admitted, self.sess.steps = (
                list(sess_state[0]),
                sess_state[1],
                sess_state[2],
                sess_state[3],
            )

    # -- command execution ------------------------------------------------------

    def run_text(self, text: str) -> list:
        return [self.execute(cmd) for cmd in split_commands(text)]

    def execute(self, command: str) -> CommandResult:
        is_undo = command.strip() == "undo"
        snap = self._snapshot()
        try:
            result = self._dispatch(command)
        except (ScriptError, ParseError, ProofError, RuleError, ex.TypeError_, ValueError, KeyError) as e:
            self._restore(snap)
            result = CommandResult("error", f"{type(e).__name__}: {e}")
            self.log.append((command, result.kind, result.text))
            return result
        if not is_undo:
            self._undo.append(snap)
        self.log.append((command, result.kind, result.text))
        return result

    def _dispatch(self, command: str) -> CommandResult:
        ts = TokenStream(command)
        head = ts.peek().text
        if head == "undo":
            ts.next()
            return self._cmd_undo()
        if head == "type":
            return self._cmd_type(ts)
        if head == "var":
            return self._cmd_var(ts)
        if head == "program":
            return self._cmd_program(ts)
        if head == "qrhl":
            return self._cmd_qrhl(ts)
        if head == "prob":
            return self._cmd_prob(ts)
        if head == "goals":
            return CommandResult("goals", self._session().goal_listing())
        if head == "varsets":
            ts.next()
            return self._cmd_varsets(ts)
        if head == "predeval":
            ts.next()
            return self._cmd_predeval(ts)
        if head == "qed":
            ts.next()
            name = self._session().qed()
            self.sess = None
            return CommandResult("state", f"lemma {name} proved")
        if head == "admit":
            ts.next()
            sess = self._session()
            sess.admit()
            return CommandResult("state", self._state_text("admitted"))
        if head == "discharge":
            ts.next()
            sess = self._session()
            sess.discharge()
            return CommandResult("state", self._state_text("discharged numerically"))
        return self._cmd_tactic(ts, command)

    def _cmd_undo(self) -> CommandResult:
        if not self._undo:
            raise ScriptError("nothing to undo")
        snap = self._undo.pop()
        self._restore(snap)
        return CommandResult("state", "undone")

    def _state_text(self, what: str) -> str:
        sess = self.sess
        if sess is None or sess.lemma_name is None:
            return what
        return what + "\n" + sess.goal_listing()

    # -- declarations -----------------------------------------------------------

    def _no_open_lemma(self, what: str) -> None:
        if self.sess is not None and self.sess.lemma_name is not None:
            raise ScriptError(f"cannot {what} while a lemma is open")

    def _cmd_type(self, ts: TokenStream) -> CommandResult:
        self._no_open_lemma("declare a type")
        ts.expect("type")
        name = ts.expect_ident()
        ts.expect(":=")
        ts.expect("{")
        values = [self._value_token(ts)]
        while ts.accept(","):
            values.append(self._value_token(ts))
        ts.expect("}")
        if name in self.named_types:
            raise ScriptError(f"type {name} already declared")
        self.named_types[name] = FiniteType(name, tuple(values))
        self.cert.append(f"declare type {name} := {{{', '.join(map(repr, values))}}}")
        return CommandResult("state", f"type {name} declared")

    def _value_token(self, ts: TokenStream):
        t = ts.next()
        if t.kind == "num" and "." not in t.text:
            return int(t.text)
        if t.kind == "str":
            return t.text[1:-1]
        if t.text in ("true", "false"):
            return t.text == "true"
        raise ScriptError(f"bad type value {t.text!r}")

    def _cmd_var(self, ts: TokenStream) -> CommandResult:
        self._no_open_lemma("declare a variable")
        ts.expect("var")
        kind = ts.expect_ident()
        if kind not in (CLASSICAL, QUANTUM):
            raise ScriptError("variable kind must be classical or quantum")
        name = ts.expect_ident()
        ts.expect(":")
        tyname = ts.expect_ident()
        if tyname == "aux_infinite":
            if kind != QUANTUM:
                raise ScriptError("the aux-infinite marker must be quantum")
            if self.aux is not None:
                raise ScriptError("only one aux-infinite variable per workspace")
            self.aux = name
            self.sess = None
            self.cert.append(f"declare var quantum {name} : aux_infinite")
            return CommandResult("state", f"aux-infinite variable {name} declared")
        if tyname not in self.named_types:
            raise ScriptError(f"unknown type {tyname!r}")
        ty = self.named_types[tyname]
        default = 0
        if ts.accept("default"):
            default = ty.index_of(self._value_token(ts))
        decl = VarDecl(name, kind, ty, default)
        if any(d.name == name for d in self.decls) or name == self.aux:
            raise ScriptError(f"variable {name} already declared")
        self.decls.append(decl)
        self.workspace()  # budget check
        self.sess = None
        self.cert.append(f"declare var {kind} {name} : {tyname} default {ty.values[default]!r}")
        return CommandResult("state", f"variable {name} declared")

    def _cmd_program(self, ts: TokenStream) -> CommandResult:
        self._no_open_lemma("define a program")
        ts.expect("program")
        name = ts.expect_ident()
        ts.expect(":=")
        ts.expect("{")
        ws = self.workspace()
        pp = ProgramParser(ts, ws)
        prog = pp.parse_block("}")
        ts.expect("}")
        violations = A.check_well_typed(prog)
        if violations:
            raise ScriptError("; ".join(str(v) for v in violations))
        self.programs[name] = prog
        self.cert.append(f"declare program {name} := {A.print_program_line(prog)}")
        return CommandResult("state", f"program {name} defined")

    def _progref(self, ts: TokenStream, ws: Workspace) -> A.Program:
        if ts.accept("call"):
            name = ts.expect_ident()
            if name not in self.programs:
                raise ScriptError(f"unknown program {name!r}")
            return self.programs[name]
        ts.expect("{")
        pp = ProgramParser(ts, ws)
        prog = pp.parse_block("}")
        ts.expect("}")
        violations = A.check_well_typed(prog)
        if violations:
            raise ScriptError("; ".join(str(v) for v in violations))
        return prog

    def _pred(self, ts: TokenStream, ws: Workspace) -> P.PredExpr:
        ts.expect("{")
        pp = PredParser(ts, ws)
        pred = pp.parse()
        ts.expect("}")
        return pred

    # -- goals --------------------------------------------------------------------

    def _cmd_qrhl(self, ts: TokenStream) -> CommandResult:
        ts.expect("qrhl")
        name = ts.expect_ident()
        ts.expect(":")
        ws = self.workspace()
        pre = self._pred(ts, ws)
        left = self._progref(ts, ws)
        ts.expect("~")
        right = self._progref(ts, ws)
        post = self._pred(ts, ws)
        sess = self._session()
        sess.begin(name, QrhlGoal(Judgment(pre, left, right, post)))
        return CommandResult("state", self._state_text(f"lemma {name} started"))

    def _cmd_prob(self, ts: TokenStream) -> CommandResult:
        ts.expect("prob")
        name = ts.expect_ident()
        ts.expect(":")
        ws = self.workspace()
        e, c = self._prob_side(ts, ws)
        t = ts.next()
        if t.text not in ("<=", "==", ">="):
            raise ScriptError("expected <=, == or >= between the probabilities")
        rel = "=" if t.text == "==" else t.text
        f, d = self._prob_side(ts, ws)
        rho = CqOperator.initial(ws)
        if ts.accept("on"):
            ts.expect("default")
        sess = self._session()
        sess.begin(name, ProbGoal(e, c, rho, f, d, rho, rel))
        return CommandResult("state", self._state_text(f"lemma {name} started"))

    def _prob_side(self, ts: TokenStream, ws: Workspace):
        ts.expect("Pr")
        ts.expect("[")
        ep = ExprParser(ts, ws, allow_indexed=False)
        e = ep.resolve(ep.parse_raw(), TBOOL)
        ts.expect(":")
        prog = self._progref(ts, ws)
        ts.expect("]")
        return e, prog

    # -- inspection -----------------------------------------------------------------

    def _cmd_varsets(self, ts: TokenStream) -> CommandResult:
        ws = self.workspace()
        prog = self._progref(ts, ws)
        rep = an.varsets(prog)
        d = rep.as_dict()
        lines = [f"{k}: " + ("ALL" if d[k] == "ALL" else "{" + ", ".join(d[k]) + "}") for k in ("fv", "inner", "covered", "overwr", "written")]
        return CommandResult("varsets", "\n".join(lines))

    def _cmd_predeval(self, ts: TokenStream) -> CommandResult:
        ws = self.workspace()
        pred = self._pred(ts, ws)
        sess = self._session()
        lines = []
        for mems in sess.ctx.dws.memory_pairs():
            space = P.eval_pred(pred, mems, sess.ctx.dws)
            m1, m2 = mems
            lines.append(f"memories {m1} | {m2}: dim {space.dim} of {space.ambient}")
        return CommandResult("predeval", "\n".join(lines))

    # -- tactics ----------------------------------------------------------------------

    def _names(self, ts: TokenStream) -> list:
        ts.expect("(")
        names = [ts.expect_ident()]
        while ts.accept(","):
            names.append(ts.expect_ident())
        ts.expect(")")
        return names

    def _decls_of(self, names, ws: Workspace, allow_aux: bool = False) -> list:
        out = []
        for n in names:
            if allow_aux and n == self.aux:
                continue
            out.append(ws.var(n))
        return out

    def _cmd_tactic(self, ts: TokenStream, command: str) -> CommandResult:
        sess = self._session()
        if sess.lemma_name is None:
            raise ScriptError(f"no open lemma for tactic {command!r}")
        ws = sess.ws
        head = ts.expect_ident()
        if head == "seq":
            i = int(ts.next().text)
            k = int(ts.next().text)
            ts.expect(":")
            cut = self._pred(ts, ws)
            T.t_seq(sess, i, k, cut)
        elif head == "sym":
            T.t_sym(sess)
        elif head == "skip":
            T.t_skip(sess)
        elif head == "case":
            ts.expect("{")
            ep = ExprParser(ts, ws, allow_indexed=True)
            e = ep.resolve(ep.parse_raw(), None)
            ts.expect("}")
            T.t_case(sess, e)
        elif head == "conseq":
            if ts.accept("qrhl"):
                old = self._names(ts)
                ts.expect("->")
                new = self._names(ts)
                T.t_conseq_qrhl(sess, self._decls_of(old, ws), self._decls_of(new, ws))
            elif ts.accept("pre"):
                ts.expect(":")
                T.t_conseq(sess, pre=self._pred(ts, ws))
            elif ts.accept("post"):
                ts.expect(":")
                T.t_conseq(sess, post=self._pred(ts, ws))
            else:
                raise ScriptError("conseq needs pre:, post: or qrhl")
        elif head == "frame":
            T.t_frame(sess, self._pred(ts, ws))
        elif head in ("assign1", "assign2", "sample1", "sample2", "qinit1", "qinit2", "qapply1", "qapply2", "measure1", "measure2", "if1", "if2", "jointif", "jointwhile", "jointmeasure", "jointqiniteq0"):
            getattr(T, "t_" + head)(sess)
        elif head in ("while1", "while2"):
            bound = None
            if ts.accept("total"):
                bound = self._pred(ts, ws)
            getattr(T, "t_" + head)(sess, total_on=bound)
        elif head == "jointsample":
            witness = self._jointsample_witness(ts, sess)
            T.t_jointsample(sess, witness)
        elif head == "rename":
            side = 1 if ts.expect_ident() == "left" else 2
            ts.expect("(")
            pairs = []
            while True:
                a = ts.expect_ident()
                ts.expect("->")
                b = ts.expect_ident()
                pairs.append((a, b))
                if not ts.accept(","):
                    break
            ts.expect(")")
            T.t_rename(sess, side, pairs)
        elif head == "local":
            sub = ts.expect_ident()
            if sub == "remove":
                side = 1 if ts.expect_ident() == "left" else 2
                include_init = False
                if ts.accept("with"):
                    ts.expect("init")
                    include_init = True
                T.t_local_remove(sess, side, include_init)
            elif sub == "up":
                side = None
                if ts.at("left"):
                    ts.next()
                    side = 1
                elif ts.at("right"):
                    ts.next()
                    side = 2
                T.t_local_up(sess, side)
            else:
                raise ScriptError("local remove / local up expected")
        elif head == "equal":
            vmid = vin = vout = None
            while ts.peek().kind == "id":
                which = ts.expect_ident()
                names = self._names(ts)
                if which == "mid":
                    vmid = self._decls_of(names, ws, allow_aux=True)
                elif which == "in":
                    vin = self._decls_of(names, ws)
                elif which == "out":
                    vout = self._decls_of(names, ws)
                else:
                    raise ScriptError("equal takes mid/in/out variable lists")
            T.t_equal(sess, vmid=vmid, vin=vin, vout=vout)
        elif head == "byqrhl":
            X = Q = None
            assuming = None
            while ts.peek().kind == "id":
                which = ts.expect_ident()
                if which == "vars":
                    names = self._names(ts)
                    decls = self._decls_of(names, ws)
                    X = [d for d in decls if d.is_classical]
                    Q = [d for d in decls if d.is_quantum]
                elif which == "assuming":
                    assuming = self._pred(ts, ws)
                else:
                    raise ScriptError("byqrhl takes vars (...) and assuming {...}")
            T.t_byqrhl(sess, X=X, Q=Q, assuming=assuming)
        else:
            raise ScriptError(f"unknown command or tactic {head!r}")
        if not ts.at_kind("eof"):
            ts.error(f"trailing input after tactic {head}")
        return CommandResult("state", self._state_text(f"tactic {head} applied"))

    def _jointsample_witness(self, ts: TokenStream, sess: ProofSession):
        g = sess.goal(0)
        if not isinstance(g, QrhlGoal):
            raise ScriptError("jointsample needs a relational goal")
        l = A.flatten(g.j.left)
        r = A.flatten(g.j.right)
        if not l or not r or not isinstance(l[-1], A.Sample) or not isinstance(r[-1], A.Sample):
            raise ScriptError("jointsample needs sampling statements on both sides")
        carrier = TTuple((ex.type_of_vars(l[-1].xs), ex.type_of_vars(r[-1].xs)))
        ts.expect("{")
        ep = ExprParser(ts, sess.ws, allow_indexed=True)
        witness = ep.resolve(ep.parse_raw(), TDist(carrier))
        ts.expect("}")
        return witness

    # -- results -------------------------------------------------------------------

    def certificate_text(self) -> str:
        return "\n".join(self.cert) + "\n"

    def summary(self):
        open_lemma = self.sess.lemma_name if self.sess else None
        return {
            "lemmas": dict(self.lemma_admits),
            "open": open_lemma,
            "admitted_total": sum(self.lemma_admits.values()),
        }


def run_script(text: str, budget: int = 4096):
    """Run a full script; returns (engine, results)."""
    eng = Engine(budget=budget)
    results = eng.run_text(text)
    return eng, results
