"""Concrete syntax: tokenizer and parsers for programs, expressions, predicates.

The grammar is documented in docs/grammar.md.  Parsing is bidirectional-lite:
literals such as `1`, `ket(0)` or `H` take their type from the statement or
call position they occur in (e.g. the assignment target), so plain programs
stay free of type annotations.

Identifiers must not end in a digit; names like `x1`, `q2` therefore
unambiguously denote indexed variables and are only legal inside predicates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import ast as A
from . import expr as ex
from . import predicates as P
from .expr import TAtom, TBOOL, TDist, TMeas, TOp, TTuple, TVec
from .types import BIT, BOOL, FiniteType, VarDecl
from .workspace import Workspace


class ParseError(Exception):
    def __init__(self, msg: str, pos: Optional[int] = None, text: Optional[str] = None):
        self.msg = msg
        self.pos = pos
        if pos is not None and text is not None:
            line = text.count("\n", 0, pos) + 1
            col = pos - (text.rfind("\n", 0, pos) + 1) + 1
            msg = f"{msg} (line {line}, column {col})"
        super().__init__(msg)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)
  | (?P<str>'[^']*')
  | (?P<op><-|<\$|<q|<m|==|!=|&&|\|\||<=|>=|->|:=|/\\|[-+*/%?:;,.(){}\[\]@!=<>~|])
  | (?P<id>[A-Za-z_][A-Za-z_0-9]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'str' | 'op' | 'id' | 'eof'
    text: str
    pos: int


def tokenize(text: str) -> list:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        out.append(Token(kind, m.group(), m.start()))
    out.append(Token("eof", "", len(text)))
    return out


class TokenStream:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text and self.peek().kind in ("op", "id")

    def at_kind(self, kind: str) -> bool:
        return self.peek().kind == kind

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.pos, self.text)
        return self.next()

    def expect_ident(self) -> str:
        t = self.peek()
        if t.kind != "id":
            raise ParseError(f"expected an identifier, found {t.text!r}", t.pos, self.text)
        return self.next().text

    def error(self, msg: str):
        raise ParseError(msg, self.peek().pos, self.text)


# ---------------------------------------------------------------------------
# Raw (untyped) expression trees; resolved against expected types afterwards.


@dataclass
class Raw:
    pos: int


@dataclass
class RInt(Raw):
    v: int


@dataclass
class RNum(Raw):
    v: float


@dataclass
class RBool(Raw):
    v: bool


@dataclass
class RStr(Raw):
    v: str


@dataclass
class RIdent(Raw):
    name: str


@dataclass
class RTuple(Raw):
    items: list


@dataclass
class REq(Raw):
    a: Raw
    b: Raw
    neq: bool


@dataclass
class RNot(Raw):
    a: Raw


@dataclass
class RBin(Raw):
    op: str  # '&&' | '||'
    a: Raw
    b: Raw


@dataclass
class RArith(Raw):
    op: str
    a: Raw
    b: Raw
    mod: int


@dataclass
class RCond(Raw):
    c: Raw
    t: Raw
    e: Raw


@dataclass
class RCall(Raw):
    name: str
    args: list  # raw expressions or special payloads


@dataclass
class RVecLit(Raw):
    entries: list  # complex


@dataclass
class ROpLit(Raw):
    rows: list  # list of list of complex


@dataclass
class RDistLit(Raw):
    pairs: list  # (raw value, Fraction)


class Ambiguous(Exception):
    """A literal whose type cannot be inferred without an expectation."""


KEYWORDS = {
    "skip", "local", "if", "else", "while", "on", "apply", "with", "true", "false",
    "call", "top", "bot", "CL", "orth", "qeq", "instate", "lift", "img", "imgadj",
    "spaceat", "eqvars", "id",
}

_NAMED_OPS = {
    "H": (2, np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)),
    "X": (2, np.array([[0, 1], [1, 0]], dtype=complex)),
    "Y": (2, np.array([[0, -1j], [1j, 0]], dtype=complex)),
    "Z": (2, np.array([[1, 0], [0, -1]], dtype=complex)),
    "S": (2, np.array([[1, 0], [0, 1j]], dtype=complex)),
    "CNOT": (4, np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)),
    "CZ": (4, np.diag([1, 1, 1, -1]).astype(complex)),
    "SWAPOP": (4, np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)),
}


class ExprParser:
    """Parses a raw tree, then resolves it against the workspace and an expected type."""

    def __init__(self, ts: TokenStream, ws: Workspace, allow_indexed: bool):
        self.ts = ts
        self.ws = ws
        self.allow_indexed = allow_indexed

    # -- raw parsing ---------------------------------------------------------

    def parse_raw(self) -> Raw:
        return self._cond()

    def _cond(self) -> Raw:
        pos = self.ts.peek().pos
        c = self._or()
        if self.ts.accept("?"):
            t = self._cond()
            self.ts.expect(":")
            e = self._cond()
            return RCond(pos, c, t, e)
        return c

    def _or(self) -> Raw:
        a = self._and()
        while self.ts.at("||"):
            pos = self.ts.next().pos
            a = RBin(pos, "||", a, self._and())
        return a

    def _and(self) -> Raw:
        a = self._not()
        while self.ts.at("&&"):
            pos = self.ts.next().pos
            a = RBin(pos, "&&", a, self._not())
        return a

    def _not(self) -> Raw:
        if self.ts.at("!"):
            pos = self.ts.next().pos
            return RNot(pos, self._not())
        return self._cmp()

    def _cmp(self) -> Raw:
        a = self._arith()
        if self.ts.at("==") or self.ts.at("!="):
            neq = self.ts.next().text == "!="
            b = self._arith()
            return REq(a.pos, a, b, neq)
        return a

    def _arith(self) -> Raw:
        a = self._primary()
        if self.ts.peek().text in ("+", "-", "*") and self.ts.peek().kind == "op":
            op = self.ts.next().text
            b = self._primary()
            self.ts.expect("%")
            t = self.ts.peek()
            if t.kind != "num" or "." in t.text:
                self.ts.error("modulus must be an integer literal")
            mod = int(self.ts.next().text)
            return RArith(a.pos, op, a, b, mod)
        return a

    def _primary(self) -> Raw:
        t = self.ts.peek()
        if t.kind == "num":
            self.ts.next()
            if "." in t.text or "e" in t.text or "E" in t.text:
                return RNum(t.pos, float(t.text))
            return RInt(t.pos, int(t.text))
        if t.kind == "str":
            self.ts.next()
            return RStr(t.pos, t.text[1:-1])
        if self.ts.accept("("):
            items = [self.parse_raw()]
            while self.ts.accept(","):
                items.append(self.parse_raw())
            self.ts.expect(")")
            if len(items) == 1:
                return items[0]
            return RTuple(t.pos, items)
        if t.kind == "id":
            name = self.ts.next().text
            if name == "true":
                return RBool(t.pos, True)
            if name == "false":
                return RBool(t.pos, False)
            if name == "vec" and self.ts.at("["):
                return self._vec_lit(t.pos)
            if name == "op" and self.ts.at("["):
                return self._op_lit(t.pos)
            if name == "dist" and self.ts.at("{"):
                return self._dist_lit(t.pos)
            if self.ts.at("("):
                self.ts.next()
                args: list = []
                if not self.ts.at(")"):
                    args.append(self.parse_raw())
                    while self.ts.accept(","):
                        args.append(self.parse_raw())
                self.ts.expect(")")
                return RCall(t.pos, name, args)
            return RIdent(t.pos, name)
        self.ts.error(f"unexpected token {t.text!r} in expression")

    def _cnum(self) -> complex:
        sign = -1.0 if self.ts.accept("-") else 1.0
        t = self.ts.peek()
        if t.kind != "num":
            self.ts.error("expected a number")
        self.ts.next()
        val = float(t.text)
        if self.ts.accept("i"):
            out = complex(0, sign * val)
        else:
            out = complex(sign * val, 0)
        while self.ts.peek().text in ("+", "-") and self.ts.peek(1).kind == "num":
            s2 = -1.0 if self.ts.next().text == "-" else 1.0
            t2 = self.ts.next()
            v2 = float(t2.text)
            if self.ts.accept("i"):
                out += complex(0, s2 * v2)
            else:
                out += complex(s2 * v2, 0)
        return out

    def _vec_lit(self, pos: int) -> Raw:
        self.ts.expect("[")
        entries = [self._cnum()]
        while self.ts.accept(","):
            entries.append(self._cnum())
        self.ts.expect("]")
        return RVecLit(pos, entries)

    def _op_lit(self, pos: int) -> Raw:
        self.ts.expect("[")
        rows = [[self._cnum()]]
        while True:
            if self.ts.accept(","):
                rows[-1].append(self._cnum())
            elif self.ts.accept(";"):
                rows.append([self._cnum()])
            else:
                break
        self.ts.expect("]")
        return ROpLit(pos, rows)

    def _dist_lit(self, pos: int) -> Raw:
        self.ts.expect("{")
        pairs = []
        while True:
            v = self.parse_raw()
            self.ts.expect(":")
            num = self.ts.next()
            if num.kind != "num":
                self.ts.error("distribution weight must be a number")
            if self.ts.accept("/"):
                den = self.ts.next()
                w = Fraction(int(num.text), int(den.text))
            else:
                w = Fraction(num.text) if "." not in num.text else Fraction(num.text).limit_denominator(10**9)
            pairs.append((v, w))
            if not self.ts.accept(","):
                break
        self.ts.expect("}")
        return RDistLit(pos, pairs)

    # -- resolution ----------------------------------------------------------

    def resolve(self, raw: Raw, expected) -> ex.Expr:
        try:
            return self._res(raw, expected)
        except Ambiguous:
            raise ParseError("cannot infer the type of this literal from context", raw.pos, self.ts.text) from None
        except ex.TypeError_ as e:
            raise ParseError(str(e), raw.pos, self.ts.text) from None

    def _res(self, raw: Raw, expected) -> ex.Expr:
        if isinstance(raw, RBool):
            e = ex.Const(TBOOL, raw.v)
            return self._chk(e, expected, raw)
        if isinstance(raw, RInt):
            return self._res_atom(raw.v, expected, raw)
        if isinstance(raw, RStr):
            return self._res_atom(raw.v, expected, raw)
        if isinstance(raw, RNum):
            raise ParseError("a bare float is not a value of any finite type", raw.pos, self.ts.text)
        if isinstance(raw, RIdent):
            return self._res_ident(raw, expected)
        if isinstance(raw, RTuple):
            if isinstance(expected, TTuple):
                if len(expected.items) != len(raw.items):
                    raise ParseError("tuple arity mismatch", raw.pos, self.ts.text)
                items = [self._res(r, t) for r, t in zip(raw.items, expected.items)]
            else:
                items = [self._res(r, None) for r in raw.items]
            return self._chk(ex.tuple_(items), expected, raw)
        if isinstance(raw, REq):
            a, b = self._res_pair(raw.a, raw.b)
            e = ex.eq(a, b)
            if raw.neq:
                e = ex.not_(e)
            return self._chk(e, expected, raw)
        if isinstance(raw, RNot):
            return self._chk(ex.not_(self._res(raw.a, TBOOL)), expected, raw)
        if isinstance(raw, RBin):
            a, b = self._res(raw.a, TBOOL), self._res(raw.b, TBOOL)
            e = ex.and_(a, b) if raw.op == "&&" else ex.or_(a, b)
            return self._chk(e, expected, raw)
        if isinstance(raw, RArith):
            want = expected if isinstance(expected, TAtom) else None
            try:
                a = self._res(raw.a, want)
            except Ambiguous:
                b = self._res(raw.b, want)
                a = self._res(raw.a, b.ty)
                return self._chk(ex.arith(raw.op, a, b, raw.mod), expected, raw)
            b = self._res(raw.b, a.ty)
            return self._chk(ex.arith(raw.op, a, b, raw.mod), expected, raw)
        if isinstance(raw, RCond):
            c = self._res(raw.c, TBOOL)
            try:
                t = self._res(raw.t, expected)
            except Ambiguous:
                e2 = self._res(raw.e, expected)
                t = self._res(raw.t, e2.ty)
                return self._chk(ex.cond(c, t, e2), expected, raw)
            e2 = self._res(raw.e, t.ty)
            return self._chk(ex.cond(c, t, e2), expected, raw)
        if isinstance(raw, RVecLit):
            if not isinstance(expected, TVec):
                raise Ambiguous()
            return ex.vec_lit(raw.entries, expected.qtypes)
        if isinstance(raw, ROpLit):
            if not isinstance(expected, TOp):
                raise Ambiguous()
            return ex.op_lit(np.array(raw.rows, dtype=complex), expected.qtypes)
        if isinstance(raw, RDistLit):
            if not isinstance(expected, TDist):
                raise Ambiguous()
            pairs = [(self._value_of(r, expected.carrier), w) for r, w in raw.pairs]
            return ex.dist_lit(pairs, expected.carrier)
        if isinstance(raw, RCall):
            return self._res_call(raw, expected)
        raise AssertionError(type(raw))

    def _res_pair(self, ra: Raw, rb: Raw):
        try:
            a = self._res(ra, None)
        except Ambiguous:
            b = self._res(rb, None)
            return self._res(ra, b.ty), b
        return a, self._res(rb, a.ty)

    def _res_atom(self, v, expected, raw: Raw) -> ex.Expr:
        if expected is None:
            raise Ambiguous()
        if not isinstance(expected, TAtom):
            raise ParseError(f"literal {v!r} cannot have type {expected}", raw.pos, self.ts.text)
        try:
            return ex.const(v, expected.ft)
        except ValueError:
            raise ParseError(f"{v!r} is not a value of type {expected.ft.name}", raw.pos, self.ts.text) from None

    def _value_of(self, raw: Raw, ty):
        e = self._res(raw, ty)
        if isinstance(e, ex.Const):
            return e.value
        if isinstance(e, ex.TupleE) and all(isinstance(i, ex.Const) for i in e.items):
            return tuple(i.value for i in e.items)
        raise ParseError("expected a literal value", raw.pos, self.ts.text)

    def _res_ident(self, raw: RIdent, expected) -> ex.Expr:
        name, idx = raw.name, 0
        if not self.ws.has(name) and name[-1] in "12" and self.ws.has(name[:-1]):
            name, idx = name[:-1], int(raw.name[-1])
        if idx and not self.allow_indexed:
            raise ParseError(f"indexed variable {raw.name} is only allowed in predicates", raw.pos, self.ts.text)
        if self.ws.has(name):
            d = self.ws.var(name)
            if not d.is_classical:
                raise ParseError(f"quantum variable {name} cannot occur in an expression", raw.pos, self.ts.text)
            return self._chk(ex.var(d, idx), expected, raw)
        if raw.name in _NAMED_OPS:
            dim, mat = _NAMED_OPS[raw.name]
            if not isinstance(expected, TOp) or expected.dim != dim:
                raise Ambiguous()
            return ex.op_lit(mat, expected.qtypes, raw.name)
        raise ParseError(f"undeclared variable {raw.name!r}", raw.pos, self.ts.text)

    def _res_call(self, raw: RCall, expected) -> ex.Expr:
        name, args = raw.name, raw.args
        if name == "ket":
            if not isinstance(expected, TVec):
                raise Ambiguous()
            if len(args) != len(expected.qtypes):
                raise ParseError("ket arity does not match the register tuple", raw.pos, self.ts.text)
            vals = [self._value_of(a, TAtom(t)) for a, t in zip(args, expected.qtypes)]
            return ex.ket(vals, expected.qtypes)
        if name == "uniform":
            if len(args) != 1 or not isinstance(args[0], RIdent):
                raise ParseError("uniform(<type>) expects a type name", raw.pos, self.ts.text)
            ft = self._lookup_type(args[0])
            e = ex.uniform(ft)
            return self._chk(e, expected, raw)
        if name == "point":
            if not isinstance(expected, TDist):
                raise Ambiguous()
            if len(args) != 1:
                raise ParseError("point(<value>) expects one value", raw.pos, self.ts.text)
            return ex.point_dist(self._value_of(args[0], expected.carrier), expected.carrier)
        if name == "compmeas":
            if not isinstance(expected, TMeas):
                raise Ambiguous()
            for a, t in zip(args, expected.qtypes):
                if not isinstance(a, RIdent) or a.name != t.name:
                    raise ParseError("compmeas type arguments do not match the measured registers", raw.pos, self.ts.text)
            e = ex.comp_meas(expected.qtypes)
            if e.ty.outcome != expected.outcome:
                raise ParseError("compmeas outcomes do not match the target variables", raw.pos, self.ts.text)
            return ex.Const(expected, e.value, e.text)
        if name == "I":
            if not isinstance(expected, TOp):
                raise Ambiguous()
            return ex.op_lit(np.eye(expected.dim, dtype=complex), expected.qtypes, "I()")
        if name == "proj":
            if len(args) != 2 or not isinstance(args[1], RInt):
                raise ParseError("proj(<tuple>, <index>) expected", raw.pos, self.ts.text)
            t = self._res(args[0], None)
            return self._chk(ex.proj(t, args[1].v), expected, raw)
        if name == "total":
            return self._chk(ex.total(self._res(args[0], None)), expected, raw)
        if name == "insupp":
            d = self._res(args[0], None)
            if not isinstance(d.ty, TDist):
                raise ParseError("insupp needs a distribution", raw.pos, self.ts.text)
            return self._chk(ex.insupp(d, self._res(args[1], d.ty.carrier)), expected, raw)
        if name == "marginal":
            if len(args) != 2 or not isinstance(args[1], RInt):
                raise ParseError("marginal(<dist>, <index>) expected", raw.pos, self.ts.text)
            return self._chk(ex.marginal(self._res(args[0], None), args[1].v), expected, raw)
        if name == "measapp":
            m = self._res(args[0], None)
            if not isinstance(m.ty, TMeas):
                raise ParseError("measapp needs a measurement", raw.pos, self.ts.text)
            return self._chk(ex.measapp(m, self._res(args[1], m.ty.outcome)), expected, raw)
        if name == "totalmeas":
            return self._chk(ex.totalmeas(self._res(args[0], None)), expected, raw)
        raise ParseError(f"unknown function {name!r}", raw.pos, self.ts.text)

    def _lookup_type(self, ident: RIdent) -> FiniteType:
        types = getattr(self.ws, "_named_types", {})
        if ident.name in types:
            return types[ident.name]
        if ident.name == "bit":
            return BIT
        if ident.name == "bool":
            return BOOL
        for d in self.ws.decls:
            if d.ty.name == ident.name:
                return d.ty
        raise ParseError(f"unknown type {ident.name!r}", ident.pos, self.ts.text)

    def _chk(self, e: ex.Expr, expected, raw: Raw) -> ex.Expr:
        if expected is not None and e.ty != expected:
            raise ParseError(f"expected type {expected}, found {e.ty}", raw.pos, self.ts.text)
        return e


# ---------------------------------------------------------------------------
# Program parser


class ProgramParser:
    def __init__(self, ts: TokenStream, ws: Workspace):
        self.ts = ts
        self.ws = ws
        self.ep = ExprParser(ts, ws, allow_indexed=False)

    def parse_expr(self, expected) -> ex.Expr:
        raw = self.ep.parse_raw()
        return self.ep.resolve(raw, expected)

    def parse_block(self, stop: str) -> A.Program:
        """Statement sequence until the stop token (consumed by the caller)."""
        stmts: list = []
        while not self.ts.at(stop) and not self.ts.at_kind("eof"):
            st = self.parse_stmt(stop)
            if st is not None:
                stmts.append(st)
            if not self.ts.accept(";"):
                break
        return A.seq(stmts)

    def parse_stmt(self, stop: str) -> Optional[A.Program]:
        ts = self.ts
        if ts.accept("skip"):
            return A.Skip()
        if ts.accept("{"):
            inner = self.parse_block("}")
            ts.expect("}")
            return inner
        if ts.accept("local"):
            vs = [self._var()]
            while ts.accept(","):
                vs.append(self._var())
            ts.expect(";")
            body = self.parse_block(stop)
            return A.local(vs, body)
        if ts.accept("if"):
            e = self.parse_expr(TBOOL)
            ts.expect("{")
            then = self.parse_block("}")
            ts.expect("}")
            ts.expect("else")
            ts.expect("{")
            other = self.parse_block("}")
            ts.expect("}")
            return A.If(e, then, other)
        if ts.accept("while"):
            e = self.parse_expr(TBOOL)
            ts.expect("{")
            body = self.parse_block("}")
            ts.expect("}")
            return A.While(e, body)
        if ts.accept("on"):
            qs = self._varlist(quantum=True)
            ts.expect("apply")
            e = self.parse_expr(TOp(tuple(q.ty for q in qs)))
            return A.QApply(e, tuple(qs))
        if ts.accept("@"):
            t = ts.peek()
            if t.kind != "num":
                ts.error("hole index expected after @")
            ts.next()
            return A.Hole(int(t.text))
        # assignment-like statements start with a variable list
        xs = self._varlist(quantum=None)
        if ts.accept("<-"):
            self._need_classical(xs)
            return A.Assign(tuple(xs), self.parse_expr(ex.type_of_vars(xs)))
        if ts.accept("<$"):
            self._need_classical(xs)
            return A.Sample(tuple(xs), self.parse_expr(TDist(ex.type_of_vars(xs))))
        if ts.accept("<q"):
            self._need_quantum(xs)
            return A.QInit(tuple(xs), self.parse_expr(TVec(tuple(q.ty for q in xs))))
        if ts.accept("<m"):
            self._need_classical(xs)
            qs = self._varlist(quantum=True)
            ts.expect("with")
            e = self.parse_expr(TMeas(ex.type_of_vars(xs), tuple(q.ty for q in qs)))
            return A.Measure(tuple(xs), tuple(qs), e)
        ts.error("expected a statement")

    def _var(self) -> VarDecl:
        t = self.ts.peek()
        name = self.ts.expect_ident()
        if not self.ws.has(name):
            raise ParseError(f"undeclared variable {name!r}", t.pos, self.ts.text)
        return self.ws.var(name)

    def _varlist(self, quantum: Optional[bool]) -> list:
        vs = [self._var()]
        while self.ts.accept(","):
            vs.append(self._var())
        if quantum is True:
            self._need_quantum(vs)
        elif quantum is False:
            self._need_classical(vs)
        return vs

    def _need_classical(self, vs):
        for v in vs:
            if not v.is_classical:
                self.ts.error(f"{v.name} must be classical here")

    def _need_quantum(self, vs):
        for v in vs:
            if not v.is_quantum:
                self.ts.error(f"{v.name} must be quantum here")


def parse_program(text: str, ws: Workspace) -> A.Program:
    """Parse a complete program/context; raises ParseError on junk or type errors."""
    ts = TokenStream(text)
    pp = ProgramParser(ts, ws)
    prog = pp.parse_block("\0")
    if not ts.at_kind("eof"):
        ts.error("trailing input after program")
    violations = A.check_well_typed(prog)
    if violations:
        raise ParseError("; ".join(str(v) for v in violations))
    return prog


# ---------------------------------------------------------------------------
# Predicate parser


class PredParser:
    def __init__(self, ts: TokenStream, ws: Workspace, single: bool = False):
        """single=True parses one-sided predicates: registers are unindexed."""
        self.ts = ts
        self.ws = ws
        self.single = single
        self.ep = ExprParser(ts, ws, allow_indexed=not single)

    def parse(self) -> P.PredExpr:
        items = [self._inter()]
        while self.ts.accept("+"):
            items.append(self._inter())
        return P.psum(items) if len(items) > 1 else items[0]

    def _inter(self) -> P.PredExpr:
        items = [self._atom()]
        while self.ts.accept("/\\"):
            items.append(self._atom())
        return P.inter(items) if len(items) > 1 else items[0]

    def _atom(self) -> P.PredExpr:
        ts = self.ts
        if ts.accept("top"):
            return P.PTop()
        if ts.accept("bot"):
            return P.PBottom()
        if ts.accept("("):
            p = self.parse()
            ts.expect(")")
            return p
        if ts.accept("CL"):
            ts.expect("[")
            raw = self.ep.parse_raw()
            e = self.ep.resolve(raw, TBOOL)
            ts.expect("]")
            return P.PCL(e)
        if ts.accept("orth"):
            ts.expect("(")
            p = self.parse()
            ts.expect(")")
            return P.POrtho(p)
        if ts.accept("qeq"):
            return self._qeq()
        if ts.accept("instate"):
            ts.expect("(")
            qs = self._qvars()
            ts.expect(",")
            psi = self._vec_for(qs)
            ts.expect(")")
            return P.PQEqState(tuple(qs), psi)
        if ts.accept("lift"):
            ts.expect("(")
            mark = ts.i
            qs_probe = self._try_qvars_suffix()
            op = self._op_for(qs_probe)
            ts.expect(")")
            return P.PLift(op, tuple(qs_probe))
        if ts.accept("img") or ts.at("imgadj"):
            adjoint = False
            if ts.accept("imgadj"):
                adjoint = True
            ts.expect("(")
            qs_probe = self._try_qvars_suffix()
            op = self._op_for(qs_probe)
            ts.expect(",")
            p = self.parse()
            ts.expect(")")
            return P.PImage(op, tuple(qs_probe), p, adjoint)
        if ts.accept("spaceat"):
            ts.expect("(")
            p = self.parse()
            ts.expect(",")
            qs = self._try_qvars_suffix()
            psi = self._vec_for(qs)
            j, k = self._pending
            ts.expect(",")
            for _ in range(k - (j + 1)):
                ts.next()
            ts.expect(")")
            return P.PSpaceAt(p, psi, tuple(qs))
        if ts.accept("eqvars"):
            ts.expect("(")
            names = [ts.expect_ident()]
            while ts.accept(","):
                names.append(ts.expect_ident())
            ts.expect(")")
            decls = []
            for n in names:
                if self.ws.aux == n:
                    continue
                decls.append(self.ws.var(n))
            return P.eq_vars(decls)
        ts.error("expected a predicate")

    def _qeq(self) -> P.PredExpr:
        ts = self.ts
        ts.expect("(")
        opA = qsA = None
        opA, qsA = self._qeq_side()
        ts.expect(",")
        opB, qsB = self._qeq_side()
        ts.expect(")")
        return P.quanteq(qsA, qsB, opA, opB)

    def _qeq_side(self):
        """[opexpr ':'] qvar+ ; the operator is resolved on the register type."""
        ts = self.ts
        mark = ts.i
        # Try to parse a plain qvar list first; fall back to "op : qvars".
        try:
            qs = self._qvars()
            if ts.peek().text in (",", ")"):
                return None, qs
        except ParseError:
            pass
        ts.i = mark
        raw = self.ep.parse_raw()
        ts.expect(":")
        qs = self._qvars()
        if isinstance(raw, RIdent) and raw.name == "id":
            return None, qs
        op = self.ep.resolve(raw, TOp(tuple(q.var.ty for q in qs)))
        return op, qs

    def _qvars(self) -> list:
        """One or more space-separated indexed quantum registers."""
        qs = [self._qvar()]
        while True:
            nxt = self._try_qvar()
            if nxt is None:
                return qs
            qs.append(nxt)

    def _try_qvars_suffix(self) -> list:
        """For lift/img: the register list is the argument after the operator.

        We parse the operator lazily: scan ahead to the comma at depth 0, the
        register list follows it.
        """
        ts = self.ts
        depth = 0
        j = ts.i
        while True:
            t = ts.toks[j]
            if t.kind == "eof":
                ts.error("unterminated lift/img")
            if t.text in ("(", "[", "{"):
                depth += 1
            elif t.text in (")", "]", "}"):
                if depth == 0:
                    ts.error("lift/img needs an operator and a register list")
                depth -= 1
            elif t.text == "," and depth == 0:
                break
            j += 1
        k = j + 1
        qs = []
        while ts.toks[k].kind == "id" and self._is_qvar_name(ts.toks[k].text):
            qs.append(self._mk_qvar(ts.toks[k].text, ts.toks[k].pos))
            k += 1
        if not qs:
            ts.error("expected indexed quantum registers")
        self._pending = (j, k)
        return qs

    def _op_for(self, qs) -> ex.Expr:
        raw = self.ep.parse_raw()
        op = self.ep.resolve(raw, TOp(tuple(q.var.ty for q in qs)))
        j, k = self._pending
        self.ts.expect(",")
        for _ in range(k - (j + 1)):
            self.ts.next()  # consume the already-scanned register names
        return op

    def _vec_for(self, qs) -> ex.Expr:
        raw = self.ep.parse_raw()
        return self.ep.resolve(raw, TVec(tuple(q.var.ty for q in qs)))

    def _is_qvar_name(self, name: str) -> bool:
        if self.single:
            return self.ws.has(name) and self.ws.var(name).is_quantum
        return len(name) > 1 and name[-1] in "12" and self.ws.has(name[:-1])

    def _mk_qvar(self, name: str, pos: int) -> P.QVar:
        if self.single:
            base, idx = name, 0
        else:
            base, idx = name[:-1], int(name[-1])
        d = self.ws.var(base)
        if not d.is_quantum:
            raise ParseError(f"{base} is not a quantum variable", pos, self.ts.text)
        return P.QVar(d, idx)

    def _try_qvar(self):
        t = self.ts.peek()
        if t.kind == "id" and self._is_qvar_name(t.text):
            self.ts.next()
            return self._mk_qvar(t.text, t.pos)
        return None

    def _qvar(self) -> P.QVar:
        t = self.ts.peek()
        name = self.ts.expect_ident()
        if not self._is_qvar_name(name):
            raise ParseError(f"expected an indexed quantum register, found {name!r}", t.pos, self.ts.text)
        return self._mk_qvar(name, t.pos)


def parse_pred(text: str, ws: Workspace, single: bool = False) -> P.PredExpr:
    ts = TokenStream(text)
    pp = PredParser(ts, ws, single=single)
    p = pp.parse()
    if not ts.at_kind("eof"):
        ts.error("trailing input after predicate")
    return p


def parse_expr(text: str, ws: Workspace, expected=None, allow_indexed: bool = False) -> ex.Expr:
    ts = TokenStream(text)
    ep = ExprParser(ts, ws, allow_indexed=allow_indexed)
    raw = ep.parse_raw()
    e = ep.resolve(raw, expected)
    if not ts.at_kind("eof"):
        ts.error("trailing input after expression")
    return e
