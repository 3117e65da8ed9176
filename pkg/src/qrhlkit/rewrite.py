"""Side-condition-checked program rewrites for the local/init equivalence laws.

Each law rewrites a statement (or a whole block) addressed by an explicit
path, after validating the side conditions of the underlying denotational
equivalence via the analysis module.  A rewrite never searches: drivers that
apply laws everywhere/until fixpoint sit on top.

Paths: a tuple of steps navigating from the root program.
  ("stmt", i)   i-th statement of the flattened block of the current node
  ("then",) / ("else",) / ("body",) / ("local",)   into the child block
The empty path addresses the whole program (as a block).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import analysis as an
from . import ast as A
from .analysis import Substitution
from .ast import Program
from .semantics import init_program
from .types import VarDecl

LAW_NAMES = (
    "local_idem",
    "local_commute",
    "local_merge_nested",
    "remove_unused_local",
    "add_init_begin",
    "add_init_end",
    "init_overwrite_elim",
    "seq_swap_independent",
    "seq_locals_merge",
    "seq_locals_absorb",
    "rename_full",
    "rename_locals",
    "local_up_block",
    "local_up_if",
    "local_up_while",
)


class LawError(Exception):
    def __init__(self, law: str, condition: str, witness=None):
        self.law = law
        self.condition = condition
        self.witness = witness
        msg = f"{law}: side condition violated: {condition}"
        if witness is not None:
            msg += f" (witness: {witness})"
        super().__init__(msg)


class PathError(Exception):
    pass


# ---------------------------------------------------------------------------
# Path navigation


def get_block(p: Program, path: tuple) -> list:
    """The statement list addressed by a path ending at a block."""
    node = _navigate(p, path)
    return A.flatten(node)


def _navigate(p: Program, path: tuple) -> Program:
    node = p
    for step in path:
        if isinstance(step, tuple) and step[0] == "stmt":
            stmts = A.flatten(node)
            i = step[1]
            if not (0 <= i < len(stmts)):
                raise PathError(f"statement index {i} out of range")
            node = stmts[i]
        elif step == "then":
            if not isinstance(node, A.If):
                raise PathError("'then' step needs an if-statement")
            node = node.then
        elif step == "else":
            if not isinstance(node, A.If):
                raise PathError("'else' step needs an if-statement")
            node = node.other
        elif step == "body":
            if not isinstance(node, A.While):
                raise PathError("'body' step needs a while-statement")
            node = node.body
        elif step == "local":
            if not isinstance(node, A.Local):
                raise PathError("'local' step needs a local-statement")
            node = node.body
        else:
            raise PathError(f"bad path step {step!r}")
    return node


def replace_block(p: Program, path: tuple, new_stmts: Sequence[Program]) -> Program:
    """Replace the block addressed by path with the given statements."""
    if not path:
        return A.seq(list(new_stmts))
    step, rest = path[0], path[1:]
    if isinstance(step, tuple) and step[0] == "stmt":
        stmts = A.flatten(p)
        i = step[1]
        if not (0 <= i < len(stmts)):
            raise PathError(f"statement index {i} out of range")
        if rest:
            stmts[i] = replace_block(stmts[i], rest, new_stmts)
        else:
            stmts[i : i + 1] = list(new_stmts)
        return A.seq(stmts)
    if step == "then":
        return A.If(p.e, replace_block(p.then, rest, new_stmts), p.other)
    if step == "else":
        return A.If(p.e, p.then, replace_block(p.other, rest, new_stmts))
    if step == "body":
        return A.While(p.e, replace_block(p.body, rest, new_stmts))
    if step == "local":
        return A.Local(p.v, replace_block(p.body, rest, new_stmts))
    raise PathError(f"bad path step {step!r}")


def collect_local_chain(p: Program):
    """(vars, body) of the maximal nested local chain; vars may be empty."""
    vs: list = []
    while isinstance(p, A.Local):
        vs.append(p.v)
        p = p.body
    return vs, p


# ---------------------------------------------------------------------------
# The laws


def _names(decls) -> frozenset:
    return frozenset(d.name for d in decls)


def _stmt_at(p: Program, path: tuple, law: str) -> Program:
    try:
        return _navigate(p, path)
    except PathError as e:
        raise LawError(law, f"path does not address a statement: {e}") from None


def law_local_idem(p: Program, path: tuple) -> Program:
    st = _stmt_at(p, path, "local_idem")
    if not (isinstance(st, A.Local) and isinstance(st.body, A.Local) and st.body.v == st.v):
        raise LawError("local_idem", "statement is not local v (local v c)")
    return replace_block(p, path, [A.Local(st.v, st.body.body)])


def law_local_commute(p: Program, path: tuple) -> Program:
    st = _stmt_at(p, path, "local_commute")
    if not (isinstance(st, A.Local) and isinstance(st.body, A.Local)):
        raise LawError("local_commute", "statement is not local v (local w c)")
    return replace_block(p, path, [A.Local(st.body.v, A.Local(st.v, st.body.body))])


def law_local_merge_nested(p: Program, path: tuple) -> Program:
    st = _stmt_at(p, path, "local_merge_nested")
    vs, body = collect_local_chain(st)
    if len(vs) < 2:
        raise LawError("local_merge_nested", "statement is not a nested local chain")
    seen: list = []
    for v in vs:
        if v not in seen:
            seen.append(v)
    return replace_block(p, path, [A.local(seen, body)])


def law_remove_unused_local(p: Program, path: tuple) -> Program:
    st = _stmt_at(p, path, "remove_unused_local")
    if not isinstance(st, A.Local):
        raise LawError("remove_unused_local", "statement is not a local declaration")
    if st.v.name in an.fv(st.body):
        raise LawError("remove_unused_local", "V ∩ fv c = ∅", st.v.name)
    return replace_block(p, path, A.flatten(st.body) or [A.Skip()])


def law_add_init_begin(p: Program, path: tuple, init_vars: Sequence[VarDecl]) -> Program:
    st = _stmt_at(p, path, "add_init_begin")
    vs, body = collect_local_chain(st)
    if not vs:
        raise LawError("add_init_begin", "statement is not a local declaration")
    extra = _names(init_vars) - _names(vs)
    if extra:
        raise LawError("add_init_begin", "V' ⊆ V", sorted(extra))
    new_body = A.seq([init_program(init_vars), body])
    return replace_block(p, path, [A.local(vs, new_body)])


def law_add_init_end(p: Program, path: tuple, init_vars: Sequence[VarDecl]) -> Program:
    st = _stmt_at(p, path, "add_init_end")
    vs, body = collect_local_chain(st)
    if not vs:
        raise LawError("add_init_end", "statement is not a local declaration")
    extra = _names(init_vars) - _names(vs)
    if extra:
        raise LawError("add_init_end", "V' ⊆ V", sorted(extra))
    new_body = A.seq([body, init_program(init_vars)])
    return replace_block(p, path, [A.local(vs, new_body)])


def law_init_overwrite_elim(p: Program, path: tuple, index: int) -> Program:
    stmts = get_block(p, path)
    if not (0 <= index < len(stmts) - 0) or index >= len(stmts):
        raise LawError("init_overwrite_elim", "index out of range")
    st = stmts[index]
    rest = A.seq(stmts[index + 1 :])
    if isinstance(st, A.Assign):
        targets = _names(st.xs)
    elif isinstance(st, A.QInit):
        targets = _names(st.qs)
    else:
        raise LawError("init_overwrite_elim", "statement is not an assignment or quantum initialization")
    ov = an.overwr(rest)
    missing = targets - ov
    if missing:
        raise LawError("init_overwrite_elim", "X ⊆ overwr(rest)", sorted(missing))
    return replace_block(p, path, stmts[:index] + stmts[index + 1 :] or [A.Skip()])


def law_seq_swap_independent(p: Program, path: tuple, index: int) -> Program:
    stmts = get_block(p, path)
    if not (0 <= index < len(stmts) - 1):
        raise LawError("seq_swap_independent", "index out of range")
    a, b = stmts[index], stmts[index + 1]
    shared = an.fv(a) & an.fv(b)
    if shared:
        raise LawError("seq_swap_independent", "fv c ∩ fv d = ∅", sorted(shared))
    out = list(stmts)
    out[index], out[index + 1] = b, a
    return replace_block(p, path, out)


def law_seq_locals_merge(p: Program, path: tuple, index: int) -> Program:
    stmts = get_block(p, path)
    if not (0 <= index < len(stmts) - 1):
        raise LawError("seq_locals_merge", "index out of range")
    vs1, c = collect_local_chain(stmts[index])
    vs2, d = collect_local_chain(stmts[index + 1])
    if not vs1 or _names(vs1) != _names(vs2):
        raise LawError("seq_locals_merge", "adjacent statements are local V c; local V d with equal V")
    merged = A.local(vs1, A.seq([c, init_program(vs1), d]))
    out = stmts[:index] + [merged] + stmts[index + 2 :]
    return replace_block(p, path, out)


def law_seq_locals_absorb(p: Program, path: tuple, index: int) -> Program:
    stmts = get_block(p, path)
    if not (0 <= index < len(stmts) - 1):
        raise LawError("seq_locals_absorb", "index out of range")
    c = stmts[index]
    vs, d = collect_local_chain(stmts[index + 1])
    if not vs:
        raise LawError("seq_locals_absorb", "second statement is not a local declaration")
    shared = _names(vs) & an.fv(c)
    if shared:
        raise LawError("seq_locals_absorb", "V ∩ fv c = ∅", sorted(shared))
    merged = A.local(vs, A.seq([c, d]))
    out = stmts[:index] + [merged] + stmts[index + 2 :]
    return replace_block(p, path, out)


def law_rename_full(p: Program, path: tuple, sigma: Substitution) -> Program:
    st = _stmt_at(p, path, "rename_full")
    dom = sigma.dom_names()
    inv_ok = len({w.name for w in (sigma(v) for v in sigma.dom)}) == len(sigma.dom)
    if not inv_ok:
        raise LawError("rename_full", "σ bijective")
    shared = dom & an.fv(st)
    if shared:
        raise LawError("rename_full", "dom σ ∩ fv c = ∅", sorted(shared))
    try:
        new = an.full_subst_vars(st, sigma)
    except ValueError as e:
        raise LawError("rename_full", str(e)) from None
    return replace_block(p, path, [new])


def law_rename_locals(p: Program, path: tuple, sigma: Substitution) -> Program:
    st = _stmt_at(p, path, "rename_locals")
    vs, body = collect_local_chain(st)
    if not vs:
        raise LawError("rename_locals", "statement is not a local declaration")
    vnames = _names(vs)
    if not sigma.dom_names() <= vnames:
        raise LawError("rename_locals", "σ = id outside V", sorted(sigma.dom_names() - vnames))
    if not sigma.injective_on(vs):
        raise LawError("rename_locals", "σ injective on V")
    wnames = frozenset(sigma(v).name for v in vs)
    clash = (an.fv(body) - vnames) & wnames
    if clash:
        raise LawError("rename_locals", "(fv c \\ V) ∩ W = ∅", sorted(clash))
    ok, witness = an.no_conflict(sigma, body)
    if not ok:
        raise LawError("rename_locals", "no_conflict σ c", str(witness))
    new = A.local([sigma(v) for v in vs], an.subst_vars(body, sigma))
    return replace_block(p, path, [new])


# -- the three local-up laws -------------------------------------------------


def _as_local_stmts(stmts):
    return [collect_local_chain(s) for s in stmts]


def law_local_up_block(
    p: Program,
    path: tuple,
    v_up: Sequence[VarDecl],
    v_down: Sequence[Sequence[VarDecl]],
    v_star: Sequence[Sequence[VarDecl]],
) -> Program:
    stmts = get_block(p, path)
    if not stmts:
        raise LawError("local_up_block", "empty block")
    parts = _as_local_stmts(stmts)
    n = len(parts)
    if len(v_down) != n or len(v_star) != n:
        raise LawError("local_up_block", "per-statement argument lists must match the block length")
    up = _names(v_up)
    whole_fv = an.fv(A.seq(stmts))
    if up & whole_fv:
        raise LawError("local_up_block", "V↑ ∩ fv c = ∅", sorted(up & whole_fv))
    w = set(up)
    for i, (vs_i, c_i) in enumerate(parts):
        vi = _names(vs_i)
        di = _names(v_down[i])
        si = _names(v_star[i])
        if not (vi - di - w <= si):
            raise LawError("local_up_block", f"Vᵢ − Vᵢ↓ − Wᵢ ⊆ Vᵢ* (statement {i})", sorted(vi - di - w - si))
        if not (si <= up):
            raise LawError("local_up_block", f"Vᵢ* ⊆ V↑ (statement {i})", sorted(si - up))
        if not (di <= vi):
            raise LawError("local_up_block", f"Vᵢ↓ ⊆ Vᵢ (statement {i})", sorted(di - vi))
        if not (vi <= di | up):
            raise LawError("local_up_block", f"Vᵢ ⊆ Vᵢ↓ ∪ V↑ (statement {i})", sorted(vi - di - up))
        w = (w | si) - (an.fv(c_i) - di)
    new_stmts: list = []
    for i, (vs_i, c_i) in enumerate(parts):
        item: list = []
        if v_star[i]:
            item.append(init_program(v_star[i]))
        item.append(A.local(v_down[i], c_i))
        new_stmts.append(A.seq(item))
    inner = A.seq(new_stmts)
    return replace_block(p, path, [A.local(v_up, inner)] if v_up else A.flatten(inner))


def law_local_up_if(
    p: Program, path: tuple, v_up: Sequence[VarDecl], v_down_then: Sequence[VarDecl], v_down_else: Sequence[VarDecl]
) -> Program:
    st = _stmt_at(p, path, "local_up_if")
    if not isinstance(st, A.If):
        raise LawError("local_up_if", "statement is not an if-statement")
    vt, ct = collect_local_chain(st.then)
    ve, ce = collect_local_chain(st.other)
    up, vtn, ven = _names(v_up), _names(vt), _names(ve)
    dtn, den = _names(v_down_then), _names(v_down_else)
    fe = frozenset(n for n, _ in _fv_expr(st.e))
    checks = [
        ("V↑ ∪ V↓then ⊇ Vthen ⊇ V↓then", dtn <= vtn <= (up | dtn)),
        ("V↑ ∪ V↓else ⊇ Velse ⊇ V↓else", den <= ven <= (up | den)),
        ("V↑ ∩ fv e = ∅", not (up & fe)),
        ("V↑ ∩ (fv cthen \\ Vthen) = ∅", not (up & (an.fv(ct) - vtn))),
        ("V↑ ∩ (fv celse \\ Velse) = ∅", not (up & (an.fv(ce) - ven))),
    ]
    for name, ok in checks:
        if not ok:
            raise LawError("local_up_if", name)
    new_if = A.If(st.e, A.local(v_down_then, ct), A.local(v_down_else, ce))
    return replace_block(p, path, [A.local(v_up, new_if)] if v_up else [new_if])


def law_local_up_while(p: Program, path: tuple, v_up: Sequence[VarDecl]) -> Program:
    st = _stmt_at(p, path, "local_up_while")
    if not isinstance(st, A.While):
        raise LawError("local_up_while", "statement is not a while-statement")
    vs, body = collect_local_chain(st.body)
    vn, up = _names(vs), _names(v_up)
    fe = frozenset(n for n, _ in _fv_expr(st.e))
    if not (up <= vn - fe):
        raise LawError("local_up_while", "V↑ ⊆ V \\ fv e", sorted(up - (vn - fe)))
    v_down = [v for v in vs if v.name not in up]
    inner_body: list = []
    if v_up:
        inner_body.append(init_program(v_up))
    inner_body.append(body)
    new_while = A.While(st.e, A.local(v_down, A.seq(inner_body)))
    return replace_block(p, path, [A.local(v_up, new_while)] if v_up else [new_while])


def _fv_expr(e):
    from .expr import fv_expr

    return fv_expr(e)


# ---------------------------------------------------------------------------
# Greedy instantiation of the local-up laws


def greedy_args(law: str, p: Program, path: tuple) -> dict:
    if law == "local_up_block":
        stmts = get_block(p, path)
        parts = _as_local_stmts(stmts)
        whole_fv = an.fv(A.seq(stmts))
        all_vs: list = []
        for vs_i, _ in parts:
            for v in vs_i:
                if v not in all_vs:
                    all_vs.append(v)
        v_up = [v for v in all_vs if v.name not in whole_fv]
        upn = _names(v_up)
        v_down = [[v for v in vs_i if v.name not in upn] for vs_i, _ in parts]
        v_star: list = []
        w = set(upn)
        for i, (vs_i, c_i) in enumerate(parts):
            di = _names(v_down[i])
            si = [v for v in vs_i if v.name not in di and v.name not in w]
            v_star.append(si)
            w = (w | _names(si)) - (an.fv(c_i) - di)
        return {"v_up": v_up, "v_down": v_down, "v_star": v_star}
    if law == "local_up_if":
        st = _stmt_at(p, path, law)
        if not isinstance(st, A.If):
            raise LawError(law, "statement is not an if-statement")
        vt, ct = collect_local_chain(st.then)
        ve, ce = collect_local_chain(st.other)
        fe = frozenset(n for n, _ in _fv_expr(st.e))
        blocked = (an.fv(ct) - _names(vt)) | (an.fv(ce) - _names(ve)) | fe
        v_up: list = []
        for v in vt + [v for v in ve if v not in vt]:
            if v.name not in blocked and v not in v_up:
                v_up.append(v)
        upn = _names(v_up)
        return {
            "v_up": v_up,
            "v_down_then": [v for v in vt if v.name not in upn],
            "v_down_else": [v for v in ve if v.name not in upn],
        }
    if law == "local_up_while":
        st = _stmt_at(p, path, law)
        if not isinstance(st, A.While):
            raise LawError(law, "statement is not a while-statement")
        vs, _ = collect_local_chain(st.body)
        fe = frozenset(n for n, _ in _fv_expr(st.e))
        return {"v_up": [v for v in vs if v.name not in fe]}
    raise ValueError(f"greedy_args only applies to the local_up laws, not {law}")


# ---------------------------------------------------------------------------
# Dispatch


_LAW_FUNCS = {
    "local_idem": law_local_idem,
    "local_commute": law_local_commute,
    "local_merge_nested": law_local_merge_nested,
    "remove_unused_local": law_remove_unused_local,
    "add_init_begin": law_add_init_begin,
    "add_init_end": law_add_init_end,
    "init_overwrite_elim": law_init_overwrite_elim,
    "seq_swap_independent": law_seq_swap_independent,
    "seq_locals_merge": law_seq_locals_merge,
    "seq_locals_absorb": law_seq_locals_absorb,
    "rename_full": law_rename_full,
    "rename_locals": law_rename_locals,
    "local_up_block": law_local_up_block,
    "local_up_if": law_local_up_if,
    "local_up_while": law_local_up_while,
}


def rewrite(law: str, p: Program, path: tuple = (), **args) -> Program:
    """Apply a named law at a path; raises LawError when a side condition fails."""
    if law not in _LAW_FUNCS:
        raise ValueError(f"unknown rewrite law {law!r}; known: {', '.join(LAW_NAMES)}")
    return _LAW_FUNCS[law](p, path, **args)


def local_up_everywhere(p: Program) -> Program:
    """Greedy fixpoint driver: lift local declarations as far up as possible."""
    for _ in range(200):
        new = _local_up_pass(p)
        if A.program_equal(new, p):
            return p
        p = new
    return p


def _local_up_pass(p: Program) -> Program:
    changed = [False]

    def go(node: Program) -> Program:
        if isinstance(node, A.Local):
            return A.Local(node.v, go(node.body))
        if isinstance(node, A.If):
            node = A.If(node.e, go(node.then), go(node.other))
            if isinstance(node.then, A.Local) or isinstance(node.other, A.Local):
                args = greedy_args("local_up_if", node, ())
                if args["v_up"]:
                    changed[0] = True
                    return law_local_up_if(node, (), **args)
            return node
        if isinstance(node, A.While):
            node = A.While(node.e, go(node.body))
            if isinstance(node.body, A.Local):
                args = greedy_args("local_up_while", node, ())
                if args["v_up"]:
                    changed[0] = True
                    return law_local_up_while(node, (), **args)
            return node
        if isinstance(node, A.Seq):
            items = [go(c) for c in node.items]
            blk = A.seq(items)
            stmts = A.flatten(blk)
            if len(stmts) >= 2 and any(isinstance(s, A.Local) for s in stmts):
                args = greedy_args("local_up_block", blk, ())
                if args["v_up"]:
                    changed[0] = True
                    return law_local_up_block(blk, (), **args)
            return blk
        return node

    out = go(p)
    return out if changed[0] else p
