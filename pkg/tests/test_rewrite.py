import pytest

from qrhlkit import analysis as an
from qrhlkit import ast as A
from qrhlkit import rewrite as RW
from qrhlkit.analysis import Substitution
from qrhlkit.parser import parse_program
from qrhlkit.semantics import deneq_check


def P(ws, text):
    return parse_program(text, ws)


def ok(ws, law, prog, path=(("stmt", 0),), **args):
    out = RW.rewrite(law, prog, path, **args)
    assert deneq_check(prog, out, ws, 1e-9).equal, law
    return out


# -- positives (each cross-validated against the semantics) ----------------------


def test_local_idem(ws):
    out = ok(ws, "local_idem", P(ws, "local x; { local x; { x <- 1 } }"))
    assert A.program_equal(out, P(ws, "local x; { x <- 1 }"))


def test_local_commute(ws):
    out = ok(ws, "local_commute", P(ws, "local x; { local q; { x <m q with compmeas() } }"))
    assert isinstance(out, A.Local) and out.v.name == "q"


def test_local_merge_nested(ws):
    out = ok(ws, "local_merge_nested", P(ws, "local x; { local y; { local x; { x <- y } } }"))
    vs, _ = RW.collect_local_chain(out)
    assert [v.name for v in vs] == ["x", "y"]


def test_remove_unused_local(ws):
    out = ok(ws, "remove_unused_local", P(ws, "local y; { x <- 1 }"))
    assert A.program_equal(out, P(ws, "x <- 1"))


def test_add_init_begin_end(ws):
    p = P(ws, "local y; { x <- y }")
    ok(ws, "add_init_begin", p, init_vars=[p.v])
    ok(ws, "add_init_end", p, init_vars=[p.v])


def test_init_overwrite_elim(ws):
    out = ok(ws, "init_overwrite_elim", P(ws, "x <- y; x <- 1"), path=(), index=0)
    assert A.program_equal(out, P(ws, "x <- 1"))
    ok(ws, "init_overwrite_elim", P(ws, "q <q ket(0); q <q ket(1)"), path=(), index=0)


def test_seq_swap_independent(ws):
    out = ok(ws, "seq_swap_independent", P(ws, "x <- 1; on q apply H"), path=(), index=0)
    assert A.program_equal(out, P(ws, "on q apply H; x <- 1"))


def test_seq_locals_merge(ws):
    out = ok(ws, "seq_locals_merge", P(ws, "{ local q; { on q apply H } }; { local q; { q <q ket(1) } }"), path=(), index=0)
    vs, body = RW.collect_local_chain(out)
    assert [v.name for v in vs] == ["q"]
    assert len(A.flatten(body)) == 3  # c; init V; d


def test_seq_locals_absorb(ws):
    out = ok(ws, "seq_locals_absorb", P(ws, "x <- 1; { local y; { y <- x } }"), path=(), index=0)
    assert isinstance(out, A.Local)


def test_rename_full(ws):
    sigma = Substitution({ws.var("x"): ws.var("y"), ws.var("y"): ws.var("x")})
    prog = P(ws, "local x; { x <- 1 }")
    out = ok(ws, "rename_full", prog, sigma=sigma)
    assert A.program_equal(out, P(ws, "local y; { y <- 1 }"))


def test_rename_locals(ws):
    sigma = Substitution({ws.var("q"): ws.var("r")})
    prog = P(ws, "local q; { q <q ket(1); x <m q with compmeas() }")
    out = ok(ws, "rename_locals", prog, sigma=sigma)
    assert A.program_equal(out, P(ws, "local r; { r <q ket(1); x <m r with compmeas() }"))


def test_local_up_block_greedy(ws):
    p = P(ws, "{ local y; { x <- 1 } }; { local y; { q <q ket(0) } }")
    args = RW.greedy_args("local_up_block", p, ())
    assert {v.name for v in args["v_up"]} == {"y"}
    ok(ws, "local_up_block", p, path=(), **args)


def test_local_up_if_greedy(ws):
    p = P(ws, "if x == 1 { local y; { y <- 1 } } else { local y; { y <- 0 } }")
    args = RW.greedy_args("local_up_if", p, (("stmt", 0),))
    assert {v.name for v in args["v_up"]} == {"y"}
    out = ok(ws, "local_up_if", p, **args)
    assert isinstance(out, A.Local)


def test_local_up_if_guard_blocks(ws):
    # greedy V-up excludes variables free in the guard
    p = P(ws, "if y == 1 { local y; { y <- 1 } } else { skip }")
    args = RW.greedy_args("local_up_if", p, (("stmt", 0),))
    assert args["v_up"] == []


def test_local_up_while_greedy(ws):
    p = P(ws, "x <- 1; while x == 1 { local y; { y <$ uniform(bit); x <- y } }")
    args = RW.greedy_args("local_up_while", p, (("stmt", 1),))
    assert {v.name for v in args["v_up"]} == {"y"}
    out = ok(ws, "local_up_while", p, path=(("stmt", 1),), **args)
    # shape: local V-up (while e { local V-down (init V-up; c) })
    lifted = A.flatten(out)[1]
    assert isinstance(lifted, A.Local)
    inner = lifted.body
    assert isinstance(inner, A.While)


def test_local_up_while_guard_var_stays(ws):
    p = P(ws, "while x == 1 { local x; { x <- 0 } }")
    args = RW.greedy_args("local_up_while", p, (("stmt", 0),))
    assert args["v_up"] == []


def test_local_up_fixpoint_terminates(ws):
    p = P(
        ws,
        "{ local y; { x <- 1 } }; while x == 1 { local r; { r <q ket(1); x <- 0 } }; "
        "if x == 0 { local q; { q <q ket(0) } } else { skip }",
    )
    out = RW.local_up_everywhere(p)
    assert deneq_check(p, out, ws, 1e-9).equal
    again = RW.local_up_everywhere(out)
    assert A.program_equal(out, again)


def test_local_order_irrelevant(ws):
    a = P(ws, "local x; { local q; { x <m q with compmeas() } }")
    b = P(ws, "local q; { local x; { x <m q with compmeas() } }")
    assert deneq_check(a, b, ws).equal


# -- side-condition necessity probes ------------------------------------------------


def test_remove_unused_local_rejects_used(ws):
    with pytest.raises(RW.LawError, match="fv c"):
        RW.rewrite("remove_unused_local", P(ws, "local x; { x <- 1 }"), (("stmt", 0),))


def test_init_overwrite_elim_rejects_read(ws):
    with pytest.raises(RW.LawError, match="overwr"):
        RW.rewrite("init_overwrite_elim", P(ws, "x <- 0; y <- x"), (), index=0)


def test_seq_swap_rejects_shared_variable(ws):
    with pytest.raises(RW.LawError, match="fv"):
        RW.rewrite("seq_swap_independent", P(ws, "x <- 1; y <- x"), (), index=0)


def test_seq_locals_merge_rejects_different_sets(ws):
    p = P(ws, "{ local x; { x <- 1 } }; { local y; { y <- 1 } }")
    with pytest.raises(RW.LawError):
        RW.rewrite("seq_locals_merge", p, (), index=0)


def test_seq_locals_absorb_rejects_clash(ws):
    p = P(ws, "y <- 1; { local y; { y <- 0 } }")
    with pytest.raises(RW.LawError, match="fv c"):
        RW.rewrite("seq_locals_absorb", p, (), index=0)


def test_add_init_rejects_foreign_vars(ws):
    p = P(ws, "local y; { y <- 0 }")
    with pytest.raises(RW.LawError, match="V'"):
        RW.rewrite("add_init_begin", p, (("stmt", 0),), init_vars=[ws.var("x")])


def test_rename_full_rejects_free_collision(ws):
    sigma = Substitution({ws.var("x"): ws.var("y"), ws.var("y"): ws.var("x")})
    with pytest.raises(RW.LawError, match="dom"):
        RW.rewrite("rename_full", P(ws, "x <- 1"), (("stmt", 0),), sigma=sigma)


def test_rename_locals_rejects_capture(ws):
    # renaming x->y where the body declares y locally captures the occurrence
    sigma = Substitution({ws.var("x"): ws.var("y")})
    p = P(ws, "local x; { { local y; { x <- 1 } }; skip }")
    with pytest.raises(RW.LawError, match="no_conflict"):
        RW.rewrite("rename_locals", p, (("stmt", 0),), sigma=sigma)


def test_rename_locals_rejects_fv_clash(ws):
    sigma = Substitution({ws.var("x"): ws.var("y")})
    p = P(ws, "local x; { x <- y }")
    with pytest.raises(RW.LawError, match="W"):
        RW.rewrite("rename_locals", p, (("stmt", 0),), sigma=sigma)


def test_local_up_while_rejects_guard_var(ws):
    p = P(ws, "while x == 1 { local x; { x <- 0 } }")
    with pytest.raises(RW.LawError, match="fv e"):
        RW.rewrite("local_up_while", p, (("stmt", 0),), v_up=[ws.var("x")])


def test_local_up_block_rejects_free_lift(ws):
    p = P(ws, "{ local y; { y <- 1 } }; x <- y")
    with pytest.raises(RW.LawError, match="fv c"):
        RW.rewrite(
            "local_up_block",
            p,
            (),
            v_up=[ws.var("y")],
            v_down=[[], []],
            v_star=[[ws.var("y")], []],
        )


def test_local_up_if_rejects_guard_overlap(ws):
    p = P(ws, "if y == 1 { local y; { y <- 1 } } else { skip }")
    with pytest.raises(RW.LawError, match="fv e"):
        RW.rewrite("local_up_if", p, (("stmt", 0),), v_up=[ws.var("y")], v_down_then=[], v_down_else=[])


def test_local_idem_rejects_shape(ws):
    with pytest.raises(RW.LawError):
        RW.rewrite("local_idem", P(ws, "local x; { local y; { skip } }"), (("stmt", 0),))


def test_unknown_law_rejected(ws):
    with pytest.raises(ValueError, match="unknown rewrite law"):
        RW.rewrite("somersault", P(ws, "skip"), ())
