"""Built-in reference derivations on the standard two-qubit workspace.

These are release gates: the register-dropping judgment for two-sided
initialization, and the three-statement chain closed with the sequencing
rule.  Both must close with zero admitted obligations.
"""

from __future__ import annotations

from .script import Engine, ScriptError

PAPER_EXAMPLES_SCRIPT = """\
var quantum q : bit.
var quantum r : bit.
var quantum qaux : aux_infinite.
program c2 := { r <q ket(0); on q, r apply CNOT }.
program c3 := { r <q ket(0); on q, r apply CNOT; r <q ket(0) }.
qrhl remove_r : { qeq(q1 r1, q2 r2) } { r <q ket(0) } ~ { r <q ket(0) } { qeq(q1, q2) }.
jointqiniteq0.
qed.
qrhl c3_chain : { qeq(q1, q2) } call c3 ~ call c3 { qeq(q1, q2) }.
seq 2 2 : { qeq(q1 r1, q2 r2) }.
equal.
jointqiniteq0.
qed.
"""


def derive_paper_examples() -> Engine:
    """Run both reference derivations; raises if anything fails or is admitted."""
    eng = Engine()
    results = eng.run_text(PAPER_EXAMPLES_SCRIPT)
    errors = [r.text for r in results if r.kind == "error"]
    if errors:
        raise ScriptError("reference derivation failed: " + "; ".join(errors))
    summary = eng.summary()
    if set(summary["lemmas"]) != {"remove_r", "c3_chain"} or summary["admitted_total"] != 0:
        raise ScriptError(f"reference derivations incomplete: {summary}")
    return eng
