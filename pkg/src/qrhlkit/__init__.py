"""qrhlkit: a proof checker and tactic engine for relational reasoning about
quantum while-programs with local variables, validated by a finite-dimensional
denotational-semantics engine."""

__version__ = "0.1.0"
