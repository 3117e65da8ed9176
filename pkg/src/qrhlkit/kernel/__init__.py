from .examples import PAPER_EXAMPLES_SCRIPT, derive_paper_examples
from .goals import DeneqGoal, Goal, InclusionGoal, Judgment, Obligation, ProbGoal, QrhlGoal
from .proof import ProofError, ProofSession
from .rules import RULE_NAMES, RuleError, apply_rule
from .script import CommandResult, Engine, ScriptError, run_script, split_commands

__all__ = [
    "CommandResult",
    "Engine",
    "PAPER_EXAMPLES_SCRIPT",
    "ScriptError",
    "derive_paper_examples",
    "run_script",
    "split_commands",
    "DeneqGoal",
    "Goal",
    "InclusionGoal",
    "Judgment",
    "Obligation",
    "ProbGoal",
    "ProofError",
    "ProofSession",
    "QrhlGoal",
    "RULE_NAMES",
    "RuleError",
    "apply_rule",
]
