from .consistency import interleaving_violations, transition_verdict, validate_consistency
from .exact import Limits, solve_exact
from .lpformat import to_lp
from .model import MilpModel, Topology, build_model
from .rounding import relax_and_round, solve_relaxation
from .simplex import linprog
from .solution import UpdateSchedule

__all__ = [
    "interleaving_violations", "transition_verdict", "validate_consistency",
    "Limits", "solve_exact", "to_lp", "MilpModel", "Topology", "build_model",
    "relax_and_round", "solve_relaxation", "linprog", "UpdateSchedule",
]
