"""rapidbnb: a pure-integer branch-and-bound solver that embeds a
conflict-learning CP probe for bounds, constraints, and solutions."""

from .bench import (affected_split, directional_report, run_suite,
                    shifted_geomean)
from .conflict import (BoundDisjunction, LearnedConstraint, LearnedRecord,
                       analyze_1uip, check_disjunction, to_knapsack)
from .cpsearch import (CpConfig, CpOutcome, CpStatus, cp_search,
                       node_limit_from_iters, pseudo_solution)
from .lp import LpResult, LpStatus, measure_degeneracy, solve_lp
from .mipsearch import (ConfigError, MipConfig, SearchStats, SolveError,
                        SolveResult, solve)
from .model import (BoundBox, EmptyBoxError, Instance, ModelError,
                    ProblemClass, Row, Side, classify, from_inequalities)
from .mps import MpsParseError, ParseDiagnostics, parse_mps, write_mps
from .propagation import Propagator
from .rapid import (CriterionReport, RapidConfig, evaluate_criteria,
                    is_rl_depth, maybe_run)

__version__ = "0.1.0"

__all__ = [
    "BoundBox", "BoundDisjunction", "ConfigError", "CpConfig", "CpOutcome",
    "CpStatus", "CriterionReport", "EmptyBoxError", "Instance",
    "LearnedConstraint", "LearnedRecord", "LpResult", "LpStatus",
    "MipConfig", "ModelError",
    "MpsParseError", "ParseDiagnostics", "ProblemClass", "Propagator",
    "RapidConfig", "Row", "SearchStats", "Side", "SolveError", "SolveResult",
    "affected_split", "analyze_1uip", "check_disjunction", "classify",
    "cp_search", "directional_report", "evaluate_criteria",
    "from_inequalities", "is_rl_depth", "maybe_run", "measure_degeneracy",
    "node_limit_from_iters", "parse_mps", "pseudo_solution", "run_suite",
    "shifted_geomean", "solve", "solve_lp", "to_knapsack", "write_mps",
    "__version__",
]
