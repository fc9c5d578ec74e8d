"""Two-stage rule-based dose finding for dual-agent combination trials.

The package splits into a decision core (``rules``), the lattice helpers
(``grid``), the trial state machine (``engine``), final MTDC selection
(``selection``), true-toxicity scenarios (``scenarios``), the Monte Carlo
engine (``simulate``), and the conduct interfaces (``cli``, ``service``).
"""

from .engine import (
    Assignment,
    DesignParams,
    Stage,
    StopReason,
    TrialState,
    new_trial,
    next_assignment,
    record_cohort,
)
from .grid import CandidateSets, Coord, DoseGrid, adjacent_sets, dc_distance, standard_paths
from .rules import (
    BetaParams,
    Decision,
    DoseObservation,
    EquivalenceInterval,
    decision_table,
    i3p3_decision,
    is_unacceptably_toxic,
    prob_exceeds,
    prob_in_interval,
)
from .scenarios import ScenarioMatrix, builtin_study1, builtin_study2, classify_truth, combine
from .selection import MtdcResult, bivariate_isotonic, select_mtdc
from .simulate import OcResult, SimConfig, TrialResult, run_oc, run_trial

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BetaParams",
    "CandidateSets",
    "Coord",
    "Decision",
    "DesignParams",
    "DoseGrid",
    "DoseObservation",
    "EquivalenceInterval",
    "MtdcResult",
    "OcResult",
    "ScenarioMatrix",
    "SimConfig",
    "Stage",
    "StopReason",
    "TrialResult",
    "TrialState",
    "adjacent_sets",
    "bivariate_isotonic",
    "builtin_study1",
    "builtin_study2",
    "classify_truth",
    "combine",
    "dc_distance",
    "decision_table",
    "i3p3_decision",
    "is_unacceptably_toxic",
    "new_trial",
    "next_assignment",
    "prob_exceeds",
    "prob_in_interval",
    "record_cohort",
    "run_oc",
    "run_trial",
    "select_mtdc",
    "standard_paths",
]
