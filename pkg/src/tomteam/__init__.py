"""Belief-aligned stable team formation for multi-agent systems."""

from .alignment import build_alignment_matrix, cosine_alignment
from .engine import maybe_reform, run_episode, run_round
from .formation import (
    find_blocking_coalition,
    optimal_team,
    passes_epsilon,
    random_team,
    social_welfare,
    specialized_preference,
    team_preference,
)
from .metrics import aggregate, team_bas, team_stability
from .scenario import Scenario, load_scenario, parse_scenario
from .types import (
    ActionVector,
    AlignmentMatrix,
    Belief,
    EngineState,
    FormationOutcome,
    FormationParams,
    InteractionLog,
    Team,
)

__version__ = "0.1.0"
