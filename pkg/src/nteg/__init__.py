"""Decentralisation-conscious players in the normalised total effort game."""

from .dynamics import DynamicsConfig, Outcome, Trace, random_instance, run, step
from .equilibrium import (
    EquilibriumReport,
    Family,
    RewardEquilibriumBounds,
    best_response,
    best_responses,
    classify,
    equilibrium_ranges,
    is_equilibrium,
    lemma1_violation,
    reward_best_response,
    reward_two_player_bounds,
    two_player_equilibrium_range,
)
from .model import (
    ALL_ZERO,
    GameSpec,
    PlayerParams,
    Profile,
    nte,
    reliability,
    reward_share,
    social_optimum,
    social_payoff,
    utilities,
    utility,
)
from .oracle import GridConfig, grid_best_response, verify_equilibrium
from .perturbation import (
    Deviate,
    DisruptionPrediction,
    Join,
    Leave,
    apply_and_settle,
    coalition_merge,
    non_myopic_search,
    predict,
    predict_deviation,
    predict_join,
    predict_leave,
)

__version__ = "0.1.0"
