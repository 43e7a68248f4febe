from .backprop import BackpropResult, NonConvergence, TrainingParams, backprop_configure, wall_route
from .explorer import ExplorerParams, ExplorerResult, explorer_search
from .kpaths import KPathsResult, k_shortest_configure
from .lexi import GreedyResult, lexicographic_greedy
from .objective import (
    MAX_RX_POWER,
    METRICS,
    MIN_DELAY,
    MIN_DOPPLER_SPREAD,
    MIN_EAVESDROP_EXPOSURE,
    MIN_RMS_DS,
    ObjectiveReport,
    UserObjective,
    comparator,
    evaluate,
    free_tiles,
    touches,
)

__all__ = [
    "BackpropResult", "NonConvergence", "TrainingParams", "backprop_configure", "wall_route",
    "ExplorerParams", "ExplorerResult", "explorer_search",
    "KPathsResult", "k_shortest_configure",
    "GreedyResult", "lexicographic_greedy",
    "MAX_RX_POWER", "METRICS", "MIN_DELAY", "MIN_DOPPLER_SPREAD", "MIN_EAVESDROP_EXPOSURE", "MIN_RMS_DS",
    "ObjectiveReport", "UserObjective", "comparator", "evaluate", "free_tiles", "touches",
]
