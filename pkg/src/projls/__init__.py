"""Level set estimation from random projections via penalized dyadic partitions."""

from .estimator import FREE, SQUARE, FitConfig, brute_force_fit, fit, leaf_vote, objective, oracle_tau_search
from .grid import (
    DimensionMismatchError,
    DyadicCell,
    GridShape,
    GridSignal,
    InvariantViolationError,
    LevelSetMask,
    PartitionEstimate,
    partition_to_mask,
)
from .metrics import excess_risk, risk, true_level_set
from .operators import (
    MeasurementOperator,
    NoiseModel,
    augment_mean_row,
    forward,
    gen_gaussian_operator,
    theory_bounds,
)
from .penalty import PenaltyParams, build_row_sats, leaf_penalty
from .proxy import ProxyResult, compute_proxy, projected_mean_subtract

__version__ = "0.1.0"
