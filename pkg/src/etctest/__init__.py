"""Exact nonparametric test for separating two classes with a single threshold."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .estimator import (
    Direction,
    EtcEstimate,
    LabeledSample,
    OperatingCondition,
    ThresholdRule,
    epe_of_rule,
    etc_columns,
    etc_hat,
    etc_hat_conservative,
    validate_oc,
)
from .filter import (
    FilterReport,
    VariableMatrix,
    bh_adjust,
    load_matrix,
    rank_variables,
    write_report,
)
from .nulldist import (
    NDCache,
    NullDistribution,
    QuadrantSpec,
    count_cell,
    count_quadrant,
    load_nd,
    null_distribution,
    p_value,
    save_nd,
)
from .permutation import (
    CellIndex,
    LabelPermutation,
    Orientation,
    enumerate_cells_bruteforce,
    etc_on_permutation,
    nulldist_bruteforce,
    phi,
    rank_reduce,
)
