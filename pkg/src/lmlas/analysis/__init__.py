"""Analytic performance tools: Q function, union bounds, large-system fixed points."""

from .bounds import (
    ErrorVector,
    UnionBound,
    ame_lower_bound,
    distance_chain_violations,
    enumerate_error_set,
    is_decomposable,
    plas_thresholds,
    signal_distance,
    union_bound,
)
from .qfunc import critical_load, q_function, q_inverse, single_bit_bound
from .replica import (
    CalibrationError,
    CutoffLoad,
    CutoffNonConvergence,
    EnergyDistribution,
    PhasePoint,
    ReplicaSolution,
    SpinodalScan,
    calibrate_snr_convention,
    cutoff_load,
    tangency_constants,
    load_curve,
    replica_ber,
    solution_count,
    spinodal_cusp,
    spinodal_scan,
)
