"""Rank-type difference equations under periodic forcing.

Library and CLI for systems x_n = k-rank{f_i(x_{n-i}, n)}: expression
parsing, Lipschitz certification, block-map fixed points, trajectory
simulation with period detection, and explicit limit formulas.
"""

from .block_map import (
    BlockMap,
    CertificationError,
    FixedPointResult,
    NonConvergenceError,
    ShiftCommutationReport,
    apply_block_map,
    extract_periodic_orbit,
    shift_commutation_check,
    solve_fixed_point,
)
from .closed_form import (
    FixedPointSet,
    autonomous_rank_limit,
    period_two_case,
    period_two_fixed_points,
    period_two_max_orbit,
    power_period_two_limit,
    power_period_two_terms,
    scalar_fixed_point,
)
from .expr import (
    ArityError,
    BlockExpr,
    ExprError,
    ExprSyntaxError,
    NumericDomainError,
    ScalarExpr,
    UnknownIdentifierError,
    parse_block,
    parse_scalar,
)
from .lipschitz import (
    DomainInterval,
    LipschitzEstimate,
    estimate_block_lipschitz,
    estimate_scalar_lipschitz,
    linear_coefficients,
)
from .orbits import PeriodicOrbit, orbit_distance, orbit_distance_min_rotation
from .rank_core import k_rank, k_rank_many, median, sup_distance, sup_norm
from .simulate import (
    ConvergenceReport,
    Trajectory,
    TrajectoryError,
    convergence_report,
    detect_period,
    iterate,
)
from .sysfile import SystemDefinition, SystemFileError, load_system_file
from .systems import (
    BlockSystem,
    Certification,
    InitialCondition,
    RankSchedule,
    ScalarFamily,
    affine_matrix_system,
    certify_block,
    certify_family,
    family_from_grid,
    max_minus_rank_system,
    phase_index,
    power_max_system,
    rank_family_to_block,
)
from .verify import SUITES, SuiteResult, run_suites

__version__ = "0.1.0"

__all__ = [
    "ArityError",
    "BlockExpr",
    "BlockMap",
    "BlockSystem",
    "Certification",
    "CertificationError",
    "ConvergenceReport",
    "DomainInterval",
    "ExprError",
    "ExprSyntaxError",
    "FixedPointResult",
    "FixedPointSet",
    "InitialCondition",
    "LipschitzEstimate",
    "NonConvergenceError",
    "NumericDomainError",
    "PeriodicOrbit",
    "RankSchedule",
    "ScalarExpr",
    "ScalarFamily",
    "ShiftCommutationReport",
    "SuiteResult",
    "SUITES",
    "SystemDefinition",
    "SystemFileError",
    "Trajectory",
    "TrajectoryError",
    "UnknownIdentifierError",
    "affine_matrix_system",
    "apply_block_map",
    "autonomous_rank_limit",
    "certify_block",
    "certify_family",
    "convergence_report",
    "detect_period",
    "estimate_block_lipschitz",
    "estimate_scalar_lipschitz",
    "extract_periodic_orbit",
    "family_from_grid",
    "iterate",
    "k_rank",
    "k_rank_many",
    "linear_coefficients",
    "load_system_file",
    "max_minus_rank_system",
    "median",
    "orbit_distance",
    "orbit_distance_min_rotation",
    "parse_block",
    "parse_scalar",
    "period_two_case",
    "period_two_fixed_points",
    "period_two_max_orbit",
    "phase_index",
    "power_max_system",
    "power_period_two_limit",
    "power_period_two_terms",
    "rank_family_to_block",
    "run_suites",
    "scalar_fixed_point",
    "shift_commutation_check",
    "solve_fixed_point",
    "sup_distance",
    "sup_norm",
    "__version__",
]
