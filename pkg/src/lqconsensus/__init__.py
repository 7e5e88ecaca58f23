"""Linear-quadratic cost of linear consensus on directed networks, with
effective-resistance upper and lower bounds and experiment drivers.

The package splits into: `stochastic_core` (validation, invariant measure,
time reversal, classification), `resistance` (conductances, Laplacians,
effective resistance, the Phi/Psi correspondences), `lqcost` (exact Stein
solves, truncated series, Green matrix, noisy Monte Carlo), `bounds` (the
two bound theorems, the normal-matrix corollary, support oracles and the
resistance sandwich), `graph_gen` (Cayley tori, named example matrices, the
random-geometric pipeline) and `experiments_cli` (CSV/plot experiment
drivers behind the `lqconsensus` command).
"""

from .bounds import (
    BoundsReport,
    FuzzSupport,
    SandwichMargins,
    corollary_normal_bounds,
    f_delta,
    hypothetical_lower_violation,
    resistance_sandwich_check,
    reversiblization_conductance,
    reversiblization_support,
    theorem_resistance_bounds,
    theorem_topology_bounds,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    Disconnected,
    InfeasibleDensity,
    InvalidGenerator,
    InvalidWeights,
    LqConsensusError,
    NegativeEntry,
    NotIrreducible,
    NotNormal,
    NotReversible,
    NotStochastic,
    NotSymmetric,
    OutOfRange,
    RejectionExhausted,
    SolveFailure,
    SteinDivergence,
    ZeroDiagonal,
)
from .graph_gen import (
    CayleyGenerator,
    GeometricInstance,
    GeometricParams,
    audit_block,
    cayley_case1,
    cayley_case2,
    cayley_matrix,
    circle_matrix,
    commuting_example,
    gamma_check,
    load_edge_list,
    p_epsilon,
    rho_check,
    sample_geometric,
    save_coordinates_csv,
    save_edge_list,
)
from .lqcost import (
    GreenMatrix,
    LqReport,
    green_matrix,
    lq_cost_exact,
    lq_cost_truncated,
    noisy_consensus_estimate,
    trace_pair,
)
from .resistance import (
    ConductanceMatrix,
    ResistanceMatrix,
    average_resistance,
    conductance_matrix,
    effective_resistance,
    laplacian,
    load_conductance_csv,
    phi_map,
    psi_map,
    save_conductance_csv,
    save_resistance_csv,
    unit_conductance,
    weighted_average_resistance,
)
from .stochastic_core import (
    ConsensusMatrix,
    InvariantMeasure,
    MatrixClass,
    SupportGraphs,
    classify,
    invariant_measure,
    load_matrix_csv,
    multiplicative_reversiblization,
    save_matrix_csv,
    support_graphs,
    time_reversal,
    validate_consensus,
)

__version__ = "0.1.0"

__all__ = [
    "BoundsReport", "CayleyGenerator", "ConductanceMatrix", "ConfigError",
    "ConsensusMatrix", "DimensionMismatch", "Disconnected", "FuzzSupport",
    "GeometricInstance", "GeometricParams", "GreenMatrix",
    "InfeasibleDensity", "InvalidGenerator", "InvalidWeights",
    "InvariantMeasure", "LqConsensusError", "LqReport", "MatrixClass",
    "NegativeEntry", "NotIrreducible", "NotNormal", "NotReversible",
    "NotStochastic", "NotSymmetric", "OutOfRange", "RejectionExhausted",
    "ResistanceMatrix", "SandwichMargins", "SolveFailure", "SteinDivergence",
    "SupportGraphs", "ZeroDiagonal", "audit_block", "average_resistance",
    "cayley_case1", "cayley_case2", "cayley_matrix", "circle_matrix",
    "classify", "commuting_example", "conductance_matrix",
    "corollary_normal_bounds", "effective_resistance", "f_delta",
    "gamma_check", "green_matrix", "hypothetical_lower_violation",
    "invariant_measure", "laplacian", "load_conductance_csv",
    "load_edge_list", "load_matrix_csv", "lq_cost_exact",
    "lq_cost_truncated", "multiplicative_reversiblization",
    "noisy_consensus_estimate", "p_epsilon", "phi_map", "psi_map",
    "resistance_sandwich_check", "reversiblization_conductance",
    "reversiblization_support", "rho_check", "sample_geometric",
    "save_conductance_csv", "save_coordinates_csv", "save_edge_list",
    "save_matrix_csv", "save_resistance_csv", "support_graphs",
    "theorem_resistance_bounds", "theorem_topology_bounds", "time_reversal",
    "trace_pair", "unit_conductance", "validate_consensus",
    "weighted_average_resistance",
]
