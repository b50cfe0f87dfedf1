"""Moore-Penrose metric generalized inverses between finite-dimensional l^p spaces."""

from .config import ConfigError, ExperimentConfig, Tolerances, parse_config, serialize_config
from .equations import (
    AffineSolutionSet,
    BoundRecord,
    InconsistentSystemError,
    bas_solve,
    check_thm_bas,
    check_thm_consistent_perturbed_rhs,
    check_thm_consistent_same_rhs,
    solve_consistent,
)
from .experiments import SuiteReport, TrialRecord, run_suite
from .lp_space import PNormSpace, conjugate_exponent, dual_map, pnorm
from .operator import (
    AxiomReport,
    HomogeneousMap,
    MetricInverse,
    PNormOperator,
    condition_number,
    homogeneous_norm,
    kernel,
    mgi_apply,
    mgi_axiom_check,
    mgi_map,
    mgi_norm,
    operator_norm,
    quasi_additivity_check,
    range_space,
    reduced_min_modulus,
)
from .perturbation import (
    EquivalenceVerdict,
    PerturbationExpression,
    PerturbationKind,
    PerturbationSpec,
    PreconditionError,
    gamma_stability_check,
    generate_perturbation,
    phi_apply,
    simplest_expression_check,
)
from .subspace import (
    ConvergenceError,
    ProjectionCertificate,
    Subspace,
    contained_in,
    distance,
    gap,
    god_decompose,
    metric_project,
    project,
    subspaces_equal,
    sym_gap,
)

__version__ = "0.1.0"
