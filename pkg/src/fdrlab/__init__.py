"""False discovery rate procedures with a Monte Carlo verification lab.

The package splits into flat procedures (procedures), error-rate
accounting (error_rates), the two-groups mixture view (two_groups),
set-level and staged designs (structured), post-selection inference
(selective), and the simulation engine that checks all of it (simlab).
"""

from ._backend import BACKEND_NAME
from .errors import (
    ChainUndefinedError,
    DegenerateCombinationWarning,
    DomainError,
    EmptyFilterError,
    TreeStructureError,
    ValidationError,
)
from .procedures import (
    PValueSet,
    RejectionResult,
    StageTrace,
    adaptive_step_down,
    adjusted_pvalues,
    bh_step_up,
    bonferroni,
    by_step_up,
    two_stage_adaptive,
    weighted_bh,
)
from .error_rates import (
    ErrorRateReport,
    ReplicateOutcome,
    account,
    aggregate,
    identity_chain_gap,
)
from .two_groups import (
    FdrCurve,
    NormalSpec,
    NullDiagnostics,
    TwoGroupsModel,
    diagnose_null,
    estimate_local_fdr,
    estimate_p0_lambda,
    fit_empirical_null,
    local_fdr_exact,
    p0_bound_two_stage,
    p_from_z,
    tail_fdr_exact,
)
from .structured import (
    ClusterPartition,
    HierarchicalResult,
    HypothesisTree,
    TreeNode,
    cluster_test,
    combine_pvalues,
    hierarchical_test,
    two_stage_screen,
)
from .selective import (
    EstimateSet,
    IntervalSet,
    SparseMeansScenario,
    fcr_intervals,
    fcr_study,
    fdr_threshold_estimate,
    threshold_risk_study,
)
from .simlab import (
    FilterSpec,
    ProcedureSpec,
    Scenario,
    execute_run,
    filter_then_test,
    fixed_threshold_study,
    generate_replicate,
    load_run_config,
    local_fdr_study,
    run_filter_study,
    run_study,
    scenario_hash,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND_NAME",
    "__version__",
    "ChainUndefinedError",
    "DegenerateCombinationWarning",
    "DomainError",
    "EmptyFilterError",
    "TreeStructureError",
    "ValidationError",
    "PValueSet",
    "RejectionResult",
    "StageTrace",
    "adaptive_step_down",
    "adjusted_pvalues",
    "bh_step_up",
    "bonferroni",
    "by_step_up",
    "two_stage_adaptive",
    "weighted_bh",
    "ErrorRateReport",
    "ReplicateOutcome",
    "account",
    "aggregate",
    "identity_chain_gap",
    "FdrCurve",
    "NormalSpec",
    "NullDiagnostics",
    "TwoGroupsModel",
    "diagnose_null",
    "estimate_local_fdr",
    "estimate_p0_lambda",
    "fit_empirical_null",
    "local_fdr_exact",
    "p0_bound_two_stage",
    "p_from_z",
    "tail_fdr_exact",
    "ClusterPartition",
    "HierarchicalResult",
    "HypothesisTree",
    "TreeNode",
    "cluster_test",
    "combine_pvalues",
    "hierarchical_test",
    "two_stage_screen",
    "EstimateSet",
    "IntervalSet",
    "SparseMeansScenario",
    "fcr_intervals",
    "fcr_study",
    "fdr_threshold_estimate",
    "threshold_risk_study",
    "FilterSpec",
    "ProcedureSpec",
    "Scenario",
    "execute_run",
    "filter_then_test",
    "fixed_threshold_study",
    "generate_replicate",
    "load_run_config",
    "local_fdr_study",
    "run_filter_study",
    "run_study",
    "scenario_hash",
]
