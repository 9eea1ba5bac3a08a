"""Two-task overparameterized linear regression laboratory.

Sample latent-feature regression tasks related by a random orthogonal map,
fit the closed-form sequential minimum-norm estimators, evaluate exact and
Monte-Carlo risks, measure forgetting, and verify the high-probability risk
bounds on seeded parameter sweeps.
"""

from .bounds import (BoundSheet, TrialChecks, bound_forgetting, bound_projection,
                     bound_ratio, bound_single, bound_terminal, check_trial,
                     forgetting_premise_holds, premise_holds)
from .estimators import (EstimatorParams, fit_gd, fit_sequential, fit_task_a,
                         fit_task_b, null_estimator, sequential_composition,
                         sequential_gap)
from .experiments import (PointAggregate, SweepResult, SweepSpec, TrialRecord,
                          aggregate_records, run_sweep, run_trial, spearman,
                          trend_check)
from .linalg import (ConsistencyError, HaarRotation, RngStream, SolverError,
                     gaussian_matrix, haar_orthogonal, min_norm_solve,
                     orth_projector_apply, stiefel_frame, svd)
from .model import (FeatureMap, ImplicitCovariance, ModelConfig, SurrogateTask,
                    TaskPair, build_feature_map, derive_induced, sample_rotation_for,
                    sample_surrogate, sample_task_pair)
from .risk import (RiskReport, analytic_risk, analytic_risk_task_b, build_risk_report,
                   empirical_risk, forgetting, forgetting_ratio, projection_energy)

__version__ = "0.1.0"

__all__ = [
    "BoundSheet", "ConsistencyError", "EstimatorParams", "FeatureMap",
    "HaarRotation", "ImplicitCovariance", "ModelConfig", "PointAggregate",
    "RiskReport", "RngStream", "SolverError", "SurrogateTask", "SweepResult",
    "SweepSpec", "TaskPair", "TrialChecks", "TrialRecord", "aggregate_records",
    "analytic_risk", "analytic_risk_task_b", "bound_forgetting", "bound_projection",
    "bound_ratio", "bound_single", "bound_terminal", "build_feature_map",
    "build_risk_report", "check_trial", "derive_induced", "empirical_risk",
    "fit_gd", "fit_sequential", "fit_task_a", "fit_task_b", "forgetting",
    "forgetting_premise_holds", "forgetting_ratio", "gaussian_matrix",
    "haar_orthogonal", "min_norm_solve", "null_estimator", "orth_projector_apply",
    "premise_holds", "projection_energy", "run_sweep", "run_trial",
    "sample_rotation_for", "sample_surrogate", "sample_task_pair",
    "sequential_composition", "sequential_gap", "spearman", "stiefel_frame",
    "svd", "trend_check",
]
