"""Closed-form sequential least-squares estimators and a gradient-descent oracle.

Fitting a task means interpolating its data with the parameter vector
closest to the initialization; training on task A from zero and then on
task B from the task-A solution gives the sequential estimator.  The
iterative oracle exists purely to certify the closed forms: plain full-batch
gradient descent converges to the same minimum-distance interpolator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (ABS_FLOOR, ConsistencyError, SolverError, min_norm_solve,
                     orth_projector_apply)
from .model import TaskPair

PROVENANCES = ("taskA", "taskB", "sequentialBA", "null", "gd_oracle")

# The two constructions of the sequential fit must agree this tightly.
SEQUENTIAL_GAP_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EstimatorParams:
    """A fitted p-vector tagged with how it was produced and where it started."""

    beta_hat: np.ndarray
    provenance: str
    init: np.ndarray

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")


def coefficients(est) -> np.ndarray:
    """Coefficient vector of an EstimatorParams or a bare array."""
    if isinstance(est, EstimatorParams):
        return est.beta_hat
    return np.asarray(est, dtype=float)


def null_estimator(p: int) -> EstimatorParams:
    return EstimatorParams(beta_hat=np.zeros(p), provenance="null", init=np.zeros(p))


def fit_task_a(tp: TaskPair) -> EstimatorParams:
    """Minimum-norm interpolator of task A from zero initialization."""
    zero = np.zeros(tp.X_A.shape[1])
    return EstimatorParams(beta_hat=min_norm_solve(tp.X_A, tp.y, zero),
                           provenance="taskA", init=zero)


def fit_task_b(tp: TaskPair) -> EstimatorParams:
    """Minimum-norm interpolator of task B from zero initialization."""
    zero = np.zeros(tp.X_B.shape[1])
    return EstimatorParams(beta_hat=min_norm_solve(tp.X_B, tp.y, zero),
                           provenance="taskB", init=zero)


def sequential_composition(tp: TaskPair, beta_a: EstimatorParams,
                           beta_b: EstimatorParams) -> np.ndarray:
    """Explicit three-term form of the sequential fit:
    beta_a + beta_b - (projection of beta_a onto rowspace of X_B)."""
    onto, _ = orth_projector_apply(tp.X_B, beta_a.beta_hat)
    return beta_a.beta_hat + beta_b.beta_hat - onto


def sequential_gap(tp: TaskPair, beta_a: EstimatorParams, beta_b: EstimatorParams,
                   beta_ba: EstimatorParams) -> float:
    """Relative disagreement between the two sequential-fit constructions."""
    comp = sequential_composition(tp, beta_a, beta_b)
    ref = max(float(np.linalg.norm(beta_ba.beta_hat)), ABS_FLOOR)
    return float(np.linalg.norm(comp - beta_ba.beta_hat)) / ref


def fit_sequential_with_gap(tp: TaskPair, beta_a: EstimatorParams,
                            beta_b: EstimatorParams | None = None
                            ) -> tuple[EstimatorParams, float]:
    """Fit task B starting from the task-A solution; also report the gap.

    Computed as the minimum-distance interpolator of task B initialized at
    beta_a, then cross-checked against the explicit three-term composition;
    the two independent constructions must coincide to SEQUENTIAL_GAP_TOL.
    """
    if beta_a.provenance != "taskA":
        raise ValueError(f"sequential fit starts from a taskA solution, got {beta_a.provenance!r}")
    fitted = EstimatorParams(beta_hat=min_norm_solve(tp.X_B, tp.y, beta_a.beta_hat),
                             provenance="sequentialBA", init=beta_a.beta_hat)
    if beta_b is None:
        beta_b = fit_task_b(tp)
    gap = sequential_gap(tp, beta_a, beta_b, fitted)
    if gap > SEQUENTIAL_GAP_TOL:
        raise ConsistencyError(
            f"sequential fit paths disagree: relative gap {gap:.3e} > {SEQUENTIAL_GAP_TOL:.0e}"
        )
    return fitted, gap


def fit_sequential(tp: TaskPair, beta_a: EstimatorParams,
                   beta_b: EstimatorParams | None = None) -> EstimatorParams:
    """Fit task B starting from the task-A solution (cross-checked)."""
    fitted, _ = fit_sequential_with_gap(tp, beta_a, beta_b)
    return fitted


def fit_gd(X: np.ndarray, y: np.ndarray, beta0: np.ndarray, *, step: float | None = None,
           tol: float = 1e-10, max_iters: int = 500_000) -> EstimatorParams:
    """Full-batch gradient descent on 0.5 * ||X b - y||^2 from beta0.

    Stops when the gradient norm falls below tol * ||Xᵀ y||.  The default
    step is 1 / lambda_max(XᵀX), half the stability limit, so convergence is
    monotone without tuning; steps at or past 2 / lambda_max are rejected.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    beta0 = np.asarray(beta0, dtype=float)
    smax_sq = float(np.linalg.svd(X, compute_uv=False)[0] ** 2)
    if smax_sq == 0.0:
        return EstimatorParams(beta_hat=beta0.copy(), provenance="gd_oracle", init=beta0.copy())
    if step is None:
        step = 1.0 / smax_sq
    elif not 0.0 < step < 2.0 / smax_sq:
        raise ValueError(f"step {step} outside the stable range (0, {2.0 / smax_sq})")
    ref = max(float(np.linalg.norm(X.T @ y)), ABS_FLOOR)
    beta = beta0.copy()
    for _ in range(max_iters):
        grad = X.T @ (X @ beta - y)
        if float(np.linalg.norm(grad)) <= tol * ref:
            return EstimatorParams(beta_hat=beta, provenance="gd_oracle", init=beta0.copy())
        beta -= step * grad
    raise SolverError(
        f"gradient descent did not reach tolerance {tol:g} within {max_iters} iterations"
    )
