"""Exact and Monte-Carlo prediction risk on either task, plus forgetting metrics.

The population risk of a parameter vector b is
sigma2 + (b - beta_star)ᵀ (W Wᵀ + I) (b - beta_star); the quadratic form is
evaluated through the d-dimensional projection onto range(W), never through
the dense p x p covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import EstimatorParams, coefficients
from .linalg import HaarRotation, as_generator, orth_projector_apply
from .model import FeatureMap, ModelConfig, derive_induced

MIN_TEST_SAMPLES = 1000


def analytic_risk(est, fm: FeatureMap, beta_star: np.ndarray, sigma2: float) -> float:
    """Exact risk on the original task.

    Equals sigma2 + |delta|^2 + p*gamma*|basisᵀ delta|^2 with
    delta = b - beta_star, exact up to floating point.
    """
    delta = coefficients(est) - beta_star
    inside = fm.basis.T @ delta
    return float(sigma2 + delta @ delta + fm.signal_scale * (inside @ inside))


def analytic_risk_task_b(est, fm: FeatureMap, rotation: HaarRotation,
                         beta_star: np.ndarray, sigma2: float) -> float:
    """Exact risk on the rotated task, whose truth is (O beta_star) under the
    rotated covariance; evaluated through the rotated range(W) basis."""
    rotated = rotation.apply(np.column_stack([fm.basis, beta_star]))
    basis_b, beta_b = rotated[:, :-1], rotated[:, -1]
    delta = coefficients(est) - beta_b
    inside = basis_b.T @ delta
    return float(sigma2 + delta @ delta + fm.signal_scale * (inside @ inside))


def empirical_risk(est, cfg: ModelConfig, fm: FeatureMap, task: str,
                   rotation: HaarRotation | None, n_test: int, rng, *,
                   method: str = "projected", variant: str = "latent") -> tuple[float, float]:
    """Monte-Carlo mean squared prediction error on fresh test draws.

    Returns (mean, standard error).  Task "B" draws are the task-A draws
    rotated by the task rotation.

    method "dense" materializes every p-dimensional test point; "projected"
    samples the prediction errors through their exact low-dimensional
    distribution (each test error is a linear functional of the Gaussian
    draws), which is identical in law and keeps n_test * p out of memory.
    """
    if n_test < MIN_TEST_SAMPLES:
        raise ValueError(f"need n_test >= {MIN_TEST_SAMPLES}, got {n_test}")
    if task not in ("A", "B"):
        raise ValueError(f"task must be 'A' or 'B', got {task!r}")
    if variant not in ("latent", "surrogate"):
        raise ValueError(f"variant must be 'latent' or 'surrogate', got {variant!r}")
    if task == "B" and rotation is None:
        raise ValueError("task B evaluation needs the task rotation")
    gen = as_generator(rng)

    if method == "projected":
        b = coefficients(est)
        if task == "B":
            # predicting on rotated features with b is predicting on the
            # originals with the back-rotated vector
            b = rotation.apply_t(b)
        errors = _projected_errors(b, cfg, fm, variant, n_test, gen)
    elif method == "dense":
        errors = _dense_errors(est, cfg, fm, task, rotation, variant, n_test, gen)
    else:
        raise ValueError(f"unknown method {method!r}")
    sq = errors**2
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(n_test))


def _projected_errors(b, cfg, fm, variant, n_test, gen):
    # x = W z + u makes the prediction error z.(Wᵀb - theta) + u.b for the
    # latent draws; u enters only through u.b ~ N(0, |b|^2), sampled directly.
    z = gen.standard_normal((n_test, cfg.d))
    g = gen.standard_normal(n_test)
    if variant == "latent":
        along = fm.W.T @ b - cfg.theta
        return z @ along + np.linalg.norm(b) * g
    beta_star, sigma2, _ = derive_induced(cfg, fm)
    delta = b - beta_star
    noise = np.sqrt(sigma2) * gen.standard_normal(n_test)
    return z @ (fm.W.T @ delta) + np.linalg.norm(delta) * g - noise


def _dense_errors(est, cfg, fm, task, rotation, variant, n_test, gen):
    z = gen.standard_normal((n_test, cfg.d))
    u = gen.standard_normal((n_test, cfg.p))
    X = z @ fm.W.T + u
    if variant == "latent":
        y = z @ cfg.theta
    else:
        beta_star, sigma2, _ = derive_induced(cfg, fm)
        y = X @ beta_star + np.sqrt(sigma2) * gen.standard_normal(n_test)
    if task == "B":
        # the truth rotates with the features, so the responses are unchanged
        X = rotation.rotate_rows(X)
    return X @ coefficients(est) - y


def forgetting(r_ba: float, r_a: float) -> float:
    """Risk increase on the first task caused by the later fit; negative
    finite-sample values are reported as-is, never clamped."""
    return r_ba - r_a


def forgetting_ratio(r_ba: float, r_a: float, r_null: float) -> float | None:
    """Forgetting normalized by how much was learned over the zero predictor.

    None when the denominator is not positive (the first task was not
    learned at all), so undefined ratios can be counted rather than averaged.
    """
    learned = r_null - r_a
    if learned <= 0.0:
        return None
    return (r_ba - r_a) / learned


def projection_energy(X: np.ndarray, direction: np.ndarray) -> float:
    """Squared norm of the unit direction's component outside rowspace(X).

    The direction is normalized first; a zero direction returns 0.
    """
    direction = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        return 0.0
    _, resid = orth_projector_apply(X, direction / norm)
    return float(resid @ resid)


@dataclass(frozen=True)
class RiskReport:
    """Analytic and Monte-Carlo risk of one estimator on one task."""

    analytic: float
    empirical: float
    empirical_se: float
    sigma2_floor: float
    excess: float
    task: str
    estimator_provenance: str


def build_risk_report(est: EstimatorParams, cfg: ModelConfig, fm: FeatureMap, task: str,
                      rotation: HaarRotation | None, beta_star: np.ndarray, sigma2: float,
                      n_test: int, rng, *, variant: str = "latent") -> RiskReport:
    """Evaluate one estimator both ways and package the decomposition."""
    if task == "A":
        analytic = analytic_risk(est, fm, beta_star, sigma2)
    else:
        analytic = analytic_risk_task_b(est, fm, rotation, beta_star, sigma2)
    mean, se = empirical_risk(est, cfg, fm, task, rotation, n_test, rng, variant=variant)
    return RiskReport(analytic=analytic, empirical=mean, empirical_se=se,
                      sigma2_floor=sigma2, excess=analytic - sigma2, task=task,
                      estimator_provenance=est.provenance)
