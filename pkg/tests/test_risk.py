"""Exact risk, Monte-Carlo risk, and the forgetting metrics."""

import numpy as np
import pytest

from linforget.estimators import fit_task_a, fit_task_b, null_estimator
from linforget.linalg import HaarRotation, RngStream
from linforget.model import (ModelConfig, build_feature_map, derive_induced,
                             sample_task_pair)
from linforget.risk import (analytic_risk, analytic_risk_task_b, build_risk_report,
                            empirical_risk, forgetting, forgetting_ratio,
                            projection_energy)


def small_setup(seed, d=2, n=4, p=6, gamma=1.3, w_mode="random-rotation"):
    theta = np.zeros(d)
    theta[0] = 0.8
    if d > 1:
        theta[1] = -0.6
    cfg = ModelConfig(d=d, n=n, p=p, gamma=gamma, theta=theta, w_mode=w_mode)
    fm = build_feature_map(cfg, RngStream(seed, 0))
    beta_star, sigma2, cov = derive_induced(cfg, fm)
    return cfg, fm, beta_star, sigma2, cov


class TestAnalyticRisk:
    def test_truth_scores_noise_floor(self):
        _, fm, beta_star, sigma2, _ = small_setup(1)
        assert analytic_risk(beta_star, fm, beta_star, sigma2) == pytest.approx(sigma2, abs=1e-15)

    def test_null_risk_is_theta_norm(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(2)
        r0 = analytic_risk(null_estimator(cfg.p), fm, beta_star, sigma2)
        assert r0 == pytest.approx(cfg.theta_sq, rel=1e-10)

    def test_matches_dense_covariance_oracle(self):
        cfg, fm, beta_star, sigma2, cov = small_setup(3)
        b = RngStream(3, 1).generator().standard_normal(cfg.p)
        dense = sigma2 + (b - beta_star) @ cov.dense() @ (b - beta_star)
        assert analytic_risk(b, fm, beta_star, sigma2) == pytest.approx(dense, rel=1e-10)

    def test_rotation_covariance(self):
        # replacing (W, b, beta_star) by rotated copies leaves the risk fixed
        cfg, fm, beta_star, sigma2, _ = small_setup(4)
        gen = RngStream(4, 1).generator()
        b = gen.standard_normal(cfg.p)
        base = analytic_risk(b, fm, beta_star, sigma2)
        q = HaarRotation.sample_dense(gen, cfg.p).matrix
        from linforget.model import FeatureMap
        fm_rot = FeatureMap(W=q @ fm.W, gamma=fm.gamma, basis=q @ fm.basis)
        rotated = analytic_risk(q @ b, fm_rot, q @ beta_star, sigma2)
        assert rotated == pytest.approx(base, rel=1e-10)

    def test_never_below_noise_floor(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(5)
        gen = RngStream(5, 1).generator()
        for _ in range(50):
            b = gen.standard_normal(cfg.p)
            assert analytic_risk(b, fm, beta_star, sigma2) >= sigma2


class TestAnalyticRiskTaskB:
    def test_rotated_truth_scores_noise_floor(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(6)
        rot = HaarRotation.sample_dense(RngStream(6, 1), cfg.p)
        r = analytic_risk_task_b(rot.apply(beta_star), fm, rot, beta_star, sigma2)
        assert r == pytest.approx(sigma2, abs=1e-14)

    def test_identity_rotation_reduces_to_task_a(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(7)
        b = RngStream(7, 1).generator().standard_normal(cfg.p)
        ident = HaarRotation.identity(cfg.p)
        assert analytic_risk_task_b(b, fm, ident, beta_star, sigma2) == pytest.approx(
            analytic_risk(b, fm, beta_star, sigma2), rel=1e-12)

    def test_matches_dense_rotated_covariance(self):
        cfg, fm, beta_star, sigma2, cov = small_setup(8)
        gen = RngStream(8, 1).generator()
        rot = HaarRotation.sample_dense(gen, cfg.p)
        b = gen.standard_normal(cfg.p)
        o = rot.matrix
        dense = sigma2 + (b - o @ beta_star) @ (o @ cov.dense() @ o.T) @ (b - o @ beta_star)
        assert analytic_risk_task_b(b, fm, rot, beta_star, sigma2) == pytest.approx(
            dense, rel=1e-9)

    @pytest.mark.parametrize("mode,p", [("dense", 40), ("subspace", 700)])
    def test_task_b_fit_mirrors_task_a_fit(self, mode, p):
        # same draw: the task-B fit on task B scores exactly like the task-A
        # fit on task A
        cfg = ModelConfig.standard(3, 8, p, 1.0)
        fm = build_feature_map(cfg, RngStream(9, 0))
        beta_star, sigma2, _ = derive_induced(cfg, fm)
        tp = sample_task_pair(cfg, fm, RngStream(9, 1), rotation_mode=mode)
        r_a = analytic_risk(fit_task_a(tp), fm, beta_star, sigma2)
        r_b = analytic_risk_task_b(fit_task_b(tp), fm, tp.rotation, beta_star, sigma2)
        assert r_b == pytest.approx(r_a, rel=1e-8)


class TestEmpiricalRisk:
    def test_null_estimator_recovers_theta_norm(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(10, d=2, n=4, p=12)
        mean, se = empirical_risk(null_estimator(cfg.p), cfg, fm, "A", None,
                                  50000, RngStream(10, 1))
        assert abs(mean - cfg.theta_sq) <= 3 * se

    def test_standard_error_scales_with_sample_count(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(11)
        b = fit_task_a(sample_task_pair(cfg, fm, RngStream(11, 1)))
        _, se1 = empirical_risk(b, cfg, fm, "A", None, 4000, RngStream(11, 2))
        _, se4 = empirical_risk(b, cfg, fm, "A", None, 16000, RngStream(11, 3))
        assert se4 == pytest.approx(se1 / 2, rel=0.25)

    def test_projected_and_dense_methods_agree(self):
        cfg = ModelConfig.standard(3, 10, 60, 1.0)
        fm = build_feature_map(cfg, RngStream(12, 0))
        beta_star, sigma2, _ = derive_induced(cfg, fm)
        tp = sample_task_pair(cfg, fm, RngStream(12, 1), rotation_mode="dense")
        for task in ("A", "B"):
            for est in (fit_task_a(tp), fit_task_b(tp)):
                analytic = (analytic_risk(est, fm, beta_star, sigma2) if task == "A" else
                            analytic_risk_task_b(est, fm, tp.rotation, beta_star, sigma2))
                m_proj, se_p = empirical_risk(est, cfg, fm, task, tp.rotation,
                                              60000, RngStream(12, 2), method="projected")
                m_dense, se_d = empirical_risk(est, cfg, fm, task, tp.rotation,
                                               60000, RngStream(12, 3), method="dense")
                assert abs(m_proj - analytic) <= 4 * se_p
                assert abs(m_dense - analytic) <= 4 * se_d
                assert abs(m_proj - m_dense) <= 4 * np.hypot(se_p, se_d)

    def test_surrogate_variant_matches_its_analytic_risk(self):
        cfg = ModelConfig.standard(3, 10, 60, 1.0)
        fm = build_feature_map(cfg, RngStream(13, 0))
        beta_star, sigma2, _ = derive_induced(cfg, fm)
        b = RngStream(13, 1).generator().standard_normal(cfg.p) * 0.1
        analytic = analytic_risk(b, fm, beta_star, sigma2)
        for method in ("projected", "dense"):
            mean, se = empirical_risk(b, cfg, fm, "A", None, 60000, RngStream(13, 2),
                                      method=method, variant="surrogate")
            assert abs(mean - analytic) <= 4 * se

    def test_rejects_tiny_test_sets(self):
        cfg, fm, *_ = small_setup(14)
        with pytest.raises(ValueError):
            empirical_risk(null_estimator(cfg.p), cfg, fm, "A", None, 10, RngStream(14, 1))

    def test_risk_report_bundle(self):
        cfg, fm, beta_star, sigma2, _ = small_setup(15, n=4, p=16)
        tp = sample_task_pair(cfg, fm, RngStream(15, 1))
        est = fit_task_a(tp)
        rep = build_risk_report(est, cfg, fm, "A", tp.rotation, beta_star, sigma2,
                                20000, RngStream(15, 2))
        assert rep.analytic == pytest.approx(analytic_risk(est, fm, beta_star, sigma2))
        assert rep.excess == pytest.approx(rep.analytic - sigma2)
        assert rep.sigma2_floor == sigma2
        assert rep.estimator_provenance == "taskA"
        assert abs(rep.empirical - rep.analytic) <= 4 * rep.empirical_se


class TestForgettingMetrics:
    def test_forgetting_is_plain_difference(self):
        assert forgetting(0.5, 0.2) == pytest.approx(0.3)
        assert forgetting(0.2, 0.5) == pytest.approx(-0.3)  # reported, not clamped
        assert forgetting(0.4, 0.4) == 0.0

    def test_ratio_values(self):
        assert forgetting_ratio(1.0, 0.25, 1.0) == pytest.approx(1.0)
        assert forgetting_ratio(0.25, 0.25, 1.0) == 0.0
        r_ba, r_a, r_null = 0.037, 0.012, 1.0
        assert forgetting_ratio(r_ba, r_a, r_null) == pytest.approx(
            (r_ba - r_a) / (r_null - r_a), rel=1e-15)

    def test_ratio_undefined_when_nothing_learned(self):
        assert forgetting_ratio(0.5, 1.0, 1.0) is None
        assert forgetting_ratio(0.5, 1.2, 1.0) is None


class TestProjectionEnergy:
    def test_in_rowspace_direction_has_no_leak(self):
        gen = RngStream(16, 0).generator()
        X = gen.standard_normal((4, 12))
        v = X.T @ gen.standard_normal(4)
        assert projection_energy(X, v) <= 1e-12

    def test_zero_direction(self):
        X = RngStream(17, 0).generator().standard_normal((3, 9))
        assert projection_energy(X, np.zeros(9)) == 0.0

    def test_matches_explicit_projector(self):
        gen = RngStream(18, 0).generator()
        X = gen.standard_normal((5, 11))
        v = gen.standard_normal(11)
        unit = v / np.linalg.norm(v)
        dense = np.eye(11) - X.T @ np.linalg.inv(X @ X.T) @ X
        assert projection_energy(X, v) == pytest.approx(
            float(unit @ dense @ unit), abs=1e-10)
