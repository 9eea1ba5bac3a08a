"""Random-matrix primitives and minimum-norm solver kernels."""

import numpy as np
import pytest

from linforget.linalg import (HaarRotation, RngStream, SolverError,
                              gaussian_matrix, haar_orthogonal, min_norm_solve,
                              orth_projector_apply, stiefel_frame, svd, sym_square)


class TestRngStream:
    def test_same_address_bit_identical(self):
        a = gaussian_matrix(RngStream(1234, 7), 20, 30)
        b = gaussian_matrix(RngStream(1234, 7), 20, 30)
        assert np.array_equal(a, b)

    def test_distinct_indices_differ(self):
        a = gaussian_matrix(RngStream(1234, 7), 20, 30)
        b = gaussian_matrix(RngStream(1234, 8), 20, 30)
        assert not np.array_equal(a, b)

    def test_large_stream_indices_split_safely(self):
        big = (57 << 32) + 123
        a = RngStream(9, big).generator().standard_normal(4)
        b = RngStream(9, big).generator().standard_normal(4)
        c = RngStream(9, big + 1).generator().standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_substreams_independent(self):
        s = RngStream(5, 3)
        a = s.substream(0).standard_normal(8)
        b = s.substream(1).standard_normal(8)
        assert not np.array_equal(a, b)


class TestGaussianMatrix:
    def test_moments_of_a_million_entries(self):
        x = gaussian_matrix(RngStream(42, 0), 1000, 1000)
        assert abs(x.mean()) <= 4e-3
        assert abs(x.var() - 1.0) <= 6e-3

    def test_rejects_empty_dimensions(self):
        with pytest.raises(ValueError):
            gaussian_matrix(RngStream(0, 0), 0, 3)


class TestHaarOrthogonal:
    def test_orthogonality_p4(self):
        o = haar_orthogonal(RngStream(7, 0), 4)
        assert np.linalg.norm(o.T @ o - np.eye(4)) <= 1e-12
        assert np.linalg.norm(o @ o.T - np.eye(4)) <= 1e-12

    def test_deterministic_given_stream(self):
        a = haar_orthogonal(RngStream(7, 3), 6)
        b = haar_orthogonal(RngStream(7, 3), 6)
        assert np.array_equal(a, b)

    def test_p1_is_sign(self):
        vals = {float(haar_orthogonal(RngStream(0, i), 1)[0, 0]) for i in range(40)}
        assert vals <= {1.0, -1.0}
        assert len(vals) == 2

    def test_entry_moments(self):
        # E[o_ij] = 0 and E[o_ij^2] = 1/p; Monte-Carlo over 2000 draws at p=50
        p, draws = 50, 2000
        vals = np.array([haar_orthogonal(RngStream(100, t), p)[0, 0] for t in range(draws)])
        assert abs(vals.mean()) <= 3.0 * np.sqrt(1.0 / (p * draws))
        assert abs((vals**2).mean() - 1.0 / p) <= 0.1 / p

    def test_left_invariance_proxy(self):
        # for fixed orthogonal Q, first and second moments of Q O match O's
        p, draws = 8, 1500
        q = haar_orthogonal(RngStream(11, 0), p)
        plain = np.zeros((p, p))
        rotated = np.zeros((p, p))
        plain_sq = np.zeros((p, p))
        rotated_sq = np.zeros((p, p))
        for t in range(draws):
            o = haar_orthogonal(RngStream(12, t), p)
            plain += o
            plain_sq += o**2
            qo = q @ o
            rotated += qo
            rotated_sq += qo**2
        tol_mean = 4.0 * np.sqrt(1.0 / (p * draws))
        assert np.max(np.abs(plain - rotated)) / draws <= 2 * tol_mean
        assert np.max(np.abs(plain_sq / draws - 1.0 / p)) <= 0.35 / p
        assert np.max(np.abs(rotated_sq / draws - 1.0 / p)) <= 0.35 / p

    def test_stiefel_frame_matches_haar_columns(self):
        # same law as the leading columns of a full Haar matrix: spot moments
        p, k, draws = 12, 3, 2000
        frame_sq = np.zeros((p, k))
        haar_sq = np.zeros((p, k))
        for t in range(draws):
            frame_sq += stiefel_frame(RngStream(13, t), p, k) ** 2
            haar_sq += haar_orthogonal(RngStream(14, t), p)[:, :k] ** 2
        assert np.max(np.abs(frame_sq - haar_sq)) / draws <= 0.3 / p
        f = stiefel_frame(RngStream(13, 0), p, k)
        assert np.linalg.norm(f.T @ f - np.eye(k)) <= 1e-12


class TestMinNormSolve:
    def test_identity_block(self):
        X = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        beta = min_norm_solve(X, np.array([2.0, 3.0]), np.zeros(3))
        assert np.allclose(beta, [2.0, 3.0, 0.0], atol=1e-12)

    def test_interpolating_init_returned_unchanged(self):
        rng = RngStream(21, 0).generator()
        X = rng.standard_normal((4, 9))
        beta0 = rng.standard_normal(9)
        y = X @ beta0
        beta = min_norm_solve(X, y, beta0)
        assert np.linalg.norm(beta - beta0) <= 1e-10 * np.linalg.norm(beta0)

    def test_matches_svd_pseudoinverse(self):
        rng = RngStream(22, 0).generator()
        X = rng.standard_normal((3, 5))
        y = rng.standard_normal(3)
        beta0 = rng.standard_normal(5)
        beta = min_norm_solve(X, y, beta0)
        oracle = beta0 + np.linalg.pinv(X) @ (y - X @ beta0)
        assert np.linalg.norm(beta - oracle) <= 1e-8 * np.linalg.norm(oracle)

    def test_interpolation_residual(self):
        rng = RngStream(23, 0).generator()
        X = rng.standard_normal((6, 14))
        y = rng.standard_normal(6)
        beta = min_norm_solve(X, y, None)
        assert np.linalg.norm(X @ beta - y) <= 1e-8 * np.linalg.norm(y)

    def test_minimum_distance_among_interpolators(self):
        # no interpolating beta0 + rowspace-complement perturbation is closer
        gen = np.random.default_rng(77)
        for trial in range(20):
            n = int(gen.integers(2, 7))
            p = int(gen.integers(n + 1, 11))
            X = gen.standard_normal((n, p))
            y = gen.standard_normal(n)
            beta0 = gen.standard_normal(p)
            beta = min_norm_solve(X, y, beta0)
            base = np.linalg.norm(beta - beta0)
            _, _, vt = np.linalg.svd(X)
            null_basis = vt[n:]
            others = beta + gen.standard_normal((1000, p - n)) @ null_basis
            residuals = np.linalg.norm(others @ X.T - y, axis=1)
            assert np.max(residuals) <= 1e-7 * max(np.linalg.norm(y), 1.0)
            assert np.all(base <= np.linalg.norm(others - beta0, axis=1) + 1e-12)

    def test_rank_deficient_raises(self):
        X = np.ones((3, 6))
        with pytest.raises(SolverError):
            min_norm_solve(X, np.array([1.0, 2.0, 3.0]), None)

    def test_overdetermined_rejected(self):
        with pytest.raises(SolverError):
            min_norm_solve(np.ones((5, 3)), np.ones(5), None)


class TestOrthProjector:
    def test_vector_in_rowspace_has_no_residual(self):
        rng = RngStream(31, 0).generator()
        X = rng.standard_normal((4, 10))
        v = X.T @ rng.standard_normal(4)
        onto, resid = orth_projector_apply(X, v)
        assert np.linalg.norm(resid) <= 1e-8 * np.linalg.norm(v)
        assert np.allclose(onto + resid, v)

    def test_orthogonal_vector_maps_to_zero(self):
        rng = RngStream(32, 0).generator()
        X = rng.standard_normal((3, 8))
        v = rng.standard_normal(8)
        q, _ = np.linalg.qr(X.T)
        v -= q @ (q.T @ v)
        onto, resid = orth_projector_apply(X, v)
        assert np.linalg.norm(onto) <= 1e-8 * np.linalg.norm(v)

    def test_matches_dense_projector(self):
        rng = RngStream(33, 0).generator()
        X = rng.standard_normal((5, 12))
        v = rng.standard_normal(12)
        onto, resid = orth_projector_apply(X, v)
        dense = X.T @ np.linalg.inv(X @ X.T) @ X
        assert np.allclose(onto, dense @ v, atol=1e-8)
        assert np.allclose(resid, v - dense @ v, atol=1e-8)


class TestSvd:
    def test_identity(self):
        _, s, _ = svd(np.eye(5))
        assert np.allclose(s, 1.0, atol=1e-12)

    def test_diagonal(self):
        _, s, _ = svd(np.diag([3.0, 2.0, 1.0]))
        assert np.allclose(s, [3.0, 2.0, 1.0], atol=1e-12)

    def test_reconstruction_and_gram_eigenvalue_oracle(self):
        X = gaussian_matrix(RngStream(41, 0), 4, 6)
        u, s, v = svd(X)
        recon = u @ np.diag(s) @ v.T
        assert np.linalg.norm(recon - X) <= 1e-10 * np.linalg.norm(X)
        assert np.all(np.diff(s) <= 0)
        eigs = np.linalg.eigvalsh(X @ X.T)[::-1]
        assert np.allclose(s, np.sqrt(np.maximum(eigs, 0.0)), atol=1e-9)


class TestSymSquare:
    def test_matches_matmul_both_orientations(self):
        x = gaussian_matrix(RngStream(51, 0), 9, 17)
        assert np.allclose(sym_square(x), x @ x.T, atol=1e-12)
        assert np.allclose(sym_square(x, transpose=True), x.T @ x, atol=1e-12)
        xf = np.asfortranarray(x)
        assert np.allclose(sym_square(xf), x @ x.T, atol=1e-12)


class TestHaarRotation:
    def _span_rotation(self, seed, p=40, k=7):
        gen = RngStream(seed, 0).generator()
        span = gen.standard_normal((p, k))
        rot = HaarRotation.sample_on_span(gen, span)
        return span, rot

    def test_subspace_preserves_inner_products(self):
        span, rot = self._span_rotation(61)
        images = rot.apply(span)
        assert np.allclose(images.T @ images, span.T @ span, atol=1e-9)

    def test_apply_then_apply_t_is_identity_on_span(self):
        span, rot = self._span_rotation(62)
        v = span @ RngStream(62, 1).generator().standard_normal(span.shape[1])
        back = rot.apply_t(rot.apply(v))
        assert np.allclose(back, v, atol=1e-9 * np.linalg.norm(v))

    def test_rejects_vectors_outside_span(self):
        span, rot = self._span_rotation(63)
        q, _ = np.linalg.qr(span)
        outside = RngStream(63, 1).generator().standard_normal(span.shape[0])
        outside -= q @ (q.T @ outside)
        with pytest.raises(SolverError):
            rot.apply(outside)

    def test_image_block_matches_apply(self):
        span, rot = self._span_rotation(64)
        block = rot.image_block(0, 3)
        assert np.allclose(block, rot.apply(span[:, :3]), atol=1e-9)

    def test_subspace_images_match_haar_sphere_moments(self):
        # the image of a fixed unit vector must be uniform on the sphere
        p, draws = 16, 3000
        first_sq = np.zeros(p)
        for t in range(draws):
            gen = RngStream(65, t).generator()
            span = np.eye(p)[:, :2]
            rot = HaarRotation.sample_on_span(gen, span)
            img = rot.apply(span[:, 0])
            first_sq += img**2
        first_sq /= draws
        assert np.max(np.abs(first_sq - 1.0 / p)) <= 0.35 / p

    def test_dense_identity_backends(self):
        o = HaarRotation.sample_dense(RngStream(66, 0), 9)
        v = RngStream(66, 1).generator().standard_normal(9)
        assert np.allclose(o.apply_t(o.apply(v)), v, atol=1e-12)
        assert np.allclose(o.matrix @ v, o.apply(v), atol=1e-12)
        ident = HaarRotation.identity(9)
        assert np.allclose(ident.apply(v), v)
        assert np.allclose(ident.rotate_rows(v[None, :]), v[None, :])

    def test_rotate_rows_is_right_multiplication(self):
        o = HaarRotation.sample_dense(RngStream(67, 0), 6)
        X = RngStream(67, 1).generator().standard_normal((4, 6))
        assert np.allclose(o.rotate_rows(X), X @ o.matrix.T, atol=1e-12)


class TestScaledBlockSingularValues:
    def test_concentration_window(self):
        # normalized signal block: singular values inside sqrt(n) +/- 2 sqrt(d)
        d, n, trials = 20, 400, 120
        lo, hi = np.sqrt(n) - 2 * np.sqrt(d), np.sqrt(n) + 2 * np.sqrt(d)
        inside = 0
        for t in range(trials):
            block = gaussian_matrix(RngStream(71, t), n, d)
            s = np.linalg.svd(block, compute_uv=False)
            inside += bool(s[-1] >= lo and s[0] <= hi)
        assert inside >= 0.99 * trials
