"""Seeded random-matrix primitives and minimum-norm least-squares kernels.

Everything in this module is a pure function of its inputs, including the
random stream, so results reproduce bit for bit on any execution schedule.
Matrices are plain float64 ndarrays and are never mutated after creation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import dsyrk

# Relative tolerances get an absolute floor so zero-valued inputs stay testable.
ABS_FLOOR = 1e-14

# Gram matrices worse conditioned than this are routed to the SVD path.
CONDITION_LIMIT = 1e12


class SolverError(RuntimeError):
    """A linear-algebra kernel could not produce a reliable result
    (rank deficiency, factorization breakdown, or non-convergence)."""


class ConsistencyError(RuntimeError):
    """Two redundant computations of the same quantity disagreed beyond
    tolerance; indicates a numerical or logic fault, never silent garbage."""


@dataclass(frozen=True)
class RngStream:
    """Collision-free random stream addressed by (root_seed, stream_index).

    The same address always yields the same generator; distinct indices give
    statistically independent streams.  The 64-bit index is split into two
    32-bit words for the seed-sequence spawn key.
    """

    root_seed: int
    stream_index: int = 0

    def _key(self) -> tuple[int, int]:
        hi, lo = divmod(int(self.stream_index), 1 << 32)
        return hi, lo

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.root_seed, spawn_key=self._key())
        return np.random.default_rng(seq)

    def substream(self, lane: int) -> np.random.Generator:
        """Independent generator for one named lane of this stream."""
        hi, lo = self._key()
        seq = np.random.SeedSequence(self.root_seed, spawn_key=(hi, lo, lane))
        return np.random.default_rng(seq)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator, or an integer seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def gaussian_matrix(rng, rows: int, cols: int) -> np.ndarray:
    """Dense rows x cols matrix with i.i.d. standard normal entries."""
    if rows < 1 or cols < 1:
        raise ValueError(f"dimensions must be positive, got {rows}x{cols}")
    return as_generator(rng).standard_normal((rows, cols))


def haar_orthogonal(rng, p: int) -> np.ndarray:
    """Uniformly (Haar) distributed p x p orthogonal matrix.

    QR of a Gaussian matrix with the R diagonal forced positive; without the
    sign correction the Q factor is not Haar distributed.
    """
    if p < 1:
        raise ValueError(f"dimension must be positive, got {p}")
    g = as_generator(rng).standard_normal((p, p))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    if np.any(d == 0.0):
        raise SolverError("QR breakdown while sampling an orthogonal matrix")
    return q * np.sign(d)


def stiefel_frame(rng, p: int, k: int) -> np.ndarray:
    """Uniformly distributed p x k orthonormal frame.

    Same distribution as the first k columns of a Haar orthogonal p x p
    matrix, sampled directly so tall frames never cost a p x p factorization.
    """
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    g = as_generator(rng).standard_normal((p, k))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    if np.any(d == 0.0):
        raise SolverError("QR breakdown while sampling an orthonormal frame")
    return q * np.sign(d)


def sym_square(X: np.ndarray, transpose: bool = False) -> np.ndarray:
    """X Xᵀ (or Xᵀ X) through a symmetric rank-k update, both triangles filled."""
    a = np.ascontiguousarray(X, dtype=float)
    c = dsyrk(1.0, a, trans=1 if transpose else 0)
    return c + np.triu(c, 1).T


def _polar_frame_mix(gen: np.random.Generator, p: int, k: int, right: np.ndarray) -> np.ndarray:
    """F @ right for a uniform random p x k frame F, without materializing F.

    F comes from the polar decomposition of a Gaussian matrix (identical in
    distribution to stiefel_frame); folding the k x k factor `right` into the
    inverse square root saves one large multiply.
    """
    g = gen.standard_normal((p, k))
    s = sym_square(g, transpose=True)
    w, e = np.linalg.eigh(s)
    if w[0] <= 0.0:
        raise SolverError("degenerate Gaussian frame (probability-zero event)")
    return g @ ((e / np.sqrt(w)) @ (e.T @ right))


def gram_solver(X: np.ndarray):
    """Factor X Xᵀ once and return a solve(rhs) closure.

    Cholesky is the fast path; when the estimated condition number exceeds
    CONDITION_LIMIT (or the factorization fails) the solver falls back to the
    SVD of X, and raises SolverError on genuine rank deficiency.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    if n > p:
        raise SolverError(f"underdetermined systems only: n={n} exceeds p={p}")
    G = sym_square(X)
    try:
        c, low = sla.cho_factor(G, check_finite=False)
    except np.linalg.LinAlgError:
        c = None
    if c is not None:
        anorm = float(np.linalg.norm(G, 1))
        rcond, info = sla.lapack.dpocon(c, anorm, uplo=b"L" if low else b"U")
        if info == 0 and rcond * CONDITION_LIMIT >= 1.0:
            return lambda rhs: sla.cho_solve((c, low), rhs, check_finite=False)
    u, s, _ = np.linalg.svd(X, full_matrices=False)
    tol = s[0] * max(n, p) * np.finfo(float).eps if s.size else 0.0
    if int(np.sum(s > tol)) < n:
        raise SolverError(
            f"rank-deficient {n}x{p} system: Gram matrix is numerically singular"
        )
    return lambda rhs: u @ ((u.T @ rhs) / s**2)


def min_norm_solve(X: np.ndarray, y: np.ndarray, beta0: np.ndarray | None = None) -> np.ndarray:
    """Interpolator closest to beta0: argmin ||b - beta0|| s.t. X b = y.

    Solves the n x n system (X Xᵀ) s = y - X beta0 and lifts the correction
    back through Xᵀ, so beta0 is only ever moved inside the row space of X.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if beta0 is None:
        beta0 = np.zeros(X.shape[1])
    solve = gram_solver(X)
    return beta0 + X.T @ solve(y - X @ beta0)


def orth_projector_apply(X: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split v into (onto, residual): its row-space component and the rest.

    onto lies in range(Xᵀ), residual is orthogonal to it, and they sum to v.
    """
    X = np.asarray(X, dtype=float)
    v = np.asarray(v, dtype=float)
    solve = gram_solver(X)
    onto = X.T @ solve(X @ v)
    return onto, v - onto


def svd(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with X = U @ diag(s) @ V.T, singular values descending."""
    try:
        u, s, vt = np.linalg.svd(np.asarray(X, dtype=float), full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"SVD did not converge: {exc}") from exc
    return u, s, vt.T


class HaarRotation:
    """The action of a Haar-distributed p x p orthogonal matrix O.

    Three backends share one interface:

    * ``dense``    -- O materialized, any vector can be rotated.
    * ``subspace`` -- O realized exactly on a stated column span; images of a
      basis are drawn uniformly on the Stiefel manifold, which matches the
      law of a dense Haar matrix restricted to that span.  Applications to
      vectors outside the span raise SolverError.  This keeps the p=10^4+
      regime at O(p k^2) instead of O(p^3).
    * ``identity`` -- O = I, a diagnostic mode for zero-forgetting checks.
    """

    def __init__(self, p: int, kind: str, *, matrix=None, span=None, images=None, chol=None):
        self.p = int(p)
        self.kind = kind
        self._matrix = matrix
        self._span = span
        self._images = images
        self._chol = chol

    @classmethod
    def sample_dense(cls, rng, p: int) -> "HaarRotation":
        return cls(p, "dense", matrix=haar_orthogonal(rng, p))

    @classmethod
    def identity(cls, p: int) -> "HaarRotation":
        return cls(p, "identity")

    @classmethod
    def sample_on_span(cls, rng, span: np.ndarray) -> "HaarRotation":
        """Haar action restricted to the column span of ``span`` (p x k).

        With C = spanᵀ span = L Lᵀ, the columns of span are B Lᵀ for an
        orthonormal B, and O B is a uniform random frame F; the images of the
        span columns are therefore F Lᵀ, sampled without ever forming B or O.
        """
        span = np.asarray(span, dtype=float)
        p, k = span.shape
        if k > p:
            raise ValueError(f"span has more columns ({k}) than rows ({p})")
        gen = as_generator(rng)
        C = sym_square(span, transpose=True)
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError as exc:
            raise SolverError("span columns are numerically dependent") from exc
        images = _polar_frame_mix(gen, p, k, L.T)
        return cls(p, "subspace", span=span, images=images, chol=L)

    @classmethod
    def from_matrix(cls, O: np.ndarray) -> "HaarRotation":
        O = np.asarray(O, dtype=float)
        if O.shape[0] != O.shape[1]:
            raise ValueError("rotation matrix must be square")
        return cls(O.shape[0], "dense", matrix=O)

    @property
    def matrix(self) -> np.ndarray:
        if self.kind == "dense":
            return self._matrix
        if self.kind == "identity":
            return np.eye(self.p)
        raise SolverError("subspace rotation has no materialized matrix")

    def _coords(self, anchor: np.ndarray, M: np.ndarray) -> np.ndarray:
        if M.ndim == 1:
            M = M[:, None]
            squeeze = True
        else:
            squeeze = False
        proj = anchor.T @ M
        coords = sla.cho_solve((self._chol, True), proj, check_finite=False)
        # |M - anchor @ coords|^2 = |M|^2 - <coords, proj>; the cancellation
        # floor (~1e-8 relative) is far below any genuine span violation
        m_sq = float(np.sum(M * M))
        resid_sq = max(m_sq - float(np.sum(coords * proj)), 0.0)
        if resid_sq > (1e-6 * max(np.sqrt(m_sq), ABS_FLOOR)) ** 2:
            raise SolverError(
                "vector lies outside the subspace this rotation is defined on"
            )
        return coords[:, 0] if squeeze else coords

    def apply(self, M: np.ndarray) -> np.ndarray:
        """O @ M for a vector or a matrix of column vectors."""
        M = np.asarray(M, dtype=float)
        if self.kind == "identity":
            return M.copy()
        if self.kind == "dense":
            return self._matrix @ M
        return self._images @ self._coords(self._span, M)

    def apply_t(self, M: np.ndarray) -> np.ndarray:
        """Oᵀ @ M for a vector or a matrix of column vectors."""
        M = np.asarray(M, dtype=float)
        if self.kind == "identity":
            return M.copy()
        if self.kind == "dense":
            return self._matrix.T @ M
        return self._span @ self._coords(self._images, M)

    def rotate_rows(self, X: np.ndarray) -> np.ndarray:
        """X @ Oᵀ: rotate each row of X by O."""
        return np.ascontiguousarray(self.apply(np.asarray(X, dtype=float).T).T)

    def image_block(self, start: int, stop: int) -> np.ndarray:
        """Images of span columns [start, stop), exact and solve-free.

        Only the subspace backend has stored images; callers that built the
        span own its column layout.
        """
        if self.kind != "subspace":
            raise SolverError("image_block is only defined for subspace rotations")
        return self._images[:, start:stop]
