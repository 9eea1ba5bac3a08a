"""Problem-instance construction for the two-task latent feature model.

A task draws latent Gaussian factors z in R^d, emits noiseless responses
y = z . theta, and exposes only a noisy p-dimensional view x = W z + u of
the latents.  The feature map W has orthogonal columns of common squared
length p*gamma, so gamma acts as a signal-to-noise knob.  A second task sees
the same responses through an orthogonally rotated copy of the features.

The surrogate variant moves all randomness onto the responses instead
(rows of A carry the full feature covariance, y = A beta + eps); it induces
the same risk law and is the form in which the tail bounds are stated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .linalg import HaarRotation, RngStream, as_generator, stiefel_frame

W_MODES = ("axis-aligned", "random-rotation")

# Dense rotations cost O(p^3); above this size the subspace backend is used.
DENSE_ROTATION_LIMIT = 512


@dataclass(frozen=True, eq=False)
class ModelConfig:
    """One problem-instance family: dimensions, signal scale, and seed."""

    d: int
    n: int
    p: int
    gamma: float
    theta: np.ndarray
    w_mode: str = "axis-aligned"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float).reshape(-1))
        if self.d < 1:
            raise ValueError(f"latent dimension must be positive, got d={self.d}")
        if self.n < self.d:
            raise ValueError(f"need sample count n >= d, got n={self.n}, d={self.d}")
        if self.p < self.n:
            raise ValueError(f"need feature dimension p >= n, got p={self.p}, n={self.n}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.theta.shape != (self.d,):
            raise ValueError(f"theta must have length d={self.d}, got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta must be finite")
        if self.w_mode not in W_MODES:
            raise ValueError(f"w_mode must be one of {W_MODES}, got {self.w_mode!r}")

    @property
    def theta_sq(self) -> float:
        return float(self.theta @ self.theta)

    @classmethod
    def standard(cls, d: int, n: int, p: int, gamma: float, *, theta_norm: float = 1.0,
                 w_mode: str = "axis-aligned", seed: int = 0) -> "ModelConfig":
        """Config with theta along the first latent axis, scaled to theta_norm.

        Risks and bounds depend on theta only through its norm, so this is
        the cheapest representative of the family.
        """
        if d < 1:
            raise ValueError(f"latent dimension must be positive, got d={d}")
        theta = np.zeros(d)
        theta[0] = theta_norm
        return cls(d=d, n=n, p=p, gamma=gamma, theta=theta, w_mode=w_mode, seed=seed)

    def with_theta(self, theta: np.ndarray) -> "ModelConfig":
        return replace(self, theta=theta)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Feature map W = sqrt(p*gamma) * basis with an orthonormal p x d basis."""

    W: np.ndarray
    gamma: float
    basis: np.ndarray

    def __post_init__(self):
        p, d = self.W.shape
        scale = p * self.gamma
        defect = np.linalg.norm(self.W.T @ self.W - scale * np.eye(d))
        if defect > 1e-10 * scale * np.sqrt(d):
            raise ValueError(f"feature map columns not orthogonal with norm^2 {scale}")

    @property
    def p(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def signal_scale(self) -> float:
        """p * gamma, the common squared column length of W."""
        return self.W.shape[0] * self.gamma


@dataclass(frozen=True, eq=False)
class ImplicitCovariance:
    """Feature covariance W Wᵀ + I held as (p, gamma, basis of range W).

    The quadratic form v ᵀ (W Wᵀ + I) v equals |v|^2 + p*gamma*|basisᵀ v|^2,
    so risks never need the dense p x p matrix.
    """

    p: int
    gamma: float
    basis: np.ndarray

    def quad_form(self, v: np.ndarray) -> float:
        inside = self.basis.T @ v
        return float(v @ v) + self.p * self.gamma * float(inside @ inside)

    def dense(self) -> np.ndarray:
        """Materialized covariance; for small-p cross-checks only."""
        return self.p * self.gamma * (self.basis @ self.basis.T) + np.eye(self.p)


@dataclass(frozen=True, eq=False)
class TaskPair:
    """Realized two-task data: same responses, orthogonally related features.

    X_B is constructed as X_A rotated row-wise (never re-sampled), and y is
    shared between the tasks by construction.
    """

    X_A: np.ndarray
    X_B: np.ndarray
    rotation: HaarRotation
    y: np.ndarray
    latents: np.ndarray
    feature_noise: np.ndarray


@dataclass(frozen=True, eq=False)
class SurrogateTask:
    """Single data matrix with feature covariance W Wᵀ + I and noisy responses
    y = A beta_star + epsilon, epsilon ~ N(0, sigma2 I)."""

    A: np.ndarray
    y: np.ndarray
    beta_star: np.ndarray
    sigma2: float
    epsilon: np.ndarray


def build_feature_map(cfg: ModelConfig, rng: RngStream | np.random.Generator | int) -> FeatureMap:
    """Feature map for the config: axis-aligned block or a uniform random frame."""
    scale = np.sqrt(cfg.p * cfg.gamma)
    if cfg.w_mode == "axis-aligned":
        basis = np.zeros((cfg.p, cfg.d))
        basis[: cfg.d, : cfg.d] = np.eye(cfg.d)
    else:
        basis = stiefel_frame(rng, cfg.p, cfg.d)
    return FeatureMap(W=scale * basis, gamma=cfg.gamma, basis=basis)


def derive_induced(cfg: ModelConfig, fm: FeatureMap) -> tuple[np.ndarray, float, ImplicitCovariance]:
    """Induced regression target, noise floor, and implicit feature covariance.

    With orthogonal equal-length columns the general expressions collapse to
    beta_star = W theta / (p*gamma + 1) and sigma2 = |theta|^2 / (p*gamma + 1).
    """
    denom = fm.signal_scale + 1.0
    beta_star = fm.W @ (cfg.theta / denom)
    sigma2 = cfg.theta_sq / denom
    cov = ImplicitCovariance(p=fm.p, gamma=fm.gamma, basis=fm.basis)
    return beta_star, sigma2, cov


def _sample_observations(cfg: ModelConfig, fm: FeatureMap, gen: np.random.Generator):
    latents = gen.standard_normal((cfg.n, cfg.d))
    noise = gen.standard_normal((cfg.n, cfg.p))
    X = latents @ fm.W.T + noise
    return latents, noise, X


def sample_rotation_for(fm: FeatureMap, X: np.ndarray, rng, mode: str = "auto") -> HaarRotation:
    """Task rotation for a data matrix X under the given feature map.

    mode "auto" materializes the rotation for small p and otherwise realizes
    it exactly on rowspace(X) + range(W), the only vectors a trial rotates.
    "identity" is the zero-forgetting diagnostic.
    """
    gen = as_generator(rng)
    p = fm.p
    if mode == "identity":
        return HaarRotation.identity(p)
    if mode == "auto":
        mode = "dense" if p <= DENSE_ROTATION_LIMIT else "subspace"
    if mode == "dense":
        return HaarRotation.sample_dense(gen, p)
    if mode == "subspace":
        span = np.concatenate([X.T, fm.basis], axis=1)
        return HaarRotation.sample_on_span(gen, span)
    raise ValueError(f"unknown rotation mode {mode!r}")


def sample_task_pair(cfg: ModelConfig, fm: FeatureMap, rng, *,
                     rotation_mode: str = "auto") -> TaskPair:
    """Draw one two-task instance: shared responses, rotated second view.

    rotation_mode: "auto" picks a dense rotation for small p and the exact
    subspace action otherwise; "identity" is the zero-forgetting diagnostic.
    """
    gen = as_generator(rng)
    latents, noise, X_A = _sample_observations(cfg, fm, gen)
    y = latents @ cfg.theta
    rotation = sample_rotation_for(fm, X_A, gen, rotation_mode)
    if rotation.kind == "subspace":
        # the span was laid out as [X_Aᵀ | basis], so the first n images are
        # exactly the rotated rows
        X_B = np.ascontiguousarray(rotation.image_block(0, cfg.n).T)
    else:
        X_B = rotation.rotate_rows(X_A)
    return TaskPair(X_A=X_A, X_B=X_B, rotation=rotation, y=y,
                    latents=latents, feature_noise=noise)


def sample_surrogate(cfg: ModelConfig, fm: FeatureMap, rng) -> SurrogateTask:
    """Draw one noise-on-responses instance with matching feature covariance."""
    gen = as_generator(rng)
    _, _, A = _sample_observations(cfg, fm, gen)
    beta_star, sigma2, _ = derive_induced(cfg, fm)
    epsilon = np.sqrt(sigma2) * gen.standard_normal(cfg.n)
    y = A @ beta_star + epsilon
    return SurrogateTask(A=A, y=y, beta_star=beta_star, sigma2=sigma2, epsilon=epsilon)
