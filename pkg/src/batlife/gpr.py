"""Exact Gaussian-process regression with an ARD exponential kernel.

Covariance between feature vectors x_i, x_j:

    k(x_i, x_j) = sigma_f^2 * exp(-sqrt(sum_m (x_im - x_jm)^2 / l_m^2))

with one length scale per feature (automatic relevance determination).
Observation noise sigma_n^2 and a small fixed jitter (1e-9 * sigma_f^2)
are added on the training diagonal for factorization stability.

Hyperparameters are fitted by maximizing the log marginal likelihood over
log-parameters with analytic gradients (L-BFGS with multiple seeded
restarts). Features are standardized to zero mean / unit variance with
training statistics stored on the model; targets are centered so the zero
prior mean is exact.

Per-feature relative importance is reported as l_m / ||l||_1. Note this
assigns larger weight to larger length scales; the conventional ARD
reading (relevance ~ 1/l) is exposed separately as
``inverse_relative_importance`` so reports can show both.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist

from .errors import (
    DegenerateTargetsError,
    DimensionMismatchError,
    SingularKernelError,
    ValidationError,
)

JITTER_FACTOR = 1e-9
MAX_JITTER_FACTOR = 1e-6
LOG_BOUND = 18.0  # |log parameter| bound during optimization


@dataclass(frozen=True)
class KernelParams:
    sigma_f: float
    length_scales: np.ndarray
    sigma_n: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        if self.sigma_f <= 0:
            raise ValidationError("sigma_f must be positive")
        if np.any(ls <= 0):
            raise ValidationError("all length scales must be positive")
        if self.sigma_n < 0:
            raise ValidationError("sigma_n cannot be negative")

    @property
    def n_features(self) -> int:
        return int(self.length_scales.size)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @staticmethod
    def fit(X: np.ndarray) -> "Standardizer":
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale = np.where(scale < 1e-12, 1.0, scale)  # constant columns pass through
        return Standardizer(mean=mean, scale=scale)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


@dataclass(frozen=True)
class GprModel:
    kernel: KernelParams
    X_train: np.ndarray          # standardized, n x d
    y_train: np.ndarray          # raw targets, n
    y_mean: float
    chol_lower: np.ndarray       # L with L L^T = K + (sigma_n^2 + jitter) I
    alpha: np.ndarray            # (K + ...)^-1 (y - y_mean)
    standardizer: Standardizer
    jitter: float
    feature_names: tuple[str, ...] | None = None

    @property
    def n_train(self) -> int:
        return int(self.X_train.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.X_train.shape[1])


@dataclass
class GprTrainConfig:
    restarts: int = 5
    max_iters: int = 500
    tol: float = 1e-8
    seed: int = 0
    jitter_factor: float = JITTER_FACTOR


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def kernel_eval(x_i, x_j, kernel: KernelParams) -> float:
    """Covariance between two feature vectors."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape or x_i.ndim != 1 or x_i.size != kernel.n_features:
        raise DimensionMismatchError(
            f"expected two vectors of length {kernel.n_features}, "
            f"got shapes {x_i.shape} and {x_j.shape}"
        )
    scaled = (x_i - x_j) / kernel.length_scales
    return float(kernel.sigma_f**2 * math.exp(-math.sqrt(float(scaled @ scaled))))


def _scaled_distance(Xa: np.ndarray, Xb: np.ndarray, length_scales: np.ndarray) -> np.ndarray:
    if Xa.shape[0] == 0 or Xb.shape[0] == 0:
        return np.zeros((Xa.shape[0], Xb.shape[0]))
    return cdist(Xa / length_scales, Xb / length_scales)


def kernel_matrix(Xa: np.ndarray, Xb: np.ndarray, kernel: KernelParams) -> np.ndarray:
    return kernel.sigma_f**2 * np.exp(-_scaled_distance(Xa, Xb, kernel.length_scales))


def _factorize(K_reg: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor; raises np.linalg.LinAlgError when indefinite."""
    return cholesky(K_reg, lower=True)


def factorize_with_jitter(
    K: np.ndarray, sigma_f: float, sigma_n: float, jitter_factor: float = JITTER_FACTOR
) -> tuple[np.ndarray, float]:
    """Factorize K + sigma_n^2 I + jitter I, escalating jitter up to the cap.

    Returns (lower factor, jitter actually used). Raises SingularKernelError
    once the jitter cap (1e-6 * sigma_f^2) is exhausted.
    """
    n = K.shape[0]
    eye = np.eye(n)
    factor = jitter_factor
    while factor <= MAX_JITTER_FACTOR * (1.0 + 1e-12):
        jitter = factor * sigma_f**2
        try:
            L = _factorize(K + (sigma_n**2 + jitter) * eye)
            return L, jitter
        except np.linalg.LinAlgError:
            factor *= 10.0
    raise SingularKernelError(
        f"kernel matrix not factorizable at jitter {MAX_JITTER_FACTOR:g} * sigma_f^2"
    )


# ---------------------------------------------------------------------------
# Log marginal likelihood
# ---------------------------------------------------------------------------

def log_marginal_likelihood(
    kernel: KernelParams,
    X: np.ndarray,
    y_centered: np.ndarray,
    jitter_factor: float = JITTER_FACTOR,
    with_grad: bool = False,
):
    """Log marginal likelihood of centered targets; optional gradient.

    The gradient is taken with respect to the log-parameters
    (log sigma_f, log l_1 ... log l_d, log sigma_n) via
    d lml / d theta = 0.5 * tr((alpha alpha^T - K^-1) dK/d theta).
    The jitter term scales with sigma_f^2 and is included in the sigma_f
    derivative so finite differences of this function match exactly.
    """
    n, d = X.shape
    sigma_f = kernel.sigma_f
    sigma_n = kernel.sigma_n
    ls = kernel.length_scales

    r = _scaled_distance(X, X, ls)
    E = np.exp(-r)
    jitter = jitter_factor * sigma_f**2
    K_reg = sigma_f**2 * E + (sigma_n**2 + jitter) * np.eye(n)
    L = _factorize(K_reg)
    alpha = cho_solve((L, True), y_centered)
    lml = (
        -0.5 * float(y_centered @ alpha)
        - float(np.log(np.diag(L)).sum())
        - 0.5 * n * math.log(2.0 * math.pi)
    )
    if not with_grad:
        return lml

    K_inv = cho_solve((L, True), np.eye(n))
    M = np.outer(alpha, alpha) - K_inv

    grad = np.empty(d + 2)
    # d K_reg / d log sigma_f = 2 (sigma_f^2 E + jitter I)
    grad[0] = 0.5 * float(np.sum(M * (2.0 * sigma_f**2 * E))) + float(
        np.trace(M) * jitter
    )
    # d K_reg / d log l_m = K * (x_im - x_jm)^2 / (l_m^2 * r), zero on the diagonal
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_r = np.where(r > 0, 1.0 / np.where(r > 0, r, 1.0), 0.0)
    base = sigma_f**2 * E * inv_r
    for m in range(d):
        diff_sq = (X[:, None, m] - X[None, :, m]) ** 2 / ls[m] ** 2
        grad[1 + m] = 0.5 * float(np.sum(M * (base * diff_sq)))
    # d K_reg / d log sigma_n = 2 sigma_n^2 I
    grad[1 + d] = float(np.trace(M) * sigma_n**2)
    return lml, grad


def _theta_to_kernel(theta: np.ndarray) -> KernelParams:
    return KernelParams(
        sigma_f=math.exp(theta[0]),
        length_scales=np.exp(theta[1:-1]),
        sigma_n=math.exp(theta[-1]),
    )


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

def train(
    X: np.ndarray,
    y: np.ndarray,
    config: GprTrainConfig | None = None,
    feature_names: tuple[str, ...] | None = None,
) -> GprModel:
    """Fit hyperparameters by maximum marginal likelihood and build the model.

    Deterministic given ``config.seed``; restarts are compared by final
    likelihood with ties broken by restart index.
    """
    config = config or GprTrainConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise DimensionMismatchError(f"X {X.shape} and y {y.shape} are inconsistent")
    if X.shape[0] < 2:
        raise ValidationError("training needs at least 2 samples")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("training data contains non-finite entries")

    y_std = float(y.std())
    if y_std == 0.0:
        raise DegenerateTargetsError("targets carry zero variance")
    y_mean = float(y.mean())
    y_centered = y - y_mean

    standardizer = Standardizer.fit(X)
    Xs = standardizer.transform(X)
    n, d = Xs.shape

    def objective(theta):
        try:
            lml, grad = log_marginal_likelihood(
                _theta_to_kernel(theta), Xs, y_centered,
                jitter_factor=config.jitter_factor, with_grad=True,
            )
        except np.linalg.LinAlgError:
            return 1e25, np.zeros_like(theta)
        return -lml, -grad

    rng = np.random.default_rng(np.random.SeedSequence([config.seed & 0xFFFFFFFF, n, d]))
    starts = [np.concatenate((
        [math.log(y_std)], np.zeros(d), [math.log(0.1 * y_std)],
    ))]
    for _ in range(max(config.restarts - 1, 0)):
        starts.append(np.concatenate((
            [math.log(y_std) + rng.uniform(-2.0, 2.0)],
            rng.uniform(math.log(0.1), math.log(10.0), size=d),
            [math.log(y_std) + rng.uniform(-6.0, 0.0)],
        )))

    bounds = [(-LOG_BOUND, LOG_BOUND)] * (d + 2)
    best_theta = None
    best_value = np.inf
    for theta0 in starts:
        result = minimize(
            objective, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": config.max_iters, "ftol": config.tol * 1e-2, "gtol": 1e-9},
        )
        if result.fun < best_value:
            best_value = float(result.fun)
            best_theta = result.x
    if best_theta is None:
        raise SingularKernelError("no restart produced a usable kernel")

    kernel = _theta_to_kernel(best_theta)
    K = kernel_matrix(Xs, Xs, kernel)
    L, jitter = factorize_with_jitter(K, kernel.sigma_f, kernel.sigma_n, config.jitter_factor)
    alpha = cho_solve((L, True), y_centered)
    return GprModel(
        kernel=kernel,
        X_train=Xs,
        y_train=y,
        y_mean=y_mean,
        chol_lower=L,
        alpha=alpha,
        standardizer=standardizer,
        jitter=jitter,
        feature_names=feature_names,
    )


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def predict(model: GprModel, X_star: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance (including observation noise) at X_star.

    ``X_star`` is in raw feature units; the stored standardizer is applied.
    Variances are clamped at zero; clamping beyond 1e-8 is reported as a
    warning since it indicates a poorly conditioned kernel.
    """
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star[None, :]
    if X_star.shape[1] != model.n_features:
        raise DimensionMismatchError(
            f"expected {model.n_features} features, got {X_star.shape[1]}"
        )
    if X_star.shape[0] == 0:
        return np.empty(0), np.empty(0)

    Xs = model.standardizer.transform(X_star)
    K_star = kernel_matrix(model.X_train, Xs, model.kernel)
    mean = K_star.T @ model.alpha + model.y_mean
    v = solve_triangular(model.chol_lower, K_star, lower=True)
    variance = model.kernel.sigma_f**2 - np.einsum("ij,ij->j", v, v) + model.kernel.sigma_n**2
    if np.any(variance < -1e-8):
        warnings.warn("predictive variance clamped by more than 1e-8", RuntimeWarning)
    return mean, np.maximum(variance, 0.0)


def relative_importance(model: GprModel) -> np.ndarray:
    """Per-feature weight l_m / ||l||_1 from the trained length scales."""
    ls = model.kernel.length_scales
    return ls / float(np.abs(ls).sum())


def inverse_relative_importance(model: GprModel) -> np.ndarray:
    """The conventional ARD reading: weight proportional to 1 / l_m."""
    inv = 1.0 / model.kernel.length_scales
    return inv / float(inv.sum())
