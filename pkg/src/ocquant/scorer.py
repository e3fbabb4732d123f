"""One-class Mahalanobis scorer and a calibrated logistic model for EN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .errors import InsufficientDataError, InvalidArgumentError
from .rng import SplitMix64

RIDGE_FLOOR = 1e-150


@dataclass(frozen=True, eq=False)
class MahalanobisModel:
    """Mean and regularized inverse covariance of the positive class.

    Attributes:
        mean: column means, shape (m,).
        inverse_covariance: inverse of ``cov + regularization * I``, shape (m, m).
        regularization: ridge actually added to the covariance diagonal.
    """

    mean: np.ndarray
    inverse_covariance: np.ndarray
    regularization: float

    @property
    def n_features(self) -> int:
        return self.mean.shape[0]

    def score_samples(self, x: np.ndarray) -> np.ndarray:
        """Negated Mahalanobis distance for every row of ``x``."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise InvalidArgumentError(
                f"expected {self.n_features} features, got shape {x.shape}"
            )
        d = x - self.mean
        q = np.einsum("ij,jk,ik->i", d, self.inverse_covariance, d)
        return -np.sqrt(np.maximum(q, 0.0))


def fit_mahalanobis(positives: np.ndarray) -> MahalanobisModel:
    """Fit the scorer on positive rows.

    A ridge of ``1e-6 * trace(cov) / m`` is always added, then raised tenfold
    until the matrix admits a Cholesky factorization with a finite inverse.
    """
    x = np.asarray(positives, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InsufficientDataError("at least 2 rows are needed to fit a covariance")
    m = x.shape[1]
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    # the floor only matters for near-zero spread, where the inverse would overflow
    eps = max(1e-6 * np.trace(cov) / m, RIDGE_FLOOR)
    eye = np.eye(m)
    while True:
        try:
            chol = np.linalg.cholesky(cov + eps * eye)
            with np.errstate(over="ignore", invalid="ignore"):
                inv_chol = np.linalg.solve(chol, eye)
                inv = inv_chol.T @ inv_chol
            if np.all(np.isfinite(inv)):
                break
        except np.linalg.LinAlgError:
            pass
        eps *= 10.0
    inv = 0.5 * inv + 0.5 * inv.T
    return MahalanobisModel(mean, inv, float(eps))


def score(model: MahalanobisModel, x: np.ndarray) -> float:
    """Score of a single observation; higher means more positive-like."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise InvalidArgumentError(f"expected a vector of {model.n_features} features")
    return float(model.score_samples(x)[0])


def fold_ids(n: int, k: int, seed: int) -> np.ndarray:
    """Random balanced fold id per row."""
    order = list(range(n))
    SplitMix64(seed).shuffle(order)
    ids = np.empty(n, dtype=np.int64)
    ids[order] = np.arange(n) % k
    return ids


def cv_scores(positives: np.ndarray, k: int = 10, seed: int = 0) -> np.ndarray:
    """Out-of-fold scores: each row is scored by a model fitted on the other folds."""
    x = np.asarray(positives, dtype=float)
    n = x.shape[0]
    if k < 2 or k > n:
        raise InvalidArgumentError(f"invalid k={k} for {n} rows")
    ids = fold_ids(n, k, seed)
    out = np.empty(n)
    for f in range(k):
        test = ids == f
        model = fit_mahalanobis(x[~test])
        out[test] = model.score_samples(x[test])
    return out


@dataclass(frozen=True, eq=False)
class CalibratedModel:
    """L2-regularized logistic model of P(labeled | x) on standardized features."""

    weights: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    iterations: int = 0

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.center.shape[0]:
            raise InvalidArgumentError(
                f"expected {self.center.shape[0]} features, got shape {x.shape}"
            )
        z = (x - self.center) / self.scale
        return self.weights[0] + z @ self.weights[1:]


def predict_proba(model: CalibratedModel, x: np.ndarray) -> np.ndarray:
    """Sigmoid of the affine score, one probability per row."""
    return expit(model.decision_function(x))


def logistic_objective(w: np.ndarray, z: np.ndarray, s: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean log-loss plus ``l2/2 * |w[1:]|^2`` and its gradient.

    ``z`` already carries a leading column of ones for the intercept.
    """
    a = z @ w
    loss = -np.mean(s * log_expit(a) + (1 - s) * log_expit(-a))
    loss += 0.5 * l2 * float(w[1:] @ w[1:])
    grad = z.T @ (expit(a) - s) / len(s)
    grad[1:] += l2 * w[1:]
    return float(loss), grad


def fit_calibrated(
    labeled: np.ndarray,
    unlabeled: np.ndarray,
    l2: float = 1e-3,
    tol: float = 1e-6,
    max_iter: int = 5000,
) -> CalibratedModel:
    """Fit a logistic model separating ``labeled`` (s=1) from ``unlabeled`` (s=0).

    Damped Newton steps with backtracking, so the objective never increases
    from one iteration to the next. Stops when the gradient norm falls below
    ``tol`` or after ``max_iter`` iterations.
    """
    lab = np.atleast_2d(np.asarray(labeled, dtype=float))
    unl = np.atleast_2d(np.asarray(unlabeled, dtype=float))
    if lab.size == 0 or unl.size == 0:
        raise InsufficientDataError("labeled and unlabeled sets must be non-empty")
    if lab.shape[1] != unl.shape[1]:
        raise InvalidArgumentError("labeled and unlabeled sets differ in feature count")
    x = np.vstack([lab, unl])
    s = np.concatenate([np.ones(len(lab)), np.zeros(len(unl))])
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = np.hstack([np.ones((len(x), 1)), (x - center) / scale])

    w = np.zeros(z.shape[1])
    ridge = np.full(z.shape[1], l2)
    ridge[0] = 0.0
    loss, grad = logistic_objective(w, z, s, l2)
    it = 0
    while it < max_iter and np.linalg.norm(grad) >= tol:
        it += 1
        p = expit(z @ w)
        h = (z * (p * (1 - p))[:, None]).T @ z / len(s) + np.diag(ridge)
        h[0, 0] += 1e-12
        step = np.linalg.solve(h, grad)
        t = 1.0
        while True:
            cand = w - t * step
            new_loss, new_grad = logistic_objective(cand, z, s, l2)
            if new_loss <= loss - 1e-4 * t * float(grad @ step) or t < 1e-10:
                break
            t *= 0.5
        if new_loss > loss:
            break
        w, loss, grad = cand, new_loss, new_grad
    return CalibratedModel(w, center, scale, it)
