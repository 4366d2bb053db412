"""Squared-exponential Gaussian process for a single fidelity level.

The model has a zero mean function and the kernel

    k(a, b) = amplitude**2 * exp(-sum_k beta_k * (a_k - b_k)**2) + [a is b] * nugget**2

where the nugget term only sits on the diagonal of a covariance matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class CovarianceError(np.linalg.LinAlgError):
    """Raised when a covariance matrix cannot be factorized even with jitter."""


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel amplitude, per-dimension inverse length scales, and nugget."""

    amplitude: float
    inv_length_scales: np.ndarray
    nugget: float = 0.0

    def __post_init__(self):
        beta = np.atleast_1d(np.asarray(self.inv_length_scales, dtype=float))
        if beta.ndim != 1:
            raise ValueError("inv_length_scales must be a vector")
        object.__setattr__(self, "inv_length_scales", beta)
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "nugget", float(self.nugget))
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if np.any(beta < 0) or not np.all(np.isfinite(beta)):
            raise ValueError("inv_length_scales must be finite and non-negative")
        if not self.nugget >= 0:
            raise ValueError(f"nugget must be non-negative, got {self.nugget}")

    @property
    def dim(self) -> int:
        return self.inv_length_scales.size

    @property
    def prior_variance(self) -> float:
        """Far-field predictive variance, amplitude**2 + nugget**2."""
        return self.amplitude**2 + self.nugget**2

    def to_log(self) -> np.ndarray:
        """Pack as ``[log amplitude, log beta_1..d, log nugget]``."""
        with np.errstate(divide="ignore"):
            return np.concatenate(
                [[np.log(self.amplitude)], np.log(self.inv_length_scales), [np.log(self.nugget)]]
            )

    @classmethod
    def from_log(cls, theta) -> "Hyperparameters":
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[0]), np.exp(theta[1:-1]), np.exp(theta[-1]))


@dataclass(frozen=True)
class TrainingSet:
    """Inputs (N x d) and outputs (N,) for one fidelity level."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.outputs, dtype=float).ravel()
        if X.ndim != 2:
            raise ValueError("inputs must be an N x d matrix")
        if X.shape[0] == 0:
            raise ValueError("training set must contain at least one point")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} input rows but {y.size} outputs")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def append(self, x, y: float) -> "TrainingSet":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return TrainingSet(np.vstack([self.inputs, x]), np.append(self.outputs, y))


def _check_dim(x: np.ndarray, hyper: Hyperparameters) -> None:
    if x.shape[-1] != hyper.dim:
        raise ValueError(f"input dimension {x.shape[-1]} does not match hyperparameters ({hyper.dim})")


def kernel_eval(a, b, hyper: Hyperparameters, same_point: bool = False) -> float:
    """Evaluate the kernel between two points.

    Args:
        a: d-vector.
        b: d-vector.
        hyper: kernel hyperparameters.
        same_point: add the nugget term (diagonal entries only).

    Returns:
        float: covariance between the two points.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    _check_dim(a, hyper)
    value = hyper.amplitude**2 * np.exp(-np.sum(hyper.inv_length_scales * (a - b) ** 2))
    if same_point:
        value += hyper.nugget**2
    return float(value)


def kernel_matrix(A, B, hyper: Hyperparameters) -> np.ndarray:
    """Noise-free cross-covariance between the rows of A and B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    _check_dim(A, hyper)
    _check_dim(B, hyper)
    diff = A[:, None, :] - B[None, :, :]
    return hyper.amplitude**2 * np.exp(-np.einsum("ijk,k->ij", diff**2, hyper.inv_length_scales))


def build_covariance(train: TrainingSet, hyper: Hyperparameters) -> np.ndarray:
    """Training covariance K with the nugget on the diagonal.

    Jitter is not included here; :func:`factorize` adds it.
    """
    K = kernel_matrix(train.inputs, train.inputs, hyper)
    K[np.diag_indices_from(K)] += hyper.nugget**2
    return K


def factorize(K: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Cholesky factor of ``K + jitter * I`` with escalating jitter.

    Jitter starts at ``1e-10 * scale`` and grows tenfold up to ``1e-4 * scale``.

    Returns:
        (L, jitter): lower-triangular factor and the jitter that was used.
    """
    n = K.shape[0]
    rel = JITTER_START
    while rel <= JITTER_MAX * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            rel *= 10.0
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
        rel *= 10.0
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(K)
    raise CovarianceError(
        f"covariance not positive definite after jitter {JITTER_MAX:g}*scale (condition number {cond:.3g})"
    )


class CondensedGP:
    """GP with fixed hyperparameters and a cached factorization.

    Instances are treated as immutable once built.

    Args:
        hyper: hyperparameters.
        train: training data (same input dimension as ``hyper``).
        interpolate: leave the nugget out of the prior variance at prediction
            points, so predictions interpolate the training data.
    """

    def __init__(self, hyper: Hyperparameters, train: TrainingSet, interpolate: bool = False):
        if train.dim != hyper.dim:
            raise ValueError(f"training inputs have dimension {train.dim}, hyperparameters {hyper.dim}")
        self.hyper = hyper
        self.train = train
        self.interpolate = interpolate
        self.K = build_covariance(train, hyper)
        self.chol, self.jitter = factorize(self.K, hyper.amplitude**2)
        self.alpha = self._solve(train.outputs)

    @property
    def dim(self) -> int:
        return self.hyper.dim

    def __len__(self) -> int:
        return len(self.train)

    def _solve(self, b: np.ndarray) -> np.ndarray:
        z = solve_triangular(self.chol, b, lower=True, check_finite=False)
        return solve_triangular(self.chol.T, z, lower=False, check_finite=False)

    def _whiten(self, Ks: np.ndarray) -> np.ndarray:
        return solve_triangular(self.chol, Ks, lower=True, check_finite=False)

    def _prior_point_variance(self) -> float:
        if self.interpolate:
            return self.hyper.amplitude**2
        return self.hyper.prior_variance

    def _as_rows(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.dim == 1 else X.reshape(1, -1)
        _check_dim(X, self.hyper)
        return X

    def predict_many(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and variance at each row of X."""
        X = self._as_rows(X)
        Ks = kernel_matrix(self.train.inputs, X, self.hyper)
        mean = Ks.T @ self.alpha
        V = self._whiten(Ks)
        var = self._prior_point_variance() - np.sum(V**2, axis=0)
        return mean, np.maximum(var, 0.0)

    def predict(self, x_star) -> tuple[float, float]:
        x = np.atleast_1d(np.asarray(x_star, dtype=float)).reshape(1, -1)
        mean, var = self.predict_many(x)
        return float(mean[0]), float(var[0])

    def augmented_variance(self, X_eval, X_new) -> np.ndarray:
        """Variance at ``X_eval[i]`` if ``X_new[i]`` were added to the training inputs.

        Hyperparameters stay fixed and no target value is needed. The update is
        the rank-one Schur complement of the bordered covariance matrix; the new
        diagonal entry carries the nugget and the same jitter as the existing K.
        """
        X_eval = self._as_rows(X_eval)
        X_new = self._as_rows(X_new)
        if X_eval.shape != X_new.shape:
            raise ValueError("X_eval and X_new must have the same shape")
        h = self.hyper
        Ve = self._whiten(kernel_matrix(self.train.inputs, X_eval, h))
        Vn = self._whiten(kernel_matrix(self.train.inputs, X_new, h))
        var_eval = self._prior_point_variance() - np.sum(Ve**2, axis=0)
        var_new = h.prior_variance + self.jitter - np.sum(Vn**2, axis=0)
        cross_prior = h.amplitude**2 * np.exp(-np.sum(h.inv_length_scales * (X_eval - X_new) ** 2, axis=1))
        cross = cross_prior - np.sum(Ve * Vn, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            reduction = np.where(var_new > 0, cross**2 / var_new, 0.0)
        out = np.clip(var_eval - reduction, 0.0, None)
        return np.minimum(out, np.maximum(var_eval, 0.0))

    def with_point(self, x, y: float = 0.0) -> "CondensedGP":
        """Refactorize from scratch with one extra training point, same hyperparameters."""
        return CondensedGP(self.hyper, self.train.append(x, y), self.interpolate)


def predict(gp: CondensedGP, x_star) -> tuple[float, float]:
    """Predictive (mean, variance) of ``gp`` at a single point."""
    return gp.predict(x_star)
