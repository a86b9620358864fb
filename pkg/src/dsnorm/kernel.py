"""Pairwise squared distances and the zero-diagonal Gaussian kernel."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import DimensionError, InputError
from .linalg import check_sym_matrix

__all__ = ["KernelMatrix", "check_data", "pairwise_sq_dists", "gaussian_kernel"]

MIN_POINTS = 3


def check_data(X, *, min_points=MIN_POINTS):
    """Validate a data matrix of ``n`` points (rows) in ``m`` dimensions."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionError(f"data must be 2-D (n points x m coords), got shape {X.shape}")
    if X.shape[0] < min_points:
        raise DimensionError(f"need at least {min_points} points, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise DimensionError("data must have at least one coordinate")
    if not np.all(np.isfinite(X)):
        raise InputError("data has non-finite coordinates")
    return X


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric nonnegative ``gram`` matrix with zero diagonal.

    ``epsilon`` is the width that produced it, in squared-distance units.
    It may be ``None`` for kernels that were not built by
    :func:`gaussian_kernel` (e.g. read from disk or rescaled).
    """

    gram: np.ndarray
    epsilon: float = None

    def __post_init__(self):
        gram = check_sym_matrix(self.gram, "kernel")
        if np.any(np.diag(gram) != 0):
            raise InputError("kernel diagonal must be identically zero")
        if np.any(gram < 0):
            raise InputError("kernel entries must be nonnegative")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InputError(f"epsilon must be positive, got {self.epsilon!r}")
        object.__setattr__(self, "gram", gram)

    @property
    def n(self):
        return self.gram.shape[0]


def pairwise_sq_dists(X):
    """Squared Euclidean distances ``D[i, j] = sum_c (X[i, c] - X[j, c])**2``.

    Computed from coordinate differences rather than the Gram expansion,
    which loses precision for nearby points in high dimension.
    """
    X = check_data(X, min_points=1)
    return squareform(pdist(X, "sqeuclidean"))


def gaussian_kernel(X, epsilon):
    """``exp(-||x_i - x_j||^2 / epsilon)`` off the diagonal, zero on it.

    Off-diagonal entries may underflow to exactly zero for small
    ``epsilon``; :func:`dsnorm.normalize.check_scalable` reports those.
    """
    if not np.isfinite(epsilon) or epsilon <= 0:
        raise InputError(f"epsilon must be positive and finite, got {epsilon!r}")
    gram = np.exp(-pairwise_sq_dists(X) / epsilon)
    np.fill_diagonal(gram, 0.0)
    return KernelMatrix(gram, float(epsilon))
