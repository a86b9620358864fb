"""scikit-learn compatible wrappers around the kernel normalizations."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .kernel import MIN_POINTS, gaussian_kernel
from .normalize import SinkhornConfig, normalize
from .spectral import decompose

__all__ = ["GaussianAffinity", "AffinityEmbedding"]

_NORMALIZATIONS = ("row", "symmetric", "doubly")


def _check_params(est):
    if est.normalization not in _NORMALIZATIONS:
        raise ValueError(
            f"normalization must be one of {_NORMALIZATIONS}, got {est.normalization!r}"
        )
    if not est.epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {est.epsilon!r}")


class GaussianAffinity(BaseEstimator):
    """Normalized Gaussian affinity matrix of a point cloud.

    Parameters
    ----------
    epsilon : float, default=0.1
        Kernel width in squared-distance units.
    normalization : {"doubly", "row", "symmetric"}, default="doubly"
    delta : float, default=1e-12
        Sinkhorn tolerance (doubly only).
    max_iter : int, default=1_000_000
        Sinkhorn iteration cap (doubly only).

    Attributes
    ----------
    affinity_matrix_ : ndarray of shape (n_samples, n_samples)
    scaling_ : ndarray of shape (n_samples,)
    n_iter_ : int
        Sinkhorn iterations; 0 for the row and symmetric variants.
    sinkhorn_report_ : SinkhornReport or None
    """

    def __init__(self, epsilon=0.1, normalization="doubly", delta=1e-12, max_iter=1_000_000):
        self.epsilon = epsilon
        self.normalization = normalization
        self.delta = delta
        self.max_iter = max_iter

    def fit(self, X, y=None):
        _check_params(self)
        X = check_array(X, ensure_min_samples=MIN_POINTS)
        self.n_features_in_ = X.shape[1]
        cfg = SinkhornConfig(self.delta, self.max_iter)
        W, report = normalize(gaussian_kernel(X, self.epsilon), self.normalization, cfg)
        self.affinity_ = W
        self.affinity_matrix_ = W.w
        self.scaling_ = W.scaling
        self.sinkhorn_report_ = report
        self.n_iter_ = 0 if report is None else report.iters
        return self

    def fit_transform(self, X, y=None):
        """Fit and return the affinity matrix."""
        return self.fit(X).affinity_matrix_


class AffinityEmbedding(TransformerMixin, BaseEstimator):
    """Spectral embedding from the leading nontrivial eigenvectors of an affinity.

    The top eigenvector (constant for the doubly-stochastic variant) is
    skipped, so with ``n_components=2`` the coordinates are the 2nd and
    3rd eigenvectors.

    Attributes
    ----------
    embedding_ : ndarray of shape (n_samples, n_components)
    eigenvalues_ : ndarray of shape (n_components + 1,)
    affinity_matrix_ : ndarray of shape (n_samples, n_samples)
    """

    def __init__(self, n_components=2, epsilon=0.1, normalization="doubly", delta=1e-12,
                 max_iter=1_000_000):
        self.n_components = n_components
        self.epsilon = epsilon
        self.normalization = normalization
        self.delta = delta
        self.max_iter = max_iter

    def fit(self, X, y=None):
        if self.n_components < 1:
            raise ValueError(f"n_components must be >= 1, got {self.n_components}")
        aff = GaussianAffinity(self.epsilon, self.normalization, self.delta, self.max_iter).fit(X)
        self.n_features_in_ = aff.n_features_in_
        if self.n_components + 1 > aff.affinity_.n:
            raise ValueError("n_components must be smaller than n_samples")
        dec = decompose(aff.affinity_, self.n_components + 1)
        self.affinity_matrix_ = aff.affinity_matrix_
        self.eigenvalues_ = dec.eigenvalues
        self.embedding_ = dec.eigenvectors[:, 1:]
        return self

    def transform(self, X=None):
        """Return the embedding of the fitted points.

        Out-of-sample extension is not supported; ``X`` must be None or
        the training data itself.
        """
        check_is_fitted(self, "embedding_")
        if X is not None and np.asarray(X).shape[0] != self.embedding_.shape[0]:
            raise ValueError("AffinityEmbedding cannot embed new points")
        return self.embedding_

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_
