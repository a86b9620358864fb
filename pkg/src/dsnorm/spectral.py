"""Spectral decompositions of affinity matrices and subspace comparison."""

from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError
from .linalg import mirror_upper, sign_fix, sym_eigen_topk

__all__ = [
    "SpectralDecomposition",
    "decompose",
    "embed2d",
    "radius_cv",
    "subspace_affinity",
]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Leading eigenpairs of an affinity, eigenvalues in descending order.

    ``eigenvectors[:, j]`` pairs with ``eigenvalues[j]``. For the row
    variant these are right eigenvectors and are not mutually orthogonal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_variant: str

    @property
    def k(self):
        return self.eigenvalues.shape[0]

    @property
    def n(self):
        return self.eigenvectors.shape[0]


def decompose(W, k):
    """Top-``k`` eigenpairs of an :class:`~dsnorm.normalize.AffinityMatrix`.

    The row-stochastic matrix is similar to its symmetric counterpart,
    ``diag(r)^(1/2) W_s diag(r)^(-1/2)``, so it is handled with the
    symmetric solver and the eigenvectors are mapped back through
    ``sqrt(r)``.
    """
    if not 1 <= k <= W.n:
        raise DimensionError(f"k must be in [1, {W.n}], got {k}")
    if W.variant == "row":
        s = np.sqrt(W.scaling)
        w_sym = mirror_upper(W.w / s[:, None] * s[None, :])
        vals, vecs = sym_eigen_topk(w_sym, k)
        vecs = s[:, None] * vecs
        vecs = sign_fix(vecs / np.linalg.norm(vecs, axis=0))
    else:
        vals, vecs = sym_eigen_topk(W.w, k)
    return SpectralDecomposition(vals, vecs, W.variant)


def embed2d(dec):
    """Coordinates ``(psi_2[i], psi_3[i])`` from the 2nd and 3rd eigenvectors."""
    if dec.k < 3:
        raise DimensionError(f"need at least 3 eigenpairs, got {dec.k}")
    return dec.eigenvectors[:, 1:3].copy()


def radius_cv(coords):
    """Coefficient of variation of the distances of 2-D points from the origin."""
    radii = np.linalg.norm(np.asarray(coords, dtype=float), axis=1)
    return float(radii.std() / radii.mean())


def _orthonormal_basis(vectors):
    q, _ = np.linalg.qr(vectors)
    return q


def subspace_affinity(a, b, k):
    """Mean squared canonical correlation between two top-``k`` spans.

    Returns a value in ``[0, 1]``: 1 for identical subspaces, 0 for
    orthogonal ones. Invariant to the choice of basis within each span.
    """
    if a.n != b.n:
        raise DimensionError(f"decompositions have different n: {a.n} vs {b.n}")
    if k < 1 or k > min(a.k, b.k):
        raise DimensionError(f"k must be in [1, {min(a.k, b.k)}], got {k}")
    qa = _orthonormal_basis(a.eigenvectors[:, :k])
    qb = _orthonormal_basis(b.eigenvectors[:, :k])
    cos = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.clip(np.mean(cos**2), 0.0, 1.0))
