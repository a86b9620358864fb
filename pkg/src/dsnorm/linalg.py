"""Dense symmetric linear algebra used by the rest of the package.

Symmetric matrices are plain ``(n, n)`` float arrays. Every routine that
builds one goes through :func:`mirror_upper`, so ``A[i, j] == A[j, i]``
holds bit-for-bit rather than up to rounding.
"""

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, InputError, NumericError

__all__ = [
    "mirror_upper",
    "check_sym_matrix",
    "check_vector",
    "sym_eigen_topk",
    "sign_fix",
    "frobenius_distance",
]

# relative residual bound per eigenpair, in units of ||A||_F
RESIDUAL_RTOL = 1e-8


def mirror_upper(a):
    """Return a copy of square ``a`` whose lower triangle mirrors the upper."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def check_sym_matrix(a, name="matrix", *, atol=0.0):
    """Validate a symmetric finite matrix and return it as a float array.

    ``atol`` allows a tolerance on the asymmetry; the default demands
    exact symmetry.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise DimensionError(f"{name} must have n >= 1")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} has non-finite entries")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > atol:
        raise InputError(f"{name} is not symmetric (max |A - A^T| = {asym:.3g})")
    return a


def check_vector(v, name="vector", n=None):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} has non-finite entries")
    return v


def sign_fix(vectors):
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties on magnitude go to the lowest index (``argmax`` semantics).
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.ndim == 1:
        return sign_fix(vectors[:, None])[:, 0]
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eigen_topk(a, k):
    """Top-``k`` eigenpairs of a symmetric matrix, largest eigenvalue first.

    Ordering is by signed value, not magnitude. Each eigenvector has unit
    norm and is sign-fixed (see :func:`sign_fix`).

    Parameters
    ----------
    a : array of shape (n, n)
        Symmetric finite matrix.
    k : int
        Number of pairs, ``1 <= k <= n``.

    Returns
    -------
    eigenvalues : array of shape (k,)
    eigenvectors : array of shape (n, k)
        Column ``j`` pairs with ``eigenvalues[j]``.

    Raises
    ------
    NumericError
        If any pair's residual ``||A v - lambda v||`` exceeds
        ``1e-8 * ||A||_F``.
    """
    a = check_sym_matrix(a)
    n = a.shape[0]
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise DimensionError(f"k must be an integer in [1, {n}], got {k!r}")
    try:
        vals, vecs = scipy.linalg.eigh(a, subset_by_index=[n - k, n - 1])
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    vals = vals[::-1]
    vecs = sign_fix(vecs[:, ::-1] / np.linalg.norm(vecs[:, ::-1], axis=0))

    scale = np.linalg.norm(a)
    residuals = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    worst = float(residuals.max())
    if worst > RESIDUAL_RTOL * max(scale, np.finfo(float).tiny):
        raise NumericError(
            f"eigensolver residual {worst:.3g} exceeds {RESIDUAL_RTOL:g} * ||A||_F"
        )
    return vals, vecs


def frobenius_distance(a, b):
    """``||a - b||_F`` for two matrices of the same shape."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b))
