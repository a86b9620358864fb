"""Gaussian-kernel affinity matrices and their doubly-stochastic normalization."""

from .estimators import AffinityEmbedding, GaussianAffinity
from .exceptions import (
    DegenerateKernelError,
    DimensionError,
    DsnormError,
    InputError,
    MalformedFileError,
    NumericError,
    PreconditionError,
    SinkhornConvergenceError,
)
from .kernel import KernelMatrix, gaussian_kernel, pairwise_sq_dists
from .normalize import (
    AffinityMatrix,
    SinkhornConfig,
    SinkhornReport,
    check_scalable,
    estimate_rate,
    gauge_decompose,
    normalize,
    row_stochastic,
    sinkhorn_symmetric,
    symmetric_normalize,
)
from .spectral import decompose, embed2d, subspace_affinity

__version__ = "0.1.0"

__all__ = [
    "AffinityEmbedding",
    "AffinityMatrix",
    "DegenerateKernelError",
    "DimensionError",
    "DsnormError",
    "GaussianAffinity",
    "InputError",
    "KernelMatrix",
    "MalformedFileError",
    "NumericError",
    "PreconditionError",
    "SinkhornConfig",
    "SinkhornConvergenceError",
    "SinkhornReport",
    "check_scalable",
    "decompose",
    "embed2d",
    "estimate_rate",
    "gauge_decompose",
    "gaussian_kernel",
    "normalize",
    "pairwise_sq_dists",
    "row_stochastic",
    "sinkhorn_symmetric",
    "subspace_affinity",
    "symmetric_normalize",
]
