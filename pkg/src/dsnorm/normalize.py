"""Row-stochastic, symmetric and doubly-stochastic normalizations of a kernel.

The doubly-stochastic scaling is found with the symmetric Sinkhorn-Knopp
fixed point ``d <- 1 / (K d)``. Consecutive iterates oscillate by a
constant factor ``c, 1/c``; the stopping rule compares iterates two steps
apart and the returned scaling is the geometric mean of the last two, so
the oscillation cancels.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateKernelError,
    InputError,
    PreconditionError,
    SinkhornConvergenceError,
)
from .kernel import KernelMatrix, check_data
from .linalg import check_vector, mirror_upper, sym_eigen_topk

__all__ = [
    "VARIANTS",
    "AffinityMatrix",
    "SinkhornConfig",
    "SinkhornReport",
    "ScalabilityDiagnosis",
    "GaugeDecomposition",
    "check_scalable",
    "row_stochastic",
    "symmetric_normalize",
    "sinkhorn_symmetric",
    "normalize",
    "estimate_rate",
    "gauge_decompose",
]

VARIANTS = ("row", "symmetric", "doubly")

# window (in single fixed-point steps) for the tail rate estimate
RATE_WINDOW = 10


@dataclass(frozen=True)
class AffinityMatrix:
    """A normalized kernel.

    ``scaling`` is ``r`` (inverse row sums of the kernel) for the row and
    symmetric variants and the Sinkhorn factors ``d`` for the doubly
    variant. ``w`` is nonsymmetric only for ``variant == "row"``.
    """

    w: np.ndarray
    variant: str
    scaling: np.ndarray
    epsilon: float = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InputError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if np.any(self.scaling <= 0):
            raise InputError("scaling entries must be strictly positive")

    @property
    def n(self):
        return self.w.shape[0]

    @property
    def is_symmetric(self):
        return self.variant != "row"


@dataclass(frozen=True)
class SinkhornConfig:
    delta: float = 1e-12
    max_iters: int = 10**6

    def __post_init__(self):
        if not self.delta > 0:
            raise InputError(f"delta must be positive, got {self.delta!r}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InputError(f"max_iters must be an integer >= 1, got {self.max_iters!r}")


@dataclass(frozen=True)
class SinkhornReport:
    """Outcome of a Sinkhorn run.

    ``iters`` counts loop iterations after the three initial iterates.
    ``final_ratio_gap`` is ``max_i |d_i^(t-2) / d_i^(t) - 1|`` at exit.
    ``rate_estimate`` is the linear decay factor of that gap per full
    Sinkhorn sweep (two fixed-point steps), measured over the last ten
    steps; NaN when fewer are available.
    """

    iters: int
    final_ratio_gap: float
    converged: bool
    rate_estimate: float


@dataclass(frozen=True)
class ScalabilityDiagnosis:
    ok: bool
    n: int
    zero_pairs: list
    message: str

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class GaugeDecomposition:
    """``W[i, j] == u[i] * h[i, j] * u[j]`` for ``i != j``."""

    u: np.ndarray
    h: np.ndarray


def _as_kernel(K):
    if isinstance(K, KernelMatrix):
        return K
    return KernelMatrix(np.asarray(K, dtype=float))


def check_scalable(K, max_pairs=20):
    """Check that ``K`` admits a unique symmetric doubly-stochastic scaling.

    That holds when ``n > 2`` and every off-diagonal entry is strictly
    positive. Entries that underflowed to 0.0 count as zeros; they are
    listed (up to ``max_pairs``, as ``(i, j)`` with ``i < j``) so the
    caller can increase epsilon.

    Returns a :class:`ScalabilityDiagnosis`, which is truthy iff scalable.
    """
    K = _as_kernel(K)
    n = K.n
    if n <= 2:
        return ScalabilityDiagnosis(
            False, n, [], f"need n > 2 points for a unique scaling, got n = {n}"
        )
    iu, ju = np.triu_indices(n, 1)
    bad = np.flatnonzero(K.gram[iu, ju] <= 0)
    if bad.size:
        pairs = [(int(iu[b]), int(ju[b])) for b in bad[:max_pairs]]
        return ScalabilityDiagnosis(
            False,
            n,
            pairs,
            f"{bad.size} off-diagonal kernel entries are zero "
            f"(first: {pairs[0]}); increase epsilon",
        )
    return ScalabilityDiagnosis(True, n, [], "ok")


def _inverse_row_sums(gram):
    sums = gram.sum(axis=1)
    zero = np.flatnonzero(sums <= 0)
    if zero.size:
        raise DegenerateKernelError(
            f"kernel rows {zero[:10].tolist()} sum to zero; increase epsilon"
        )
    return 1.0 / sums


def row_stochastic(K):
    """``diag(r) K`` with ``r_i = 1 / sum_j K[i, j]``; every row sums to 1."""
    K = _as_kernel(K)
    r = _inverse_row_sums(K.gram)
    return AffinityMatrix(r[:, None] * K.gram, "row", r, K.epsilon)


def symmetric_normalize(K):
    """``sqrt(diag(r)) K sqrt(diag(r))``, similar to the row-stochastic matrix."""
    K = _as_kernel(K)
    r = _inverse_row_sums(K.gram)
    s = np.sqrt(r)
    return AffinityMatrix(mirror_upper(s[:, None] * K.gram * s[None, :]), "symmetric", r, K.epsilon)


def _ratio_gap(older, newer):
    return float(np.max(np.abs(older / newer - 1.0)))


def _tail_rate(gaps):
    if len(gaps) <= RATE_WINDOW:
        return math.nan
    first, last = gaps[-RATE_WINDOW - 1], gaps[-1]
    if not (first > 0 and last > 0):
        return math.nan
    per_step = (last / first) ** (1.0 / RATE_WINDOW)
    return per_step**2


def sinkhorn_symmetric(K, cfg=None, *, d0=None):
    """Scale a symmetric kernel to a symmetric doubly-stochastic matrix.

    Iterates ``d^(t+1) = 1 / (K d^(t))`` from ``d^(0) = 1 / (K 1)`` until
    ``max_i |d_i^(t-2) / d_i^(t) - 1| <= cfg.delta``, then returns
    ``d = sqrt(d^(t) * d^(t-1))`` and ``W = diag(d) K diag(d)``.

    Parameters
    ----------
    K : KernelMatrix or array
    cfg : SinkhornConfig, optional
    d0 : array of shape (n,), optional
        Replaces the default starting vector. Any positive vector gives
        the same limit.

    Returns
    -------
    affinity : AffinityMatrix
        ``variant == "doubly"``, ``scaling == d``.
    report : SinkhornReport

    Raises
    ------
    PreconditionError
        If :func:`check_scalable` fails.
    SinkhornConvergenceError
        If ``cfg.max_iters`` loop iterations do not reach the tolerance.
        The partial report is attached.
    """
    K = _as_kernel(K)
    cfg = SinkhornConfig() if cfg is None else cfg
    diag = check_scalable(K)
    if not diag:
        raise PreconditionError(diag.message)
    gram = K.gram

    if d0 is None:
        d_old = 1.0 / gram.sum(axis=1)
    else:
        d_old = check_vector(d0, "d0", K.n)
        if np.any(d_old <= 0):
            raise InputError("d0 must be strictly positive")
    d_mid = 1.0 / (gram @ d_old)
    d_new = 1.0 / (gram @ d_mid)

    gap = _ratio_gap(d_old, d_new)
    gaps = deque([gap], maxlen=RATE_WINDOW + 1)
    iters = 0
    while gap > cfg.delta:
        if iters >= cfg.max_iters:
            report = SinkhornReport(iters, gap, False, _tail_rate(gaps))
            raise SinkhornConvergenceError(
                f"Sinkhorn did not converge in {iters} iterations "
                f"(ratio gap {gap:.3g} > {cfg.delta:g}); increase epsilon",
                report,
            )
        d_old, d_mid, d_new = d_mid, d_new, 1.0 / (gram @ d_new)
        gap = _ratio_gap(d_old, d_new)
        gaps.append(gap)
        iters += 1

    d = np.sqrt(d_new * d_mid)
    w = mirror_upper(d[:, None] * gram * d[None, :])
    report = SinkhornReport(iters, gap, True, _tail_rate(gaps))
    return AffinityMatrix(w, "doubly", d, K.epsilon), report


def normalize(K, variant, cfg=None):
    """Dispatch to one of the three normalizations by name.

    ``"sym"`` is accepted as an alias of ``"symmetric"``. Returns the
    affinity and, for the doubly variant, the Sinkhorn report (else None).
    """
    if variant == "sym":
        variant = "symmetric"
    if variant == "row":
        return row_stochastic(K), None
    if variant == "symmetric":
        return symmetric_normalize(K), None
    if variant == "doubly":
        return sinkhorn_symmetric(K, cfg)
    raise InputError(f"unknown variant {variant!r}; expected row, sym or doubly")


def estimate_rate(report, W):
    """Compare the observed Sinkhorn rate with the squared subdominant eigenvalue.

    Returns ``(empirical, predicted)``, where ``predicted`` is
    ``lambda_2 ** 2`` with ``lambda_2`` the second-largest eigenvalue of
    ``W`` in magnitude. Nothing is asserted about their agreement.
    """
    if W.variant != "doubly":
        raise InputError(f"rate estimate needs a doubly-stochastic affinity, got {W.variant!r}")
    if not report.converged:
        raise InputError("rate estimate needs a converged Sinkhorn report")
    vals, _ = sym_eigen_topk(W.w, W.n)
    mags = np.sort(np.abs(vals))[::-1]
    return report.rate_estimate, float(mags[1] ** 2)


def gauge_decompose(X, W):
    """Split ``W`` into per-point scales ``u`` and inner-product factors ``h``.

    ``u_i = d_i exp(-||x_i||^2 / eps)`` and ``h_ij = exp(2 <x_i, x_j> / eps)``
    off the diagonal (zero on it). ``X`` must be the data behind ``W``.
    """
    if W.variant != "doubly":
        raise InputError(f"gauge decomposition needs a doubly affinity, got {W.variant!r}")
    if W.epsilon is None:
        raise InputError("affinity carries no epsilon")
    X = check_data(X, min_points=1)
    if X.shape[0] != W.n:
        raise InputError(f"data has {X.shape[0]} points but affinity is {W.n}x{W.n}")
    eps = W.epsilon
    u = W.scaling * np.exp(-np.einsum("ij,ij->i", X, X) / eps)
    h = np.exp(2.0 * (X @ X.T) / eps)
    np.fill_diagonal(h, 0.0)
    return GaugeDecomposition(u, mirror_upper(h))
