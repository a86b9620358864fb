"""Desk-scale studies comparing the three normalizations under noise.

Each study cell draws its random numbers from a substream keyed by
``(seed, ...)``, so results do not depend on execution order or on
``n_jobs``.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .datagen import (
    BallNoiseSpec,
    CircleSpec,
    GaussianHeteroNoiseSpec,
    add_ball_noise,
    add_gaussian_hetero_noise,
    gen_circle,
    gen_scrna,
    make_rng,
)
from .exceptions import DimensionError, InputError, NumericError, SinkhornConvergenceError
from .io import read_rows_csv, write_rows_csv
from .kernel import KernelMatrix, check_data, gaussian_kernel, pairwise_sq_dists
from .linalg import mirror_upper
from .normalize import (
    VARIANTS,
    AffinityMatrix,
    SinkhornConfig,
    normalize,
    row_stochastic,
    sinkhorn_symmetric,
    symmetric_normalize,
)
from .spectral import decompose, embed2d, radius_cv, subspace_affinity

logger = logging.getLogger(__name__)

__all__ = [
    "ConvergenceStudySpec",
    "StudyResult",
    "run_convergence_study",
    "fit_loglog_slope",
    "bias_ratio_check",
    "OtObjective",
    "ot_objective",
    "ot_optimality_test",
    "knn_inconsistency",
    "knn_curve",
    "probe_epsilon",
    "ScrnaStudyResult",
    "run_scrna_study",
    "EigenStudyResult",
    "run_eigen_study",
    "export_csv",
]


def _all_normalizations(K, cfg):
    doubly, _ = sinkhorn_symmetric(K, cfg)
    return {"row": row_stochastic(K), "symmetric": symmetric_normalize(K), "doubly": doubly}


# -- Frobenius error versus dimension -------------------------------------


@dataclass(frozen=True)
class ConvergenceStudySpec:
    n: int = 200
    dims: tuple = (100, 316, 1000, 3162)
    trials: int = 5
    epsilon: float = 0.1
    noise: GaussianHeteroNoiseSpec = field(default_factory=GaussianHeteroNoiseSpec)
    seed: int = 0
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)

    def __post_init__(self):
        dims = tuple(int(m) for m in self.dims)
        if len(dims) < 3 or list(dims) != sorted(dims) or len(set(dims)) != len(dims):
            raise InputError(f"dims must be >= 3 strictly increasing values, got {self.dims}")
        if dims[0] < 2:
            raise InputError("dims must be >= 2")
        if self.trials < 1:
            raise InputError("trials must be >= 1")
        if self.n < 3:
            raise InputError("n must be >= 3")
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def full(cls):
        """The full-size configuration: n = 1000, 10 trials, m from 10 to 1e4."""
        dims = tuple(int(round(10 ** e)) for e in np.arange(1.0, 4.01, 0.25))
        return cls(n=1000, dims=dims, trials=10)


def fit_window(dims):
    """Upper half of the dimension grid (the median point included)."""
    dims = sorted(dims)
    return dims[(len(dims) - 1) // 2 :]


def fit_loglog_slope(ms, errors):
    """Least-squares slope of ``log(error)`` against ``log(m)``.

    NaN when any error is nonpositive or fewer than two points remain.
    """
    ms = np.asarray(ms, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if ms.size < 2 or np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        return math.nan
    slope, _ = np.polyfit(np.log(ms), np.log(errors), 1)
    return float(slope)


@dataclass
class StudyResult:
    """Mean squared Frobenius error per ``(m, variant)``.

    ``rows`` holds ``(m, variant, n_ok, mean_sq_error)`` sorted by m then
    variant order; ``failed`` maps m to the number of trials whose
    Sinkhorn run did not converge.
    """

    rows: list
    failed: dict = field(default_factory=dict)
    slopes: dict = field(default_factory=dict)
    fit_dims: tuple = ()

    csv_header = ("m", "variant", "trials_ok", "mean_sq_frobenius_error")

    def errors(self, variant):
        pairs = [(m, e) for m, v, _, e in self.rows if v == variant]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def error_at(self, m, variant):
        for mm, v, _, e in self.rows:
            if mm == m and v == variant:
                return e
        raise KeyError((m, variant))

    def refit(self, fit_dims=None):
        dims = sorted({r[0] for r in self.rows})
        self.fit_dims = tuple(fit_window(dims) if fit_dims is None else fit_dims)
        for variant in VARIANTS:
            ms, errs = self.errors(variant)
            keep = np.isin(ms, self.fit_dims)
            self.slopes[variant] = fit_loglog_slope(ms[keep], errs[keep])
        return self

    def csv_rows(self):
        return [(int(m), v, int(k), float(e)) for m, v, k, e in self.rows]

    @classmethod
    def from_csv(cls, path):
        header, raw = read_rows_csv(path)
        if tuple(header) != cls.csv_header:
            raise InputError(f"unexpected header {header}")
        rows = [(int(m), v, int(k), float(e)) for m, v, k, e in raw]
        return cls(rows).refit() if rows else cls(rows)


def _convergence_cell(spec, m, trial):
    thetas = make_rng(spec.seed, trial).uniform(0.0, 2.0 * np.pi, spec.n)
    X = gen_circle(CircleSpec(spec.n, m, thetas), make_rng(spec.seed, trial, m, 0))
    Xn, _ = add_gaussian_hetero_noise(X, spec.noise, make_rng(spec.seed, trial, m, 1))
    try:
        clean = _all_normalizations(gaussian_kernel(X, spec.epsilon), spec.sinkhorn)
        noisy = _all_normalizations(gaussian_kernel(Xn, spec.epsilon), spec.sinkhorn)
    except (SinkhornConvergenceError, InputError) as exc:
        logger.warning("m=%d trial=%d failed: %s", m, trial, exc)
        return None
    return {v: float(np.sum((noisy[v].w - clean[v].w) ** 2)) for v in VARIANTS}


def run_convergence_study(spec, n_jobs=1):
    """Squared Frobenius error between clean and noisy affinities versus m.

    For every ``m`` and trial: a unit circle embedded in ``R^m`` by a
    random frame (angles fixed per trial), heteroskedastic Gaussian noise,
    and the three normalizations of both kernels. Errors are averaged
    over the trials that converged; the log-log slope is fitted over the
    upper half of ``spec.dims``.
    """
    cells = [(m, t) for m in spec.dims for t in range(spec.trials)]
    if n_jobs == 1:
        outcomes = [_convergence_cell(spec, m, t) for m, t in cells]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(lambda c: _convergence_cell(spec, *c), cells))

    rows, failed = [], {}
    for m in spec.dims:
        ok = [o for (mm, _), o in zip(cells, outcomes) if mm == m and o is not None]
        failed[m] = spec.trials - len(ok)
        if not ok:
            raise NumericError(
                f"all {spec.trials} trials failed at m = {m}; increase epsilon "
                f"(currently {spec.epsilon:g})"
            )
        for v in VARIANTS:
            rows.append((m, v, len(ok), float(np.mean([o[v] for o in ok]))))
    return StudyResult(rows, failed).refit()


# -- Bias of noisy kernels --------------------------------------------------


def bias_ratio_check(X, Xn, noise_mags, epsilon, return_excluded=False):
    """Largest deviation of the noisy kernel from the diagonally rescaled clean one.

    Returns ``max_{i != j} |log(Kn_ij / (exp(-s_i/eps) K_ij exp(-s_j/eps)))|``
    where ``s = noise_mags``. Pairs where either kernel underflowed to
    zero are skipped; ``return_excluded=True`` also returns their count.
    """
    X = check_data(X, min_points=2)
    Xn = check_data(Xn, min_points=2)
    if X.shape != Xn.shape:
        raise DimensionError(f"shape mismatch {X.shape} vs {Xn.shape}")
    noise_mags = np.asarray(noise_mags, dtype=float)
    if noise_mags.shape != (X.shape[0],):
        raise DimensionError("noise_mags must have one entry per point")
    K = gaussian_kernel(X, epsilon).gram
    Kn = gaussian_kernel(Xn, epsilon).gram
    shrink = np.exp(-noise_mags / epsilon)
    expected = shrink[:, None] * K * shrink[None, :]
    iu, ju = np.triu_indices(X.shape[0], 1)
    num, den = Kn[iu, ju], expected[iu, ju]
    usable = (num > 0) & (den > 0)
    excluded = int(np.count_nonzero(~usable))
    if excluded:
        logger.info("bias ratio: %d underflowed pairs excluded", excluded)
    stat = float(np.max(np.abs(np.log(num[usable] / den[usable])))) if usable.any() else math.nan
    return (stat, excluded) if return_excluded else stat


# -- Entropic optimal transport view ---------------------------------------


@dataclass(frozen=True)
class OtObjective:
    transport_cost: float
    neg_entropy: float
    epsilon: float

    @property
    def total(self):
        return self.transport_cost + self.epsilon * self.neg_entropy


def ot_objective(X, W, epsilon=None):
    """Transport cost ``sum D_ij W_ij`` and negative entropy ``sum W_ij log W_ij``.

    ``0 log 0`` is taken as 0. ``epsilon`` defaults to ``W.epsilon``.
    """
    X = check_data(X, min_points=1)
    w = W.w if isinstance(W, AffinityMatrix) else np.asarray(W, dtype=float)
    if epsilon is None:
        epsilon = getattr(W, "epsilon", None)
    if epsilon is None:
        raise InputError("epsilon is required")
    if w.shape != (X.shape[0], X.shape[0]):
        raise DimensionError(f"W has shape {w.shape} for {X.shape[0]} points")
    if np.any(w < 0):
        raise InputError("W has negative entries")
    D = pairwise_sq_dists(X)
    pos = w > 0
    neg_entropy = float(np.sum(w[pos] * np.log(w[pos])))
    return OtObjective(float(np.sum(D * w)), neg_entropy, float(epsilon))


def _random_doubly(n, rng, cfg, retries=10):
    for _ in range(retries):
        a = rng.uniform(0.05, 1.0, (n, n)) ** rng.uniform(1.0, 6.0)
        a = mirror_upper(a)
        np.fill_diagonal(a, 0.0)
        try:
            w, _ = sinkhorn_symmetric(KernelMatrix(a), cfg)
        except (SinkhornConvergenceError, InputError):
            continue
        return w.w
    raise NumericError(f"could not build a feasible competitor in {retries} attempts")


def ot_optimality_test(X, epsilon, competitors, seed, tol=1e-9, return_margin=False):
    """Check that the doubly-stochastic kernel beats feasible competitors.

    ``competitors`` is either a count of random symmetric doubly-stochastic
    zero-diagonal matrices to draw, or an explicit sequence of matrices.
    Passes iff ``objective(W_d) <= objective(C) + tol`` for every ``C``.
    ``return_margin=True`` also returns ``min(objective(C) - objective(W_d))``.
    """
    X = check_data(X)
    cfg = SinkhornConfig()
    wd, _ = sinkhorn_symmetric(gaussian_kernel(X, epsilon), cfg)
    best = ot_objective(X, wd).total
    if isinstance(competitors, (int, np.integer)):
        rng = make_rng(seed)
        candidates = (_random_doubly(X.shape[0], rng, cfg) for _ in range(competitors))
    else:
        candidates = iter(competitors)
    margin = math.inf
    for c in candidates:
        margin = min(margin, ot_objective(X, c, epsilon).total - best)
    ok = margin >= -tol
    return (ok, margin) if return_margin else ok


# -- Nearest-neighbour label consistency -----------------------------------


def _neighbours(w, k):
    n = w.shape[0]
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n - 1:
        raise DimensionError(f"k must be in [1, {n - 1}], got {k!r}")
    w = np.array(w, dtype=float, copy=True)
    np.fill_diagonal(w, -np.inf)
    # stable sort keeps the lower index first among equal values
    return np.argsort(-w, axis=1, kind="stable")[:, :k]


def knn_inconsistency(W, labels, k):
    """Mean fraction of each point's ``k`` strongest neighbours with another label.

    Neighbours of ``i`` are the ``k`` columns ``j != i`` with the largest
    ``W[i, j]``, ties going to the lower index.
    """
    w = W.w if isinstance(W, AffinityMatrix) else np.asarray(W, dtype=float)
    labels = np.asarray(labels)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or labels.shape != (w.shape[0],):
        raise DimensionError("W must be square with one label per row")
    nbrs = _neighbours(w, k)
    return float(np.mean(labels[nbrs] != labels[:, None]))


def knn_curve(W, labels, ks):
    w = W.w if isinstance(W, AffinityMatrix) else np.asarray(W, dtype=float)
    labels = np.asarray(labels)
    nbrs = _neighbours(w, max(ks))
    wrong = labels[nbrs] != labels[:, None]
    return np.array([wrong[:, :k].mean() for k in ks])


def probe_epsilon(X, grid, cfg=None):
    """Smallest kernel width on ``grid`` for which Sinkhorn converges.

    Widths are tried from largest to smallest and probing stops at the
    first failure, so convergence is assumed monotone in epsilon.
    Returns ``(best, trace)`` with ``trace`` a list of
    ``(epsilon, converged, iters)``; ``best`` is None if nothing converged.
    """
    X = check_data(X)
    cfg = SinkhornConfig() if cfg is None else cfg
    D = pairwise_sq_dists(X)
    best, trace = None, []
    for eps in sorted({float(e) for e in grid}, reverse=True):
        if eps <= 0:
            raise InputError(f"epsilon grid values must be positive, got {eps}")
        gram = np.exp(-D / eps)
        np.fill_diagonal(gram, 0.0)
        try:
            _, report = sinkhorn_symmetric(KernelMatrix(gram, eps), cfg)
        except SinkhornConvergenceError as exc:
            trace.append((eps, False, exc.report.iters))
            break
        except InputError:
            trace.append((eps, False, 0))
            break
        trace.append((eps, True, report.iters))
        best = eps
    return best, trace


@dataclass
class ScrnaStudyResult:
    ks: np.ndarray
    curves: dict
    log10_affinities: dict
    epsilon: float
    sinkhorn_iters: int

    csv_header = ("variant", "k", "inconsistency")

    def csv_rows(self):
        return [
            (v, int(k), float(val))
            for v in VARIANTS
            for k, val in zip(self.ks, self.curves[v])
        ]


def run_scrna_study(spec, epsilon, seed, ks=range(1, 21), dataset=None, cfg=None):
    """kNN cell-type inconsistency of each normalization.

    Data are simulated from ``spec`` unless a labeled ``dataset`` (for
    instance ingested PBMC cells) is given.
    """
    ds = gen_scrna(spec, seed) if dataset is None else dataset
    if ds.labels is None:
        raise InputError("the study needs labeled data")
    ks = np.asarray(list(ks), dtype=int)
    K = gaussian_kernel(ds.data, epsilon)
    doubly, report = sinkhorn_symmetric(K, cfg)
    affinities = {"row": row_stochastic(K), "symmetric": symmetric_normalize(K), "doubly": doubly}
    curves = {v: knn_curve(w, ds.labels, ks) for v, w in affinities.items()}
    with np.errstate(divide="ignore"):
        logs = {v: np.log10(w.w) for v, w in affinities.items()}
    return ScrnaStudyResult(ks, curves, logs, float(epsilon), report.iters)


# -- Eigenvector robustness -------------------------------------------------


@dataclass
class EigenStudyResult:
    subspace: dict
    embeddings: dict
    radius_cv: dict
    eigenvalues: dict

    csv_header = ("variant", "subspace_affinity", "clean_radius_cv", "noisy_radius_cv")
    embedding_header = ("variant", "condition", "index", "x", "y")

    def csv_rows(self):
        return [
            (v, self.subspace[v], self.radius_cv[v, "clean"], self.radius_cv[v, "noisy"])
            for v in VARIANTS
        ]

    def embedding_rows(self):
        rows = []
        for v in VARIANTS:
            for cond in ("clean", "noisy"):
                for i, (x, y) in enumerate(self.embeddings[v, cond]):
                    rows.append((v, cond, i, float(x), float(y)))
        return rows


def run_eigen_study(n, m, epsilon, ball, seed, k=5, cfg=None):
    """Leading eigenvectors of clean versus ball-noised circle affinities."""
    ball = BallNoiseSpec() if ball is None else ball
    X, thetas = gen_circle(CircleSpec(n, m), make_rng(seed, 0), return_angles=True)
    Xn = add_ball_noise(X, thetas, ball, make_rng(seed, 1))
    subspace, embeddings, cvs, eigvals = {}, {}, {}, {}
    decs = {}
    for cond, data in (("clean", X), ("noisy", Xn)):
        K = gaussian_kernel(data, epsilon)
        for v in VARIANTS:
            W, _ = normalize(K, v, cfg)
            dec = decompose(W, k)
            decs[v, cond] = dec
            embeddings[v, cond] = embed2d(dec)
            cvs[v, cond] = radius_cv(embeddings[v, cond])
            eigvals[v, cond] = dec.eigenvalues
    for v in VARIANTS:
        subspace[v] = subspace_affinity(decs[v, "clean"], decs[v, "noisy"], k)
    return EigenStudyResult(subspace, embeddings, cvs, eigvals)


def export_csv(result, path, kind="summary"):
    """Write a study result as long-format CSV (header row, LF endings).

    ``kind="embeddings"`` writes the per-point coordinates of an
    :class:`EigenStudyResult` instead of its summary.
    """
    if kind == "embeddings":
        write_rows_csv(path, result.embedding_header, result.embedding_rows())
    else:
        write_rows_csv(path, result.csv_header, result.csv_rows())


def spearman_trend(ms, errors):
    """Spearman correlation between dimension and error."""
    return float(spearmanr(ms, errors).statistic)
