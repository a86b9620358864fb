"""Synthetic datasets, noise models and scRNA-seq ingestion.

Every generator takes an integer ``seed`` (plus optional substream keys)
and is deterministic in it; NumPy's PCG64 via :class:`~numpy.random.SeedSequence`
provides the streams.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse

from .exceptions import DimensionError, InputError, MalformedFileError
from .io import read_labels
from .kernel import check_data

__all__ = [
    "make_rng",
    "CircleSpec",
    "GaussianHeteroNoiseSpec",
    "BallNoiseSpec",
    "ScrnaSpec",
    "LabeledDataset",
    "random_frame",
    "gen_circle",
    "add_gaussian_hetero_noise",
    "add_ball_noise",
    "draw_prototypes",
    "gen_scrna",
    "load_matrix_market",
    "write_matrix_market",
    "subsample_by_label",
]


def make_rng(seed, *keys):
    """Generator for ``seed`` and an optional substream path ``keys``."""
    if isinstance(seed, np.random.Generator):
        if keys:
            raise InputError("substream keys need an integer seed")
        return seed
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(e < 0 for e in entropy):
        raise InputError("seeds and substream keys must be nonnegative")
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class CircleSpec:
    n: int
    m: int
    thetas: np.ndarray = None

    def __post_init__(self):
        if self.m < 2:
            raise DimensionError(f"ambient dimension must be >= 2, got {self.m}")
        if self.thetas is not None and len(self.thetas) != self.n:
            raise DimensionError(f"{len(self.thetas)} angles given for n = {self.n}")


@dataclass(frozen=True)
class GaussianHeteroNoiseSpec:
    """Independent Gaussian noise with ``std[i, j] = sqrt(alpha_i beta_j / m)``.

    ``alpha`` (per point) and ``beta`` (per coordinate) are drawn uniformly
    from their ranges unless given explicitly.
    """

    alpha_range: tuple = (0.05, 0.5)
    beta_range: tuple = (0.05, 0.5)
    alpha: np.ndarray = None
    beta: np.ndarray = None

    def __post_init__(self):
        for name in ("alpha_range", "beta_range"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise InputError(f"{name} must satisfy 0 <= low <= high, got {(lo, hi)}")


@dataclass(frozen=True)
class BallNoiseSpec:
    """Uniform noise in an m-ball of radius ``low + (high - low)(1 + cos 2t)/2``."""

    low: float = 0.01
    high: float = 1.0

    def __post_init__(self):
        if self.low < 0 or self.high < self.low:
            raise InputError(f"need 0 <= low <= high, got {(self.low, self.high)}")

    def rho(self, theta):
        return self.low + (self.high - self.low) * (1.0 + np.cos(2.0 * np.asarray(theta))) / 2.0


@dataclass(frozen=True)
class ScrnaSpec:
    """Multinomial count simulator.

    ``groups`` is a sequence of ``(count, prototype_id, trials)``. When
    ``prototypes`` is None, ``n_prototypes`` random prototypes are drawn
    with uniform entries normalized to sum to 1.
    """

    m: int
    groups: tuple
    prototypes: np.ndarray = None
    n_prototypes: int = 2

    def __post_init__(self):
        if self.m < 1:
            raise DimensionError("gene count m must be >= 1")
        n_proto = self.n_prototypes if self.prototypes is None else len(self.prototypes)
        for count, proto, trials in self.groups:
            if count < 0 or trials < 1:
                raise InputError(f"bad group {(count, proto, trials)}: need count >= 0, trials >= 1")
            if not 0 <= proto < n_proto:
                raise InputError(f"prototype id {proto} out of range [0, {n_proto})")
        if self.prototypes is not None:
            p = np.asarray(self.prototypes, dtype=float)
            if p.ndim != 2 or p.shape[1] != self.m:
                raise DimensionError(f"prototypes must have shape (k, {self.m})")
            if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-12):
                raise InputError("prototypes must be nonnegative and sum to 1")

    @classmethod
    def full(cls):
        """Two prototypes, 4000 genes; 500 + 250 cells at 1e3 reads, 250 at 1e4."""
        return cls(m=4000, groups=((500, 0, 1000), (250, 1, 1000), (250, 1, 10_000)))

    @classmethod
    def desk(cls):
        """The same design at a fifth of the size."""
        return cls(m=1000, groups=((100, 0, 1000), (50, 1, 1000), (50, 1, 10_000)))

    @property
    def n(self):
        return sum(g[0] for g in self.groups)


@dataclass(frozen=True)
class LabeledDataset:
    data: np.ndarray
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.labels is not None and len(self.labels) != len(self.data):
            raise DimensionError(f"{len(self.labels)} labels for {len(self.data)} points")


def random_frame(m, k, rng):
    """``m x k`` matrix with orthonormal columns, Haar-distributed.

    QR of a Gaussian matrix with the signs of ``R``'s diagonal moved into
    ``Q`` so the distribution does not depend on the QR convention.
    """
    q, r = np.linalg.qr(rng.standard_normal((m, k)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def gen_circle(spec, seed, *, rotation=None, return_angles=False):
    """Points of the unit circle embedded in ``R^m`` by a random frame.

    Angles are uniform on ``[0, 2 pi)`` unless ``spec.thetas`` is set.
    ``rotation`` (an ``m x 2`` orthonormal frame) overrides the random one.
    """
    rng = make_rng(seed)
    if spec.thetas is None:
        thetas = rng.uniform(0.0, 2.0 * np.pi, spec.n)
    else:
        thetas = np.asarray(spec.thetas, dtype=float)
    if rotation is None:
        frame = random_frame(spec.m, 2, rng)
    else:
        frame = np.asarray(rotation, dtype=float)
        if frame.shape != (spec.m, 2):
            raise DimensionError(f"rotation must have shape ({spec.m}, 2)")
    X = np.column_stack([np.cos(thetas), np.sin(thetas)]) @ frame.T
    if return_angles:
        return X, thetas
    return X


def add_gaussian_hetero_noise(X, spec, seed):
    """Add heteroskedastic Gaussian noise; also return ``E||noise_i||^2``.

    Returns
    -------
    noisy : array of shape (n, m)
    noise_mags : array of shape (n,)
        The analytic expected squared norms ``alpha_i * sum_j beta_j / m``.
    """
    X = check_data(X, min_points=1)
    n, m = X.shape
    rng = make_rng(seed)
    alpha = rng.uniform(*spec.alpha_range, n) if spec.alpha is None else np.asarray(spec.alpha, float)
    beta = rng.uniform(*spec.beta_range, m) if spec.beta is None else np.asarray(spec.beta, float)
    if alpha.shape != (n,) or beta.shape != (m,):
        raise DimensionError(f"alpha/beta must have shapes ({n},) and ({m},)")
    sigma = np.sqrt(np.outer(alpha, beta) / m)
    noisy = X + sigma * rng.standard_normal((n, m))
    return noisy, alpha * beta.sum() / m


def add_ball_noise(X, thetas, spec, seed):
    """Add noise uniform in the m-ball of radius ``spec.rho(theta_i)``.

    Direction is a normalized Gaussian vector, radius ``rho * U**(1/m)``.
    """
    X = check_data(X, min_points=1)
    thetas = np.asarray(thetas, dtype=float)
    n, m = X.shape
    if thetas.shape != (n,):
        raise DimensionError(f"{thetas.shape[0]} angles for {n} points")
    rng = make_rng(seed)
    directions = rng.standard_normal((n, m))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = spec.rho(thetas) * rng.uniform(0.0, 1.0, n) ** (1.0 / m)
    return X + radii[:, None] * directions


def draw_prototypes(m, k, rng):
    """``k`` probability vectors with i.i.d. uniform entries, normalized to sum 1."""
    z = rng.uniform(0.0, 1.0, (k, m))
    totals = z.sum(axis=1, keepdims=True)
    if np.any(totals <= 0):
        raise InputError("degenerate all-zero prototype draw")
    return z / totals


def gen_scrna(spec, seed):
    """Simulate normalized multinomial expression profiles.

    Rows follow ``spec.groups`` in order; each row is a multinomial count
    vector divided by its total. Labels are prototype ids.
    """
    rng = make_rng(seed)
    if spec.prototypes is None:
        prototypes = draw_prototypes(spec.m, spec.n_prototypes, rng)
    else:
        prototypes = np.asarray(spec.prototypes, dtype=float)

    blocks = [np.empty((0, spec.m))]
    labels = [np.empty(0, dtype=int)]
    for count, proto, trials in spec.groups:
        counts = rng.multinomial(trials, prototypes[proto], size=count).astype(float)
        blocks.append(counts / counts.sum(axis=1, keepdims=True))
        labels.append(np.full(count, proto, dtype=int))
    return LabeledDataset(np.vstack(blocks), np.concatenate(labels))


def load_matrix_market(path, normalize_columns=True, labels_path=None):
    """Read a genes x cells Matrix Market file as a cells x genes dataset.

    With ``normalize_columns`` each cell is divided by its total count;
    cells with zero total are then rejected. ``labels_path`` names a
    sidecar with one integer label per cell.
    """
    try:
        mat = scipy.io.mmread(path)
    except (ValueError, OSError, IndexError) as exc:
        raise MalformedFileError(f"cannot parse Matrix Market file {path}: {exc}") from exc
    if scipy.sparse.issparse(mat):
        mat = mat.toarray()
    data = np.asarray(mat, dtype=float).T
    if not np.all(np.isfinite(data)):
        raise MalformedFileError(f"{path} contains non-finite values")
    if normalize_columns:
        totals = data.sum(axis=1)
        zero = np.flatnonzero(totals == 0)
        if zero.size:
            raise InputError(f"cells {zero[:10].tolist()} have zero total count")
        data = data / totals[:, None]
    labels = None
    if labels_path is not None:
        labels = read_labels(labels_path)
        if len(labels) != data.shape[0]:
            raise DimensionError(f"{len(labels)} labels for {data.shape[0]} cells")
    return LabeledDataset(data, labels)


def write_matrix_market(path, cells_by_genes, *, integer=False):
    """Write a cells x genes array as a sparse genes x cells Matrix Market file."""
    mat = scipy.sparse.coo_matrix(np.asarray(cells_by_genes).T)
    if integer:
        mat = mat.astype(np.int64)
    scipy.io.mmwrite(path, mat, precision=17)


def subsample_by_label(ds, wanted, seed):
    """Sample cells per label without replacement, concatenated in ``wanted`` order.

    ``wanted`` is a sequence of ``(label, count)`` pairs.
    """
    if ds.labels is None:
        raise InputError("dataset has no labels")
    rng = make_rng(seed)
    picks = []
    for label, count in wanted:
        members = np.flatnonzero(ds.labels == label)
        if count > members.size:
            raise InputError(f"label {label} has {members.size} members, {count} requested")
        picks.append(rng.choice(members, size=count, replace=False))
    idx = np.concatenate(picks) if picks else np.empty(0, dtype=int)
    return LabeledDataset(ds.data[idx], ds.labels[idx])
