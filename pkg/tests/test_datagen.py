import math

import numpy as np
import pytest
import scipy.sparse
from hypothesis import given, settings
from hypothesis import strategies as st

from dsnorm.datagen import (
    BallNoiseSpec,
    CircleSpec,
    GaussianHeteroNoiseSpec,
    LabeledDataset,
    ScrnaSpec,
    add_ball_noise,
    add_gaussian_hetero_noise,
    gen_circle,
    gen_scrna,
    load_matrix_market,
    make_rng,
    random_frame,
    subsample_by_label,
    write_matrix_market,
)
from dsnorm.exceptions import DimensionError, InputError, MalformedFileError
from dsnorm.io import write_labels
from dsnorm.kernel import pairwise_sq_dists


def test_make_rng_substreams_differ():
    a = make_rng(3, 1).uniform(size=4)
    b = make_rng(3, 2).uniform(size=4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, make_rng(3, 1).uniform(size=4))
    with pytest.raises(InputError):
        make_rng(np.random.default_rng(0), 1)


def test_random_frame_orthonormal(rng):
    q = random_frame(50, 2, rng)
    np.testing.assert_allclose(q.T @ q, np.eye(2), atol=1e-12)


# -- circle -----------------------------------------------------------------


def test_circle_identity_rotation_hook():
    spec = CircleSpec(3, 2, thetas=[0, math.pi / 2, math.pi])
    X = gen_circle(spec, 0, rotation=np.eye(2))
    np.testing.assert_allclose(X, [[1, 0], [0, 1], [-1, 0]], atol=1e-15)
    rotated = gen_circle(spec, 0)
    np.testing.assert_allclose(pairwise_sq_dists(rotated), pairwise_sq_dists(X), atol=1e-12)


@pytest.mark.parametrize("m", [2, 3, 100, 1000])
def test_circle_unit_norms_and_distances(m):
    X, thetas = gen_circle(CircleSpec(60, m), m, return_angles=True)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)
    flat = np.c_[np.cos(thetas), np.sin(thetas)]
    np.testing.assert_allclose(pairwise_sq_dists(X), pairwise_sq_dists(flat), atol=1e-10)
    assert thetas.min() >= 0 and thetas.max() < 2 * math.pi


def test_circle_determinism():
    spec = CircleSpec(20, 5)
    np.testing.assert_array_equal(gen_circle(spec, 11), gen_circle(spec, 11))
    assert not np.array_equal(gen_circle(spec, 11), gen_circle(spec, 12))


def test_circle_spec_validation():
    with pytest.raises(DimensionError):
        CircleSpec(5, 1)
    with pytest.raises(DimensionError):
        CircleSpec(5, 2, thetas=[0.0, 1.0])
    with pytest.raises(DimensionError):
        gen_circle(CircleSpec(3, 3), 0, rotation=np.eye(2))


# -- Gaussian hetero noise ------------------------------------------------------


def test_hetero_noise_magnitudes_in_band():
    X = gen_circle(CircleSpec(300, 500), 0)
    noisy, mags = add_gaussian_hetero_noise(X, GaussianHeteroNoiseSpec(), 1)
    assert noisy.shape == X.shape
    assert np.all(mags >= 1 / 400) and np.all(mags <= 1 / 4)


def test_hetero_noise_monte_carlo(rng):
    n, m, redraws = 4, 50, 200
    spec = GaussianHeteroNoiseSpec(alpha=rng.uniform(0.05, 0.5, n), beta=rng.uniform(0.05, 0.5, m))
    X = np.zeros((n, m))
    sq = np.empty((redraws, n))
    for s in range(redraws):
        noisy, mags = add_gaussian_hetero_noise(X, spec, s)
        sq[s] = np.sum(noisy**2, axis=1)
    se = sq.std(axis=0, ddof=1) / math.sqrt(redraws)
    assert np.all(np.abs(sq.mean(axis=0) - mags) < 3 * se)


def test_hetero_noise_degenerate_ranges():
    c, m = 0.3, 16
    spec = GaussianHeteroNoiseSpec(alpha_range=(c, c), beta_range=(c, c))
    X = np.zeros((2000, m))
    noisy, mags = add_gaussian_hetero_noise(X, spec, 5)
    np.testing.assert_allclose(mags, c * c)
    # every entry has standard deviation c / sqrt(m)
    assert noisy.std() == pytest.approx(c / math.sqrt(m), rel=0.01)


def test_hetero_noise_zero():
    X = gen_circle(CircleSpec(10, 4), 0)
    noisy, mags = add_gaussian_hetero_noise(X, GaussianHeteroNoiseSpec((0, 0), (0, 0)), 1)
    np.testing.assert_array_equal(noisy, X)
    assert np.all(mags == 0)


def test_hetero_noise_validation():
    with pytest.raises(InputError):
        GaussianHeteroNoiseSpec(alpha_range=(0.5, 0.1))
    with pytest.raises(DimensionError):
        add_gaussian_hetero_noise(np.zeros((3, 2)), GaussianHeteroNoiseSpec(alpha=np.ones(2)), 0)


# -- ball noise -------------------------------------------------------------------


def test_ball_rho_range():
    spec = BallNoiseSpec()
    assert spec.rho(math.pi / 2) == pytest.approx(0.01)
    assert spec.rho(3 * math.pi / 2) == pytest.approx(0.01)
    assert spec.rho(0.0) == pytest.approx(1.0)
    t = np.linspace(0, 2 * math.pi, 1000)
    assert np.all((spec.rho(t) >= 0.01 - 1e-15) & (spec.rho(t) <= 1.0 + 1e-15))


@pytest.mark.parametrize("theta,bound", [(math.pi / 2, 0.01), (0.0, 1.0)])
def test_ball_noise_radius_bounds(theta, bound):
    n, m = 500, 20
    X = np.zeros((n, m))
    noise = add_ball_noise(X, np.full(n, theta), BallNoiseSpec(), 3)
    assert np.all(np.linalg.norm(noise, axis=1) <= bound + 1e-12)


def test_ball_noise_area_ratio():
    n, theta = 10_000, 0.4
    rho = BallNoiseSpec().rho(theta)
    noise = add_ball_noise(np.zeros((n, 2)), np.full(n, theta), BallNoiseSpec(), 9)
    inside = np.mean(np.linalg.norm(noise, axis=1) < rho / math.sqrt(2))
    assert inside == pytest.approx(0.5, abs=0.02)


def test_ball_noise_length_mismatch():
    with pytest.raises(DimensionError):
        add_ball_noise(np.zeros((4, 3)), np.zeros(3), BallNoiseSpec(), 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 40))
def test_ball_noise_support(seed, m):
    X, thetas = gen_circle(CircleSpec(30, max(m, 2)), seed, return_angles=True)
    spec = BallNoiseSpec()
    noise = add_ball_noise(X, thetas, spec, seed) - X
    assert np.all(np.linalg.norm(noise, axis=1) <= spec.rho(thetas) + 1e-12)


# -- scRNA simulator ----------------------------------------------------------


def test_scrna_rows_sum_to_one():
    ds = gen_scrna(ScrnaSpec(m=200, groups=((20, 0, 500), (10, 1, 5000))), 0)
    np.testing.assert_allclose(ds.data.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(ds.data >= 0)


def test_scrna_full_configuration():
    spec = ScrnaSpec.full()
    assert spec.n == 1000 and spec.m == 4000
    ds = gen_scrna(spec, 1)
    assert ds.data.shape == (1000, 4000)
    np.testing.assert_array_equal(np.bincount(ds.labels), [500, 500])
    # group blocks appear in the order they were declared
    np.testing.assert_array_equal(ds.labels[:500], 0)
    np.testing.assert_array_equal(ds.labels[500:], 1)


def test_scrna_mean_matches_prototype(rng):
    m, redraws = 30, 500
    proto = rng.uniform(size=m)
    proto /= proto.sum()
    spec = ScrnaSpec(m=m, groups=((1, 0, 200),), prototypes=proto[None, :])
    draws = np.vstack([gen_scrna(spec, s).data for s in range(redraws)])
    se = draws.std(axis=0, ddof=1) / math.sqrt(redraws)
    assert np.all(np.abs(draws.mean(axis=0) - proto) < 3 * se + 1e-15)


def test_scrna_spec_validation():
    with pytest.raises(InputError):
        ScrnaSpec(m=5, groups=((3, 0, 0),))
    with pytest.raises(InputError):
        ScrnaSpec(m=5, groups=((3, 2, 10),))
    with pytest.raises(InputError):
        ScrnaSpec(m=2, groups=((3, 0, 10),), prototypes=np.array([[0.7, 0.7]]))
    with pytest.raises(DimensionError):
        LabeledDataset(np.zeros((3, 2)), np.zeros(2))


# -- Matrix Market --------------------------------------------------------------


def _toy_mtx(path):
    path.write_text(
        "%%MatrixMarket matrix coordinate integer general\n"
        "3 2 5\n"
        "1 1 1\n1 2 1\n2 1 2\n3 1 1\n3 2 3\n"
    )
    return path


def test_mtx_toy_normalization(tmp_path):
    ds = load_matrix_market(_toy_mtx(tmp_path / "toy.mtx"))
    np.testing.assert_allclose(ds.data, [[0.25, 0.5, 0.25], [0.25, 0.0, 0.75]], atol=1e-15)
    raw = load_matrix_market(tmp_path / "toy.mtx", normalize_columns=False)
    np.testing.assert_array_equal(raw.data, [[1, 2, 1], [1, 0, 3]])


def test_mtx_round_trip(tmp_path, rng):
    dense = scipy.sparse.random(7, 12, density=0.3, random_state=1).toarray()
    write_matrix_market(tmp_path / "r.mtx", dense)
    back = load_matrix_market(tmp_path / "r.mtx", normalize_columns=False)
    np.testing.assert_allclose(back.data, dense, atol=1e-12)


def test_mtx_labels(tmp_path):
    write_labels(tmp_path / "l.txt", [4, 2])
    ds = load_matrix_market(_toy_mtx(tmp_path / "toy.mtx"), labels_path=tmp_path / "l.txt")
    np.testing.assert_array_equal(ds.labels, [4, 2])
    write_labels(tmp_path / "bad.txt", [1, 2, 3])
    with pytest.raises(DimensionError):
        load_matrix_market(tmp_path / "toy.mtx", labels_path=tmp_path / "bad.txt")


@pytest.mark.parametrize(
    "text",
    [
        "%%MatrixMarket matrix coordinate integer general\n",
        "%%MatrixMarket matrix coordinate integer general\n3 2 5\n1 1 1\n",
        "not a matrix market file\n1 2 3\n",
    ],
)
def test_mtx_malformed(tmp_path, text):
    path = tmp_path / "bad.mtx"
    path.write_text(text)
    with pytest.raises(MalformedFileError):
        load_matrix_market(path)


def test_mtx_zero_count_cell(tmp_path):
    path = tmp_path / "z.mtx"
    path.write_text("%%MatrixMarket matrix coordinate integer general\n2 2 1\n1 1 4\n")
    with pytest.raises(InputError):
        load_matrix_market(path)


# -- subsampling -----------------------------------------------------------------


@pytest.fixture
def labeled():
    data = np.arange(20, dtype=float).reshape(10, 2)
    return LabeledDataset(data, np.array([0, 1, 0, 1, 2, 0, 1, 2, 0, 1]))


def test_subsample_full_counts_permutes_blocks(labeled):
    out = subsample_by_label(labeled, [(1, 4), (0, 4), (2, 2)], 0)
    np.testing.assert_array_equal(out.labels, [1] * 4 + [0] * 4 + [2] * 2)
    for lab in (0, 1, 2):
        got = sorted(map(tuple, out.data[out.labels == lab]))
        assert got == sorted(map(tuple, labeled.data[labeled.labels == lab]))


def test_subsample_zero_count_and_determinism(labeled):
    out = subsample_by_label(labeled, [(0, 2), (2, 0)], 4)
    assert 2 not in out.labels and len(out.labels) == 2
    again = subsample_by_label(labeled, [(0, 2), (2, 0)], 4)
    np.testing.assert_array_equal(out.data, again.data)


def test_subsample_insufficient(labeled):
    with pytest.raises(InputError):
        subsample_by_label(labeled, [(2, 3)], 0)
